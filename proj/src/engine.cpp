#include "dosefind/engine.hpp"

#include <algorithm>
#include <cmath>

#include "engines_internal.hpp"

namespace dosefind {

std::string to_string(Family f) {
  switch (f) {
    case Family::Crm: return "crm";
    case Family::Boin: return "boin";
    case Family::Mtpi2: return "mtpi2";
    case Family::Keyboard: return "keyboard";
    case Family::Spm: return "spm";
    case Family::I3: return "i3";
  }
  return "?";
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Complete: return "complete";
    case Mode::Tite: return "tite";
    case Mode::Pod: return "pod";
  }
  return "?";
}

bool is_local(Family f) { return f != Family::Crm && f != Family::Spm; }

EngineName parse_engine_name(const std::string& name) {
  EngineName e;
  std::string base = name;
  if (name.rfind("tite-", 0) == 0) {
    e.mode = Mode::Tite;
    base = name.substr(5);
  } else if (name.rfind("pod-", 0) == 0) {
    e.mode = Mode::Pod;
    base = name.substr(4);
  }
  if (base == "crm") e.family = Family::Crm;
  else if (base == "boin") e.family = Family::Boin;
  else if (base == "keyboard") e.family = Family::Keyboard;
  else if (base == "spm") e.family = Family::Spm;
  else if (base == "i3" || base == "i3+3") e.family = Family::I3;
  else if ((base == "mtpi2" || base == "mtpi-2") && e.mode == Mode::Complete) e.family = Family::Mtpi2;
  else if (base == "tpi" && e.mode != Mode::Complete) e.family = Family::Mtpi2;
  else throw InputError("unknown design: " + name);
  return e;
}

std::string engine_name(Family f, Mode m) {
  if (m == Mode::Complete) return to_string(f);
  std::string base = f == Family::Mtpi2 ? "tpi" : to_string(f);
  return (m == Mode::Tite ? "tite-" : "pod-") + base;
}

void DesignConfig::validate() const {
  grid.validate();
  auto e = parse_engine_name(engine);
  if (e.family == Family::Crm || e.family == Family::Spm) {
    auto s = effective_skeleton();
    if (static_cast<int>(s.size()) != grid.J) throw InputError("skeleton length must equal J");
    CrmCurve{s, alpha_sd}.validate();
  }
  if (e.family == Family::Boin) boin();
  if (!model_prior.empty()) {
    auto part = IntervalPartition::build(grid.target, grid.eps1, grid.eps2);
    if (model_prior.size() != part.size()) throw InputError("model_prior must have one mass per sub-interval");
  }
  if (xi_draws < 1) throw InputError("xi_draws must be positive");
  if (pod_enum_cap < 1 || pod_mc_draws < 1) throw InputError("POD budgets must be positive");
  if (crm_points < 2) throw InputError("crm_points must be at least 2");
  if (e.family == Family::I3 && e.mode == Mode::Tite && effective_tox().kind != ToxModelKind::Uniform)
    throw InputError("tite-i3 uses the uniform time-to-toxicity model");
}

std::vector<double> DesignConfig::effective_skeleton() const {
  if (!skeleton.empty()) return skeleton;
  return crm_skeleton(grid.J, grid.target, halfwidth, prior_mtd);
}

BoinBoundaries DesignConfig::boin() const {
  double l = pl > 0.0 ? pl : 0.6 * grid.target;
  double r = pr > 0.0 ? pr : 1.4 * grid.target;
  return boin_boundaries(grid.target, l, r);
}

TimeModelSpec DesignConfig::effective_tox() const {
  if (tox) return *tox;
  auto e = parse_engine_name(engine);
  if (e.family == Family::Mtpi2 && e.mode != Mode::Complete) return TimeModelSpec::piecewise_uniform(3);
  return TimeModelSpec::uniform();
}

void to_json(nlohmann::json& j, const DesignConfig& c) {
  j = nlohmann::json{{"engine", c.engine},
                     {"J", c.grid.J},
                     {"target", c.grid.target},
                     {"eps1", c.grid.eps1},
                     {"eps2", c.grid.eps2},
                     {"window", c.grid.window},
                     {"halfwidth", c.halfwidth},
                     {"prior_mtd", c.prior_mtd},
                     {"alpha_sd", c.alpha_sd},
                     {"xi_draws", c.xi_draws},
                     {"tox_model", c.effective_tox()},
                     {"pod", {{"plugin", c.pod_plugin}, {"enum_cap", c.pod_enum_cap}, {"mc_draws", c.pod_mc_draws}}}};
  if (!c.skeleton.empty()) j["skeleton"] = c.skeleton;
  if (c.pl > 0.0) j["pl"] = c.pl;
  if (c.pr > 0.0) j["pr"] = c.pr;
  if (!c.model_prior.empty()) j["model_prior"] = c.model_prior;
  j["spm"] = {{"c", c.spm_c}};
  if (!c.spm_kappa.empty()) j["spm"]["kappa"] = c.spm_kappa;
}

void from_json(const nlohmann::json& j, DesignConfig& c) {
  c = DesignConfig{};
  if (!j.is_object()) throw InputError("design config must be an object");
  c.engine = j.value("engine", c.engine);
  c.grid.J = j.value("J", c.grid.J);
  c.grid.target = j.value("target", c.grid.target);
  c.grid.eps1 = j.value("eps1", c.grid.eps1);
  c.grid.eps2 = j.value("eps2", c.grid.eps2);
  c.grid.window = j.value("window", c.grid.window);
  if (j.contains("grid")) from_json(j.at("grid"), c.grid);
  c.skeleton = j.value("skeleton", c.skeleton);
  c.halfwidth = j.value("halfwidth", c.halfwidth);
  c.prior_mtd = j.value("prior_mtd", c.prior_mtd);
  c.alpha_sd = j.value("alpha_sd", c.alpha_sd);
  c.crm_points = j.value("crm_points", c.crm_points);
  c.pl = j.value("pl", c.pl);
  c.pr = j.value("pr", c.pr);
  c.model_prior = j.value("model_prior", c.model_prior);
  if (j.contains("spm")) {
    c.spm_c = j["spm"].value("c", c.spm_c);
    c.spm_kappa = j["spm"].value("kappa", c.spm_kappa);
  }
  if (j.contains("tox_model")) c.tox = j["tox_model"].get<TimeModelSpec>();
  c.xi_draws = j.value("xi_draws", c.xi_draws);
  c.cache_n = j.value("cache_n", c.cache_n);
  if (j.contains("pod")) {
    c.pod_plugin = j["pod"].value("plugin", c.pod_plugin);
    c.pod_enum_cap = j["pod"].value("enum_cap", c.pod_enum_cap);
    c.pod_mc_draws = j["pod"].value("mc_draws", c.pod_mc_draws);
  }
}

double PodDistribution::prob(int level) const {
  const PodEntry* e = find(level);
  return e ? e->prob : 0.0;
}

double PodDistribution::prob_below(int level) const {
  double s = 0.0;
  for (const auto& e : entries)
    if (e.level < level) s += e.prob;
  return s;
}

bool PodDistribution::possible_below(int level) const {
  for (const auto& e : entries)
    if (e.level < level && e.possible) return true;
  return false;
}

bool PodDistribution::possible_other(int level) const {
  for (const auto& e : entries)
    if (e.level != level && e.possible) return true;
  return false;
}

const PodEntry* PodDistribution::find(int level) const {
  for (const auto& e : entries)
    if (e.level == level) return &e;
  return nullptr;
}

void to_json(nlohmann::json& j, const PodDistribution& p) {
  j = nlohmann::json::array();
  for (const auto& e : p.entries)
    j.push_back({{"level", e.level}, {"prob", e.prob}, {"possible", e.possible}, {"decision", to_string(e.decision)}});
}

DesignEngine::DesignEngine(DesignConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::shared_ptr<const DesignEngine> DesignEngine::counterpart() const { return shared_from_this(); }

void complete_counts(const Snapshot& s, int J, std::vector<int>& n, std::vector<int>& m) {
  n.assign(J, 0);
  m.assign(J, 0);
  for (const auto& pt : s.patients) {
    if (pt.dose < 1 || pt.dose > J) throw InputError("dose index out of range");
    if (pt.dlt) ++n[pt.dose - 1];
    else if (pt.assessed) ++m[pt.dose - 1];
  }
}

nlohmann::json tally_json(const DoseTally& t) {
  auto j = nlohmann::json::array();
  for (std::size_t z = 0; z < t.size(); ++z)
    j.push_back({{"dose", z + 1}, {"N", t[z].N}, {"n", t[z].n}, {"m", t[z].m}, {"r", t[z].r}});
  return j;
}

EngineResult CompleteEngine::decide(const Snapshot& s, int d, std::uint64_t) const {
  std::vector<int> n, m;
  complete_counts(s, cfg_.grid.J, n, m);
  EngineResult r;
  r.decision = decide_counts(n, m, d);
  r.rationale = explain(n, m, d);
  r.rationale["counts"] = tally_json(tally(s, cfg_.grid.J));
  return r;
}

std::shared_ptr<const DesignEngine> CompleteEngine::counterpart() const { return shared_from_this(); }

nlohmann::json CompleteEngine::explain(const std::vector<int>&, const std::vector<int>&, int) const {
  return nlohmann::json::object();
}

namespace detail {

namespace {

nlohmann::json interval_json(const IntervalPartition& part, const std::vector<double>& pr) {
  auto j = nlohmann::json::array();
  for (std::size_t k = 0; k < part.size(); ++k) {
    const char* l = part.label[k] == IntervalLabel::E ? "E" : (part.label[k] == IntervalLabel::S ? "S" : "D");
    j.push_back({{"lo", part.edges[k]}, {"hi", part.edges[k + 1]}, {"label", l}, {"prob", pr[k]}});
  }
  return j;
}

std::vector<double> model_masses(const DesignConfig& cfg, const IntervalPartition& part) {
  return cfg.model_prior.empty() ? std::vector<double>(part.size(), 1.0) : cfg.model_prior;
}

}  // namespace

Mtpi2Engine::Mtpi2Engine(const DesignConfig& cfg)
    : CompleteEngine(cfg), part_(IntervalPartition::build(cfg.grid.target, cfg.grid.eps1, cfg.grid.eps2)) {
  prior_ = std::make_shared<CountPrior>(PPrior::piecewise(part_.edges, model_masses(cfg_, part_)), part_.edges,
                                        cfg_.cache_n);
}

Decision Mtpi2Engine::from_probs(const std::vector<double>& pr, int d) const {
  return label_decision(part_.label[argmax_label(pr, part_)], d, cfg_.grid.J);
}

Decision Mtpi2Engine::decide_counts(const std::vector<int>& n, const std::vector<int>& m, int d) const {
  return from_probs(prior_->interval_probs(n[d - 1], m[d - 1]), d);
}

nlohmann::json Mtpi2Engine::explain(const std::vector<int>& n, const std::vector<int>& m, int d) const {
  return {{"model_probs", interval_json(part_, prior_->interval_probs(n[d - 1], m[d - 1]))}};
}

KeyboardEngine::KeyboardEngine(const DesignConfig& cfg)
    : CompleteEngine(cfg), part_(IntervalPartition::build(cfg.grid.target, cfg.grid.eps1, cfg.grid.eps2)) {
  prior_ = std::make_shared<CountPrior>(PPrior::beta(1.0, 1.0), part_.edges, cfg_.cache_n);
}

Decision KeyboardEngine::from_probs(const std::vector<double>& pr, int d) const {
  return label_decision(part_.label[argmax_label(pr, part_, true)], d, cfg_.grid.J);
}

Decision KeyboardEngine::decide_counts(const std::vector<int>& n, const std::vector<int>& m, int d) const {
  return from_probs(prior_->interval_probs(n[d - 1], m[d - 1]), d);
}

nlohmann::json KeyboardEngine::explain(const std::vector<int>& n, const std::vector<int>& m, int d) const {
  return {{"key_probs", interval_json(part_, prior_->interval_probs(n[d - 1], m[d - 1]))}};
}

BoinEngine::BoinEngine(const DesignConfig& cfg) : CompleteEngine(cfg), bounds_(cfg.boin()) {}

Decision BoinEngine::decide_counts(const std::vector<int>& n, const std::vector<int>& m, int d) const {
  int N = n[d - 1] + m[d - 1];
  if (N == 0) return Decision::stay(d);
  return from_estimate(static_cast<double>(n[d - 1]) / N, d);
}

nlohmann::json BoinEngine::explain(const std::vector<int>& n, const std::vector<int>& m, int d) const {
  int N = n[d - 1] + m[d - 1];
  nlohmann::json j{{"lambda_l", bounds_.lambda_l}, {"lambda_r", bounds_.lambda_r}};
  if (N > 0) j["phat"] = static_cast<double>(n[d - 1]) / N;
  return j;
}

CrmEngine::CrmEngine(const DesignConfig& cfg) : CompleteEngine(cfg) {
  curve_.skeleton = cfg_.effective_skeleton();
  curve_.sigma = cfg_.alpha_sd;
  grid_ = std::make_shared<CrmGrid>(curve_, cfg_.crm_points);
}

std::vector<double> CrmEngine::estimate(const std::vector<int>& n, const std::vector<int>& m) const {
  std::vector<double> lw;
  grid_->log_post_counts(n, m, lw);
  return grid_->means(lw);
}

Decision CrmEngine::decide_counts(const std::vector<int>& n, const std::vector<int>& m, int d) const {
  return crm_decide(estimate(n, m), cfg_.grid.target, d);
}

nlohmann::json CrmEngine::explain(const std::vector<int>& n, const std::vector<int>& m, int) const {
  return {{"phat", estimate(n, m)}, {"skeleton", curve_.skeleton}};
}

SpmEngine::SpmEngine(const DesignConfig& cfg) : CompleteEngine(cfg) {
  auto model = SpmModel::from_skeleton(cfg_.effective_skeleton(), cfg_.grid, cfg_.spm_c, cfg_.spm_kappa);
  post_ = std::make_shared<SpmPosterior>(model, cfg_.grid);
}

Decision SpmEngine::decide_counts(const std::vector<int>& n, const std::vector<int>& m, int d) const {
  return spm_decide(post_->gamma_probs(n, m), d);
}

nlohmann::json SpmEngine::explain(const std::vector<int>& n, const std::vector<int>& m, int) const {
  return {{"gamma_probs", post_->gamma_probs(n, m)}};
}

I3Engine::I3Engine(const DesignConfig& cfg) : CompleteEngine(cfg) {}

Decision I3Engine::decide_counts(const std::vector<int>& n, const std::vector<int>& m, int d) const {
  int N = n[d - 1] + m[d - 1];
  if (N == 0) return Decision::stay(d);
  return i3_decide(n[d - 1], N, cfg_.grid, d);
}

nlohmann::json I3Engine::explain(const std::vector<int>& n, const std::vector<int>& m, int d) const {
  int N = n[d - 1] + m[d - 1];
  nlohmann::json j = nlohmann::json::object();
  if (N > 0) j["rate"] = static_cast<double>(n[d - 1]) / N;
  return j;
}

}  // namespace detail

std::shared_ptr<CompleteEngine> make_complete_engine(Family f, const DesignConfig& cfg) {
  DesignConfig c = cfg;
  c.engine = engine_name(f, Mode::Complete);
  switch (f) {
    case Family::Crm: return std::make_shared<detail::CrmEngine>(c);
    case Family::Boin: return std::make_shared<detail::BoinEngine>(c);
    case Family::Mtpi2: return std::make_shared<detail::Mtpi2Engine>(c);
    case Family::Keyboard: return std::make_shared<detail::KeyboardEngine>(c);
    case Family::Spm: return std::make_shared<detail::SpmEngine>(c);
    case Family::I3: return std::make_shared<detail::I3Engine>(c);
  }
  throw InputError("unknown family");
}

std::shared_ptr<DesignEngine> make_engine(const DesignConfig& cfg) {
  cfg.validate();
  auto e = parse_engine_name(cfg.engine);
  switch (e.mode) {
    case Mode::Complete: return make_complete_engine(e.family, cfg);
    case Mode::Tite: return detail::make_tite_engine(e.family, cfg);
    case Mode::Pod: return detail::make_pod_engine(e.family, cfg);
  }
  throw InputError("unknown mode");
}

}  // namespace dosefind
