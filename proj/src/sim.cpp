#include "dosefind/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "dosefind/numeric.hpp"

namespace dosefind {

void Scenario::validate() const {
  if (p.empty()) throw InputError("scenario needs at least one dose");
  if (!(target > 0.0 && target < 1.0)) throw InputError("scenario target must lie in (0, 1)");
  for (double v : p)
    if (!(v > 0.0 && v < 1.0)) throw InputError("scenario probabilities must lie in (0, 1)");
  for (std::size_t z = 1; z < p.size(); ++z)
    if (p[z] < p[z - 1]) throw InputError("scenario probabilities must be non-decreasing");
}

void to_json(nlohmann::json& j, const Scenario& s) {
  j = nlohmann::json{{"name", s.name}, {"target", s.target}, {"doses", s.p}};
}

void from_json(const nlohmann::json& j, Scenario& s) {
  if (!j.is_object() || !j.contains("doses") || !j.contains("target"))
    throw InputError("scenario needs `doses` and `target`");
  s.name = j.value("name", std::string{});
  s.target = j.at("target").get<double>();
  s.p = j.at("doses").get<std::vector<double>>();
  s.validate();
}

const std::vector<Scenario>& reference_scenarios() {
  static const std::vector<Scenario> all = [] {
    const std::vector<std::vector<double>> rows = {
        {.28, .36, .44, .52, .60, .68, .76}, {.05, .20, .46, .50, .60, .70, .80}, {.02, .05, .20, .28, .34, .40, .44},
        {.01, .05, .10, .20, .32, .50, .70}, {.01, .04, .07, .10, .50, .70, .90}, {.01, .05, .10, .14, .20, .26, .34},
        {.01, .02, .03, .05, .20, .40, .50}, {.01, .04, .07, .10, .15, .20, .25}, {.01, .02, .03, .04, .05, .20, .45},
        {.40, .45, .50, .55, .60, .65, .70}, {.30, .40, .50, .60, .70, .80, .90}, {.14, .30, .39, .48, .56, .64, .70},
        {.07, .23, .41, .49, .62, .68, .73}, {.05, .15, .30, .40, .50, .60, .70}, {.05, .12, .20, .30, .38, .49, .56},
        {.01, .04, .08, .15, .30, .36, .43}, {.02, .04, .08, .10, .20, .30, .40}, {.01, .03, .05, .07, .09, .30, .50}};
    std::vector<Scenario> v;
    for (std::size_t i = 0; i < rows.size(); ++i) v.push_back({"S" + std::to_string(i + 1), i < 9 ? 0.2 : 0.3, rows[i]});
    return v;
  }();
  return all;
}

void Setting::validate() const {
  if (!(delta > 0.0)) throw InputError("accrual rate must be positive");
  if (!(window > 0.0)) throw InputError("window must be positive");
  if (!(wstar > 0.0 && wstar < window)) throw InputError("W* must lie in (0, W)");
  if (!(q > 0.0 && q < 1.0)) throw InputError("late-onset share must lie in (0, 1)");
}

Setting reference_setting(int k) {
  switch (k) {
    case 1: return {0.1, 28.0, 14.0, 0.5};
    case 2: return {0.1, 28.0, 21.0, 0.8};
    case 3: return {0.2, 28.0, 14.0, 0.5};
  }
  throw InputError("setting must be 1, 2 or 3");
}

double Weibull::cdf(double t) const { return t <= 0.0 ? 0.0 : -std::expm1(-std::pow(t / scale, shape)); }

double Weibull::quantile(double u) const { return scale * std::pow(-std::log1p(-u), 1.0 / shape); }

Weibull calibrate_weibull(double p, double window, double wstar, double q) {
  if (!(p > 0.0 && p < 1.0)) throw UnsupportedError("Weibull calibration needs 0 < p < 1");
  if (!(window > 0.0 && wstar > 0.0 && wstar < window)) throw InputError("W* must lie in (0, W)");
  if (!(q > 0.0 && q < 1.0)) throw InputError("late-onset share must lie in (0, 1)");
  const double a = -std::log1p(-p), b = -std::log1p(-(1.0 - q) * p);
  Weibull w;
  w.shape = std::log(a / b) / std::log(window / wstar);
  w.scale = window / std::pow(a, 1.0 / w.shape);
  return w;
}

std::vector<int> true_mtd_set(const Scenario& sc) {
  std::vector<int> out;
  for (std::size_t z = 0; z < sc.p.size(); ++z)
    if (sc.p[z] >= sc.target - 0.05 - 1e-12 && sc.p[z] <= sc.target + 0.05 + 1e-12) out.push_back(static_cast<int>(z) + 1);
  if (!out.empty()) return out;
  for (std::size_t z = sc.p.size(); z-- > 0;)
    if (sc.p[z] < sc.target) return {static_cast<int>(z) + 1};
  return out;
}

int default_cohort(const std::string& engine) {
  return parse_engine_name(engine).family == Family::Crm ? 1 : 3;
}

void to_json(nlohmann::json& j, const TrialResult& r) {
  j = nlohmann::json{{"selection", r.selection},
                     {"terminated", r.terminated},
                     {"duration", r.duration},
                     {"turned_away", r.turned_away},
                     {"audit", r.audit},
                     {"coherence_violations", r.coherence_violations},
                     {"interval_coherence_violations", r.interval_violations},
                     {"patients", r.patients}};
  auto d = nlohmann::json::array();
  for (const auto& e : r.decisions)
    d.push_back({{"time", e.time}, {"current", e.current}, {"level", e.level}, {"enrolled", e.enrolled}});
  j["decisions"] = d;
}

TrialResult run_trial(const DesignEngine& engine, const Scenario& sc, const Setting& st, const RuleConfig& rules,
                      const SimOptions& opt, std::uint64_t seed) {
  const auto& g = engine.grid();
  const int J = g.J;
  sc.validate();
  st.validate();
  rules.validate();
  if (static_cast<int>(sc.p.size()) != J) throw InputError("scenario has a different number of doses than the design");
  if (opt.n_max < 1) throw InputError("maximum sample size must be positive");
  const double W = st.window;
  const int cohort = opt.cohort > 0 ? opt.cohort : default_cohort(engine.config().engine);
  std::vector<Weibull> tt;
  for (double p : sc.p) tt.push_back(calibrate_weibull(p, W, st.wstar, st.q));

  Rng arrivals = make_rng(seed, 1), tox = make_rng(seed, 2);
  std::exponential_distribution<double> gap(st.delta);
  auto counterpart = engine.counterpart();

  TrialResult res;
  auto& pts = res.patients;
  double tau = 0.0, last = 0.0, term_time = 0.0;
  int d = 1, cohort_dose = 1, left = 0;
  std::uint64_t calls = 0;

  // Safety Rule 2 between arrivals: termination once dose 1 is too toxic with nothing pending there.
  auto lowest_terminates = [&](double from, double to, double& when) {
    std::vector<double> times;
    for (const auto& p : pts) {
      if (p.dose != 1) continue;
      double r = p.enroll + std::min(p.dlt_time.value_or(W), W);
      if (r > from && r <= to) times.push_back(r);
    }
    std::sort(times.begin(), times.end());
    for (double t : times) {
      int n = 0, m = 0, r = 0;
      for (const auto& p : pts) {
        if (p.dose != 1) continue;
        double v = t - p.enroll;
        if (p.dlt_time && *p.dlt_time <= std::min(v, W)) ++n;
        else if (v >= W) ++m;
        else ++r;
      }
      if (r == 0 && n + m >= rules.min_assessed && tox_exceed_prob(n, m, g.target) > rules.effective_nu()) {
        when = t;
        return true;
      }
    }
    return false;
  };

  while (static_cast<int>(pts.size()) < opt.n_max) {
    if (!pts.empty() && lowest_terminates(last, tau, term_time)) {
      res.terminated = true;
      break;
    }
    last = tau;
    Snapshot s = snapshot(pts, tau, W);
    bool enroll = false;
    if (left > 0) {
      DoseStatus stt = safety_check(tally(s, J), g.target, rules.effective_nu(), rules.min_assessed);
      if (stt.terminated) {
        res.terminated = true;
        term_time = tau;
        break;
      }
      if (!stt.suspended && cohort_dose <= stt.highest_open) enroll = true;
      else left = 0;
    }
    if (!enroll) {
      Recommendation rec = recommend(engine, s, d, rules, mix_seed(seed, 1000 + calls++));
      if (rec.evaluated) {
        EngineEval ev;
        ev.time = tau;
        ev.current = d;
        ev.level = rec.engine_decision.level;
        ev.observed_dlts.assign(J, 0);
        for (const auto& p : s.patients)
          if (p.dlt) ++ev.observed_dlts[p.dose - 1];
        res.evals.push_back(std::move(ev));
      }
      if (rec.terminated) {
        res.terminated = true;
        term_time = tau;
        break;
      }
      if (rec.suspended) {
        ++res.turned_away;
      } else {
        if (!pts.empty()) res.decisions.push_back({tau, d, rec.decision.level, static_cast<int>(pts.size())});
        cohort_dose = rec.decision.level;
        d = cohort_dose;
        left = cohort;
        enroll = true;
      }
    }
    if (enroll) {
      PatientRecord p;
      p.id = static_cast<int>(pts.size()) + 1;
      p.dose = cohort_dose;
      p.enroll = tau;
      p.dlt_time = tt[cohort_dose - 1].quantile(draw_uniform(tox));
      pts.push_back(p);
      --left;
    }
    tau += gap(arrivals) + (opt.forced_gap ? W : 0.0);
  }

  if (res.terminated) {
    res.duration = term_time;
  } else {
    for (const auto& p : pts) res.duration = std::max(res.duration, p.enroll + std::min(p.dlt_time.value_or(W), W));
  }
  std::vector<int> n(J, 0), m(J, 0);
  for (const auto& p : pts) {
    if (p.dlt_time && *p.dlt_time <= W) ++n[p.dose - 1];
    else ++m[p.dose - 1];
  }
  const auto* base = dynamic_cast<const CompleteEngine*>(counterpart.get());
  res.selection = select_mtd(*base, n, m, rules.effective_nu(), res.terminated);
  res.audit = incompatibility_audit(*counterpart, res.decisions, pts, W);
  res.coherence_violations = coherence_violations(res.evals);
  res.interval_violations = interval_coherence_violations(res.evals);
  if (!opt.keep_trace) res.evals.clear();
  return res;
}

MetricsAccumulator::MetricsAccumulator(const Scenario& sc, double window)
    : sc_(sc), window_(window), mtd_(true_mtd_set(sc)), sel_(sc.p.size() + 1, 0.0), alloc_(sc.p.size(), 0.0) {}

void MetricsAccumulator::add(const TrialResult& r) {
  ++n_;
  const int top = mtd_.empty() ? 0 : mtd_.back();
  auto in_mtd = [&](int z) { return std::find(mtd_.begin(), mtd_.end(), z) != mtd_.end(); };
  const auto& sel = r.selection.dose;
  pcs_.add(mtd_.empty() ? (sel ? 0.0 : 1.0) : (sel && in_mtd(*sel) ? 1.0 : 0.0));
  pos_.add(sel && *sel > top ? 1.0 : 0.0);
  sel_[sel ? *sel : 0] += 1.0;
  double at = 0, above = 0, tox = 0;
  for (const auto& p : r.patients) {
    if (in_mtd(p.dose)) at += 1;
    if (p.dose > top) above += 1;
    if (p.dlt_time && *p.dlt_time <= window_) tox += 1;
    alloc_[p.dose - 1] += 1;
  }
  const double N = static_cast<double>(r.patients.size());
  patients_ += N;
  pca_.add(N > 0 ? at / N : 0.0);
  poa_.add(N > 0 ? above / N : 0.0);
  pot_.add(N > 0 ? tox / N : 0.0);
  dur_.add(r.duration);
  size_.add(N);
  ds_.add(r.audit.ds, r.audit.decisions);
  de_.add(r.audit.de, r.audit.decisions);
  se_.add(r.audit.se, r.audit.decisions);
  audit_ += r.audit;
  coh_ += r.coherence_violations;
  icoh_ += r.interval_violations;
  term_ += r.terminated ? 1 : 0;
}


void MetricsAccumulator::merge(const MetricsAccumulator& o) {
  auto mm = [](Moments& a, const Moments& b) {
    a.s += b.s;
    a.s2 += b.s2;
  };
  auto mr = [](Ratio& a, const Ratio& b) {
    a.x += b.x;
    a.d += b.d;
    a.xx += b.xx;
    a.xd += b.xd;
    a.dd += b.dd;
  };
  n_ += o.n_;
  mm(pcs_, o.pcs_);
  mm(pca_, o.pca_);
  mm(pos_, o.pos_);
  mm(poa_, o.poa_);
  mm(pot_, o.pot_);
  mm(dur_, o.dur_);
  mm(size_, o.size_);
  mr(ds_, o.ds_);
  mr(de_, o.de_);
  mr(se_, o.se_);
  audit_ += o.audit_;
  coh_ += o.coh_;
  icoh_ += o.icoh_;
  term_ += o.term_;
  for (std::size_t i = 0; i < sel_.size(); ++i) sel_[i] += o.sel_[i];
  for (std::size_t i = 0; i < alloc_.size(); ++i) alloc_[i] += o.alloc_[i];
  patients_ += o.patients_;
}

Metrics MetricsAccumulator::finish() const {
  Metrics out;
  out.scenario = sc_.name;
  out.trials = n_;
  if (n_ == 0) return out;
  const double n = static_cast<double>(n_);
  auto mean_se = [&](const Moments& m, double scale, double& mean, double& se) {
    double mu = m.s / n;
    double var = n > 1 ? std::max(0.0, (m.s2 - n * mu * mu) / (n - 1)) : 0.0;
    mean = scale * mu;
    se = scale * std::sqrt(var / n);
  };
  auto ratio = [&](const Ratio& r, double& est, double& se) {
    if (r.d <= 0) {
      est = se = 0;
      return;
    }
    double R = r.x / r.d;
    double dbar = r.d / n;
    double var = std::max(0.0, r.xx - 2 * R * r.xd + R * R * r.dd) / std::max(1.0, n - 1);
    est = 1000.0 * R;
    se = 1000.0 * std::sqrt(var / n) / dbar;
  };
  mean_se(pcs_, 100, out.pcs, out.pcs_se);
  mean_se(pca_, 100, out.pca, out.pca_se);
  mean_se(pos_, 100, out.pos, out.pos_se);
  mean_se(poa_, 100, out.poa, out.poa_se);
  mean_se(pot_, 100, out.pot, out.pot_se);
  mean_se(dur_, 1, out.dur, out.dur_se);
  ratio(ds_, out.ds, out.ds_se);
  ratio(de_, out.de, out.de_se);
  ratio(se_, out.se, out.se_se);
  out.audit = audit_;
  out.coherence_violations = coh_;
  out.interval_violations = icoh_;
  out.terminated = term_;
  out.mean_n = size_.s / n;
  for (double v : sel_) out.selection.push_back(100.0 * v / n);
  for (double v : alloc_) out.allocation.push_back(patients_ > 0 ? 100.0 * v / patients_ : 0.0);
  return out;
}

void to_json(nlohmann::json& j, const Metrics& m) {
  j = nlohmann::json{{"scenario", m.scenario},
                     {"trials", m.trials},
                     {"PCS", m.pcs},
                     {"PCA", m.pca},
                     {"POS", m.pos},
                     {"POA", m.poa},
                     {"POT", m.pot},
                     {"DS", m.ds},
                     {"DE", m.de},
                     {"SE", m.se},
                     {"Dur", m.dur},
                     {"se",
                      {{"PCS", m.pcs_se},
                       {"PCA", m.pca_se},
                       {"POS", m.pos_se},
                       {"POA", m.poa_se},
                       {"POT", m.pot_se},
                       {"DS", m.ds_se},
                       {"DE", m.de_se},
                       {"SE", m.se_se},
                       {"Dur", m.dur_se}}},
                     {"audit", m.audit},
                     {"coherence_violations", m.coherence_violations},
                     {"interval_coherence_violations", m.interval_violations},
                     {"terminated", m.terminated},
                     {"mean_n", m.mean_n},
                     {"selection", m.selection},
                     {"allocation", m.allocation}};
}

void to_json(nlohmann::json& j, const BatchResult& b) {
  j = nlohmann::json{{"design", b.design}, {"scenarios", b.per_scenario}, {"average", b.average}};
}

DesignConfig scenario_design(const DesignConfig& base, const Scenario& sc) {
  DesignConfig cfg = base;
  if (!base.skeleton.empty() && base.skeleton.size() != sc.p.size())
    throw InputError("skeleton length differs from the scenario dose count");
  if (base.skeleton.empty() || base.grid.target != sc.target) cfg.skeleton.clear();
  cfg.grid.target = sc.target;
  cfg.grid.J = static_cast<int>(sc.p.size());
  return cfg;
}

namespace {

Metrics average_metrics(const std::vector<Metrics>& all) {
  Metrics a;
  a.scenario = "average";
  if (all.empty()) return a;
  const double S = static_cast<double>(all.size());
  struct F {
    double Metrics::*v;
    double Metrics::*se;
  };
  const F fields[] = {{&Metrics::pcs, &Metrics::pcs_se}, {&Metrics::pca, &Metrics::pca_se},
                      {&Metrics::pos, &Metrics::pos_se}, {&Metrics::poa, &Metrics::poa_se},
                      {&Metrics::pot, &Metrics::pot_se}, {&Metrics::ds, &Metrics::ds_se},
                      {&Metrics::de, &Metrics::de_se},   {&Metrics::se, &Metrics::se_se},
                      {&Metrics::dur, &Metrics::dur_se}};
  for (const auto& f : fields) {
    double s = 0, s2 = 0;
    for (const auto& m : all) {
      s += m.*(f.v);
      s2 += m.*(f.se) * (m.*(f.se));
    }
    a.*(f.v) = s / S;
    a.*(f.se) = std::sqrt(s2) / S;
  }
  double mean_n = 0;
  for (const auto& m : all) {
    a.trials += m.trials;
    a.audit += m.audit;
    a.coherence_violations += m.coherence_violations;
    a.interval_violations += m.interval_violations;
    a.terminated += m.terminated;
    mean_n += m.mean_n;
  }
  a.mean_n = mean_n / S;
  return a;
}

}  // namespace

BatchResult run_batch(const DesignConfig& design, const std::vector<Scenario>& scenarios, const Setting& st,
                      const RuleConfig& rules, const SimOptions& opt, int n_sims, std::uint64_t seed, int workers) {
  if (n_sims < 1) throw InputError("number of simulated trials must be positive");
  if (scenarios.empty()) throw InputError("no scenarios given");
  workers = std::max(1, workers);
  BatchResult out;
  out.design = design.engine;
  for (const auto& sc : scenarios) {
    sc.validate();
    DesignConfig cfg = scenario_design(design, sc);
    cfg.grid.window = st.window;
    auto engine = make_engine(cfg);
    std::vector<MetricsAccumulator> acc(workers, MetricsAccumulator(sc, st.window));
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](int w) {
      try {
        for (int i = w; i < n_sims; i += workers) acc[w].add(run_trial(*engine, sc, st, rules, opt, seed + i));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
      for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (int w = 1; w < workers; ++w) acc[0].merge(acc[w]);
    out.per_scenario.push_back(acc[0].finish());
  }
  out.average = average_metrics(out.per_scenario);
  return out;
}

std::string metrics_csv(const BatchResult& b) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "design,scenario,PCS,PCA,POS,POA,POT,DS,DE,SE,Dur,PCS_se,PCA_se,POS_se,POA_se,POT_se,DS_se,DE_se,SE_se,Dur_se\n";
  auto row = [&](const Metrics& m) {
    os << b.design << ',' << m.scenario << ',' << m.pcs << ',' << m.pca << ',' << m.pos << ',' << m.poa << ','
       << m.pot << ',' << m.ds << ',' << m.de << ',' << m.se << ',' << m.dur << ',' << m.pcs_se << ',' << m.pca_se
       << ',' << m.pos_se << ',' << m.poa_se << ',' << m.pot_se << ',' << m.ds_se << ',' << m.de_se << ','
       << m.se_se << ',' << m.dur_se << '\n';
  };
  for (const auto& m : b.per_scenario) row(m);
  row(b.average);
  return os.str();
}

}  // namespace dosefind
