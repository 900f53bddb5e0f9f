#include "dosefind/rules.hpp"

#include <algorithm>

#include "dosefind/numeric.hpp"

namespace dosefind {

std::string to_string(SuspensionKind k) {
  switch (k) {
    case SuspensionKind::None: return "none";
    case SuspensionKind::Complete: return "complete";
    case SuspensionKind::Fixed: return "fixed";
    case SuspensionKind::Probability: return "probability";
  }
  return "?";
}

SuspensionKind parse_suspension_kind(const std::string& s) {
  if (s == "none") return SuspensionKind::None;
  if (s == "complete") return SuspensionKind::Complete;
  if (s == "fixed") return SuspensionKind::Fixed;
  if (s == "probability") return SuspensionKind::Probability;
  throw InputError("unknown suspension rule: " + s);
}

void RuleConfig::validate() const {
  if (!(nu > 0.5 && nu < 1.0)) throw InputError("nu must lie in (0.5, 1)");
  if (min_assessed < 0) throw InputError("min_assessed must be non-negative");
  if (fixed_c < 0.0 && !(fixed_fraction >= 0.0)) throw InputError("fixed_fraction must be non-negative");
  if (prob_version < 1 || prob_version > 3) throw InputError("probability rule version must be 1, 2 or 3");
  for (double t : {q, q_escalate, q_stay})
    if (!(t >= 0.0 && t <= 1.0)) throw InputError("suspension thresholds must lie in [0, 1]");
}

RuleConfig RuleConfig::defaults_for(const std::string& engine) {
  RuleConfig r;
  auto e = parse_engine_name(engine);
  switch (e.mode) {
    case Mode::Complete: r.suspension = SuspensionKind::Complete; break;
    case Mode::Tite: r.suspension = SuspensionKind::Fixed; break;
    case Mode::Pod: r.suspension = SuspensionKind::Probability; break;
  }
  return r;
}

void to_json(nlohmann::json& j, const RuleConfig& r) {
  j = nlohmann::json{{"nu", r.nu},
                     {"min_assessed", r.min_assessed},
                     {"rule3", r.rule3},
                     {"exclusion", r.exclusion},
                     {"suspension", to_string(r.suspension)},
                     {"fixed_c", r.fixed_c},
                     {"fixed_fraction", r.fixed_fraction},
                     {"prob_version", r.prob_version},
                     {"q", r.q},
                     {"q_escalate", r.q_escalate},
                     {"q_stay", r.q_stay}};
}

void from_json(const nlohmann::json& j, RuleConfig& r) {
  if (!j.is_object()) throw InputError("rules must be an object");
  r.nu = j.value("nu", r.nu);
  r.min_assessed = j.value("min_assessed", r.min_assessed);
  r.rule3 = j.value("rule3", r.rule3);
  r.exclusion = j.value("exclusion", r.exclusion);
  if (j.contains("suspension")) r.suspension = parse_suspension_kind(j["suspension"].get<std::string>());
  r.fixed_c = j.value("fixed_c", r.fixed_c);
  r.fixed_fraction = j.value("fixed_fraction", r.fixed_fraction);
  r.prob_version = j.value("prob_version", r.prob_version);
  r.q = j.value("q", r.q);
  r.q_escalate = j.value("q_escalate", r.q_escalate);
  r.q_stay = j.value("q_stay", r.q_stay);
}

double tox_exceed_prob(int n, int m, double target) { return 1.0 - ibeta(n + 1.0, m + 1.0, target); }

DoseStatus safety_check(const DoseTally& t, double target, double nu, int min_assessed) {
  const int J = static_cast<int>(t.size());
  DoseStatus st;
  st.excluded.assign(J, false);
  st.highest_open = J;
  for (int z = 0; z < J; ++z) {
    if (t[z].n + t[z].m < min_assessed) continue;
    if (tox_exceed_prob(t[z].n, t[z].m, target) > nu) {
      st.highest_open = z;
      for (int k = z; k < J; ++k) st.excluded[k] = true;
      break;
    }
  }
  if (st.highest_open == 0) {
    st.lowest_toxic = true;
    if (t[0].r > 0) st.suspended = true;
    else st.terminated = true;
  }
  return st;
}

DoseStatus reopen_on_resolution(const DoseStatus& prev, const DoseTally& t, double target, double nu,
                                int min_assessed) {
  if (prev.terminated) return prev;
  return safety_check(t, target, nu, min_assessed);
}

Decision rule3_gate(const Decision& dec, int m_d, int d) {
  if (dec.enrolls() && dec.level > d && m_d < 1) return Decision::stay(d);
  return dec;
}

bool fixed_suspension(int r_d, int N_d, const RuleConfig& cfg) {
  double c = cfg.fixed_c >= 0.0 ? cfg.fixed_c : cfg.fixed_fraction * N_d;
  return r_d > c;
}

namespace {

// q = 0 means any outcome configuration of positive probability counts.
bool exceeds(const PodDistribution& pod, int level, double q) {
  if (q <= 0.0) return pod.possible_below(level);
  return pod.prob_below(level) > q;
}

Decision cap_at(const Decision& dec, int highest_open, int d) {
  if (!dec.enrolls() || dec.level <= highest_open) return dec;
  int lvl = highest_open;
  if (lvl == d) return Decision::stay(d);
  if (lvl == d - 1) return Decision::deescalate(d);
  return Decision::assign(lvl);
}

}  // namespace

bool prob_suspension(const PodDistribution& pod, const RuleConfig& cfg, int d) {
  const int a = pod.chosen;
  switch (cfg.prob_version) {
    case 1: return exceeds(pod, a, cfg.q);
    case 2: return pod.possible_other(a);
    case 3:
      if (a > d) return exceeds(pod, a, cfg.q_escalate);
      if (a == d) return exceeds(pod, a, cfg.q_stay);
      return false;
  }
  throw InputError("probability rule version must be 1, 2 or 3");
}

void to_json(nlohmann::json& j, const Recommendation& r) {
  j = nlohmann::json{{"decision", r.decision},
                     {"suspended", r.suspended},
                     {"terminated", r.terminated},
                     {"rule_firings", r.firings},
                     {"highest_open", r.status.highest_open},
                     {"rationale", r.rationale}};
  if (r.evaluated) j["engine_decision"] = r.engine_decision;
  if (r.pod) j["pod"] = *r.pod;
}

Recommendation recommend(const DesignEngine& engine, const Snapshot& s, int d, const RuleConfig& rules,
                         std::uint64_t seed) {
  const auto& g = engine.grid();
  Recommendation rec;
  rec.rationale = nlohmann::json::object();
  if (s.patients.empty()) {
    rec.decision = Decision::assign(1);
    rec.status.excluded.assign(g.J, false);
    rec.status.highest_open = g.J;
    rec.firings.push_back("start at the lowest dose");
    return rec;
  }
  if (d < 1 || d > g.J) throw InputError("current dose out of range");
  DoseTally t = tally(s, g.J);
  rec.status = safety_check(t, g.target, rules.effective_nu(), rules.min_assessed);
  if (rec.status.terminated) {
    rec.decision = Decision::terminate();
    rec.terminated = true;
    rec.firings.push_back("safety rule 2: lowest dose too toxic");
    return rec;
  }
  if (rec.status.suspended) {
    rec.decision = Decision::suspend(d);
    rec.suspended = true;
    rec.firings.push_back("safety rule 2: lowest dose too toxic with outcomes pending");
    return rec;
  }
  for (int z = 0; z < g.J; ++z)
    if (rec.status.excluded[z]) {
      rec.firings.push_back("safety rule 1: doses " + std::to_string(z + 1) + " and above excluded");
      break;
    }

  const auto& cd = t[d - 1];
  if (rules.suspension == SuspensionKind::Complete) {
    int pending = 0;
    for (const auto& c : t) pending += c.r;
    if (pending > 0) {
      rec.decision = Decision::suspend(d);
      rec.suspended = true;
      rec.firings.push_back("waiting for pending outcomes");
      return rec;
    }
  } else if (rules.suspension == SuspensionKind::Fixed && fixed_suspension(cd.r, cd.N, rules)) {
    rec.decision = Decision::suspend(d);
    rec.suspended = true;
    rec.firings.push_back("fixed suspension rule: too many pending outcomes at the current dose");
    return rec;
  }

  EngineResult er = engine.decide(s, d, seed);
  rec.evaluated = true;
  rec.engine_decision = er.decision;
  rec.rationale = std::move(er.rationale);
  rec.pod = std::move(er.pod);
  Decision dec = er.decision;
  if (rules.rule3) {
    Decision gated = rule3_gate(dec, cd.m, d);
    if (!(gated == dec)) rec.firings.push_back("safety rule 3: no escalation before a completed non-DLT");
    dec = gated;
  }
  Decision capped = cap_at(dec, rec.status.highest_open, d);
  if (!(capped == dec)) rec.firings.push_back("capped at the highest open dose");
  dec = capped;

  if (rules.suspension == SuspensionKind::Probability) {
    if (!rec.pod) throw InputError("probability suspension needs a POD design");
    if (prob_suspension(*rec.pod, rules, d)) {
      rec.decision = Decision::suspend(d);
      rec.suspended = true;
      rec.firings.push_back("probability suspension rule");
      return rec;
    }
  }
  rec.decision = dec;
  return rec;
}

std::string to_string(Incompatibility k) {
  switch (k) {
    case Incompatibility::None: return "none";
    case Incompatibility::DS: return "DS";
    case Incompatibility::DE: return "DE";
    case Incompatibility::SE: return "SE";
    case Incompatibility::SD: return "SD";
    case Incompatibility::ED: return "ED";
    case Incompatibility::ES: return "ES";
  }
  return "?";
}

Incompatibility classify_incompatibility(int exec, int complete, int d) {
  int a = direction(exec, d), c = direction(complete, d);
  if (a == c) return Incompatibility::None;
  if (c < 0) return a == 0 ? Incompatibility::DS : Incompatibility::DE;
  if (c == 0) return a > 0 ? Incompatibility::SE : Incompatibility::SD;
  return a < 0 ? Incompatibility::ED : Incompatibility::ES;
}

AuditCounts& AuditCounts::operator+=(const AuditCounts& o) {
  decisions += o.decisions;
  ds += o.ds;
  de += o.de;
  se += o.se;
  sd += o.sd;
  ed += o.ed;
  es += o.es;
  return *this;
}

void to_json(nlohmann::json& j, const AuditCounts& a) {
  j = nlohmann::json{{"decisions", a.decisions}, {"DS", a.ds}, {"DE", a.de}, {"SE", a.se},
                     {"SD", a.sd},               {"ED", a.ed}, {"ES", a.es}};
}

AuditCounts incompatibility_audit(const DesignEngine& counterpart, const std::vector<DecisionEvent>& events,
                                  const std::vector<PatientRecord>& patients, double window) {
  const auto* base = dynamic_cast<const CompleteEngine*>(&counterpart);
  if (!base) throw InputError("audit counterpart must be a complete-data design");
  const int J = counterpart.grid().J;
  AuditCounts a;
  std::vector<int> n(J), m(J);
  for (const auto& e : events) {
    if (e.enrolled > static_cast<int>(patients.size())) throw InputError("audit event refers to unknown patients");
    std::fill(n.begin(), n.end(), 0);
    std::fill(m.begin(), m.end(), 0);
    for (int i = 0; i < e.enrolled; ++i) {
      const auto& p = patients[i];
      if (p.dlt_time && *p.dlt_time <= window) ++n[p.dose - 1];
      else ++m[p.dose - 1];
    }
    Decision c = base->decide_counts(n, m, e.current);
    ++a.decisions;
    switch (classify_incompatibility(e.level, c.level, e.current)) {
      case Incompatibility::DS: ++a.ds; break;
      case Incompatibility::DE: ++a.de; break;
      case Incompatibility::SE: ++a.se; break;
      case Incompatibility::SD: ++a.sd; break;
      case Incompatibility::ED: ++a.ed; break;
      case Incompatibility::ES: ++a.es; break;
      case Incompatibility::None: break;
    }
  }
  return a;
}

int coherence_violations(const std::vector<EngineEval>& evals) {
  int v = 0;
  for (std::size_t i = 1; i < evals.size(); ++i) {
    const auto& a = evals[i - 1];
    const auto& b = evals[i];
    if (a.observed_dlts == b.observed_dlts && b.level < a.level) ++v;
  }
  return v;
}

int interval_coherence_violations(const std::vector<EngineEval>& evals) {
  int v = 0;
  for (std::size_t i = 1; i < evals.size(); ++i) {
    const auto& a = evals[i - 1];
    const auto& b = evals[i];
    if (a.current != b.current) continue;
    const int d = a.current - 1;
    if (a.observed_dlts[d] == b.observed_dlts[d] && b.level < a.level) ++v;
  }
  return v;
}

}  // namespace dosefind
