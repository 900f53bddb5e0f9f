#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dosefind/engine.hpp"
#include "dosefind/trial_core.hpp"

namespace dosefind {

enum class SuspensionKind { None, Complete, Fixed, Probability };

std::string to_string(SuspensionKind k);
SuspensionKind parse_suspension_kind(const std::string& s);

struct RuleConfig {
  double nu = 0.95;
  int min_assessed = 3;
  bool rule3 = true;
  // Safety Rules 1 and 2 (dose exclusion and termination); off only for design studies
  bool exclusion = true;
  SuspensionKind suspension = SuspensionKind::Fixed;
  // Fixed rule: suspend when r_d > C; a negative C means C = fraction * N_d
  double fixed_c = -1.0;
  double fixed_fraction = 0.5;
  // Probability rule
  int prob_version = 1;
  double q = 0.0;           // version 1
  double q_escalate = 0.0;  // version 3, a* > d
  double q_stay = 0.0;      // version 3, a* = d

  void validate() const;
  // Exclusion threshold in force: 1 never excludes.
  double effective_nu() const { return exclusion ? nu : 1.0; }
  // Suspension defaults by design: complete designs wait for every outcome,
  // POD designs use the probability rule with q = 0, TITE designs r_d > N_d / 2.
  static RuleConfig defaults_for(const std::string& engine);
};

void to_json(nlohmann::json& j, const RuleConfig& r);
void from_json(const nlohmann::json& j, RuleConfig& r);

// Pr(p > target | n DLTs, m non-DLTs) under a Beta(1, 1) prior.
double tox_exceed_prob(int n, int m, double target);

struct DoseStatus {
  std::vector<bool> excluded;  // per dose
  int highest_open = 0;        // 0 when dose 1 is excluded
  bool lowest_toxic = false;   // dose 1 triggers the exclusion rule
  bool terminated = false;     // lowest dose toxic with nothing pending there
  bool suspended = false;      // lowest dose toxic with pending outcomes there
};

// Safety Rules 1 and 2 from assessed outcomes.
DoseStatus safety_check(const DoseTally& t, double target, double nu, int min_assessed = 3);
// Re-evaluates after outcome resolution; termination is permanent.
DoseStatus reopen_on_resolution(const DoseStatus& prev, const DoseTally& t, double target, double nu,
                                int min_assessed = 3);

// Safety Rule 3.
Decision rule3_gate(const Decision& dec, int m_d, int d);
bool fixed_suspension(int r_d, int N_d, const RuleConfig& cfg);
bool prob_suspension(const PodDistribution& pod, const RuleConfig& cfg, int d);

struct Recommendation {
  Decision decision;         // executed decision after all rules
  Decision engine_decision;  // raw engine output
  bool evaluated = false;    // engine was consulted
  bool suspended = false;
  bool terminated = false;
  std::vector<std::string> firings;
  DoseStatus status;
  std::optional<PodDistribution> pod;
  nlohmann::json rationale;
};

void to_json(nlohmann::json& j, const Recommendation& r);

// Full rule sequence at a decision instant with current dose d.
Recommendation recommend(const DesignEngine& engine, const Snapshot& s, int d, const RuleConfig& rules,
                         std::uint64_t seed);

enum class Incompatibility { None, DS, DE, SE, SD, ED, ES };

std::string to_string(Incompatibility k);
// exec and complete are resulting levels, d the current dose when deciding.
Incompatibility classify_incompatibility(int exec, int complete, int d);

struct DecisionEvent {
  double time = 0.0;
  int current = 1;   // current dose before the decision
  int level = 1;     // executed level
  int enrolled = 0;  // patients enrolled before the decision
};

struct AuditCounts {
  long decisions = 0;
  long ds = 0, de = 0, se = 0;
  long sd = 0, ed = 0, es = 0;

  AuditCounts& operator+=(const AuditCounts& o);
  long aggressive() const { return ds + de + se; }
};

void to_json(nlohmann::json& j, const AuditCounts& a);

// Replays each decision with the fully resolved outcomes of the patients
// enrolled before it through the complete-data counterpart.
AuditCounts incompatibility_audit(const DesignEngine& counterpart, const std::vector<DecisionEvent>& events,
                                  const std::vector<PatientRecord>& patients, double window);

struct EngineEval {
  double time = 0.0;
  int current = 1;
  int level = 1;                 // raw engine decision
  std::vector<int> observed_dlts;  // per dose, DLTs observed by this time
};

// De-escalations between consecutive evaluations with no new DLT anywhere.
int coherence_violations(const std::vector<EngineEval>& evals);
// Same, restricted to consecutive evaluations at one current dose and DLTs at that dose.
int interval_coherence_violations(const std::vector<EngineEval>& evals);

}  // namespace dosefind
