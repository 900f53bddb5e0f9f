#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dosefind/engine.hpp"
#include "dosefind/mtd_select.hpp"
#include "dosefind/rules.hpp"

namespace dosefind {

struct Scenario {
  std::string name;
  double target = 0.3;
  std::vector<double> p;

  void validate() const;
};

void to_json(nlohmann::json& j, const Scenario& s);
void from_json(const nlohmann::json& j, Scenario& s);

// The 18 dose-toxicity scenarios of the simulation study.
const std::vector<Scenario>& reference_scenarios();

struct Setting {
  double delta = 0.1;   // accrual rate per day
  double window = 28.0;
  double wstar = 14.0;  // late-onset split point
  double q = 0.5;       // share of DLTs in (W*, W]

  void validate() const;
};

// Settings 1 to 3.
Setting reference_setting(int k);

struct Weibull {
  double shape = 1.0;
  double scale = 1.0;

  double cdf(double t) const;
  double quantile(double u) const;
};

// Shape and scale with F(W) = p and F(W*) = (1 - q) p.
Weibull calibrate_weibull(double p, double window, double wstar, double q);

// MTDs: doses within 0.05 of the target, else the highest dose below it.
std::vector<int> true_mtd_set(const Scenario& sc);

struct SimOptions {
  int n_max = 36;
  int cohort = 0;            // 0 means the design default
  bool forced_gap = false;   // inter-arrival times lengthened by W, so nothing is ever pending
  bool keep_trace = false;   // keep per-decision records in the result
};

int default_cohort(const std::string& engine);

struct TrialResult {
  std::vector<PatientRecord> patients;
  std::vector<DecisionEvent> decisions;
  std::vector<EngineEval> evals;
  MtdSelection selection;
  bool terminated = false;
  double duration = 0.0;
  int turned_away = 0;
  AuditCounts audit;
  int coherence_violations = 0;
  int interval_violations = 0;
};

void to_json(nlohmann::json& j, const TrialResult& r);

TrialResult run_trial(const DesignEngine& engine, const Scenario& sc, const Setting& st, const RuleConfig& rules,
                      const SimOptions& opt, std::uint64_t seed);

struct Metrics {
  std::string scenario;
  long trials = 0;
  double pcs = 0, pca = 0, pos = 0, poa = 0, pot = 0;  // percent
  double ds = 0, de = 0, se = 0;                       // per 1,000 decisions
  double dur = 0;                                      // days
  double pcs_se = 0, pca_se = 0, pos_se = 0, poa_se = 0, pot_se = 0;
  double ds_se = 0, de_se = 0, se_se = 0, dur_se = 0;
  AuditCounts audit;
  long coherence_violations = 0;
  long interval_violations = 0;
  long terminated = 0;
  double mean_n = 0;
  std::vector<double> selection;   // percent of trials selecting each dose
  std::vector<double> allocation;  // percent of patients per dose
};

void to_json(nlohmann::json& j, const Metrics& m);

// Streaming accumulator of trial results for one scenario.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(const Scenario& sc, double window = 28.0);
  void add(const TrialResult& r);
  void merge(const MetricsAccumulator& o);
  Metrics finish() const;

 private:
  struct Moments {
    double s = 0, s2 = 0;
    void add(double x) {
      s += x;
      s2 += x * x;
    }
  };
  struct Ratio {
    double x = 0, d = 0, xx = 0, xd = 0, dd = 0;
    void add(double a, double b) {
      x += a;
      d += b;
      xx += a * a;
      xd += a * b;
      dd += b * b;
    }
  };
  Scenario sc_;
  double window_ = 28.0;
  std::vector<int> mtd_;
  long n_ = 0;
  Moments pcs_, pca_, pos_, poa_, pot_, dur_, size_;
  Ratio ds_, de_, se_;
  AuditCounts audit_;
  long coh_ = 0, icoh_ = 0, term_ = 0;
  std::vector<double> sel_, alloc_;
  double patients_ = 0;
};

struct BatchResult {
  std::string design;
  std::vector<Metrics> per_scenario;
  Metrics average;
};

void to_json(nlohmann::json& j, const BatchResult& b);

// Design config for one scenario: the scenario target replaces the grid target.
DesignConfig scenario_design(const DesignConfig& base, const Scenario& sc);

// Trials run on `workers` threads; trial i of every scenario uses seed + i.
BatchResult run_batch(const DesignConfig& design, const std::vector<Scenario>& scenarios, const Setting& st,
                      const RuleConfig& rules, const SimOptions& opt, int n_sims, std::uint64_t seed, int workers = 1);

// Comma-separated table in the column order PCS, PCA, POS, POA, POT, DS, DE, SE, Dur with MC SEs.
std::string metrics_csv(const BatchResult& b);

}  // namespace dosefind
