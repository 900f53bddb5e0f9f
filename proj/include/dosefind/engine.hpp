#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dosefind/designs.hpp"
#include "dosefind/tox_model.hpp"
#include "dosefind/trial_core.hpp"

namespace dosefind {

enum class Family { Crm, Boin, Mtpi2, Keyboard, Spm, I3 };
enum class Mode { Complete, Tite, Pod };

std::string to_string(Family f);
std::string to_string(Mode m);
// Interval-based families read only the current dose.
bool is_local(Family f);

struct EngineName {
  Family family = Family::Mtpi2;
  Mode mode = Mode::Complete;
};

EngineName parse_engine_name(const std::string& name);
std::string engine_name(Family f, Mode m);

struct DesignConfig {
  std::string engine = "mtpi2";
  DoseGrid grid;

  // CRM
  std::vector<double> skeleton;  // empty means calibrated from halfwidth and prior_mtd
  double halfwidth = 0.05;
  int prior_mtd = 0;             // 0 means the middle dose
  double alpha_sd = 1.34;
  int crm_points = 512;

  // BOIN; zero means the default ratio of the target
  double pl = 0.0;
  double pr = 0.0;

  // mTPI-2 prior model masses; empty means equal
  std::vector<double> model_prior;

  // SPM
  double spm_c = 2.0;
  std::vector<double> spm_kappa;

  std::optional<TimeModelSpec> tox;  // empty means the engine default
  int xi_draws = 128;
  int cache_n = 72;

  // POD
  bool pod_plugin = false;
  int pod_enum_cap = 4096;
  int pod_mc_draws = 10000;

  void validate() const;
  std::vector<double> effective_skeleton() const;
  BoinBoundaries boin() const;
  TimeModelSpec effective_tox() const;
};

void to_json(nlohmann::json& j, const DesignConfig& c);
void from_json(const nlohmann::json& j, DesignConfig& c);

struct PodEntry {
  int level = 1;
  double prob = 0.0;
  bool possible = false;  // reached by at least one outcome configuration of positive probability
  Decision decision;
};

struct PodDistribution {
  std::vector<PodEntry> entries;  // ordered by level
  int chosen = 1;                 // level of the mode; ties go to the lower level
  bool exact = true;              // false when estimated by Monte Carlo
  double mc_error = 0.0;

  double prob(int level) const;
  double prob_below(int level) const;
  bool possible_below(int level) const;
  bool possible_other(int level) const;
  const PodEntry* find(int level) const;
};

void to_json(nlohmann::json& j, const PodDistribution& p);

struct EngineResult {
  Decision decision;                // raw engine decision, no-skip restriction applied
  std::optional<PodDistribution> pod;
  nlohmann::json rationale;
};

class DesignEngine : public std::enable_shared_from_this<DesignEngine> {
 public:
  explicit DesignEngine(DesignConfig cfg);
  virtual ~DesignEngine() = default;

  const DesignConfig& config() const { return cfg_; }
  const DoseGrid& grid() const { return cfg_.grid; }
  std::string name() const { return engine_name(family(), mode()); }
  virtual Family family() const = 0;
  virtual Mode mode() const = 0;

  // d is the current dose (dose of the most recently enrolled patient).
  virtual EngineResult decide(const Snapshot& s, int d, std::uint64_t seed) const = 0;
  // The complete-data engine this design is audited against.
  virtual std::shared_ptr<const DesignEngine> counterpart() const;

 protected:
  DesignConfig cfg_;
};

// Complete-data engines decide from assessed outcomes only.
class CompleteEngine : public DesignEngine {
 public:
  using DesignEngine::DesignEngine;
  Mode mode() const override { return Mode::Complete; }
  EngineResult decide(const Snapshot& s, int d, std::uint64_t seed) const override;
  std::shared_ptr<const DesignEngine> counterpart() const override;

  virtual Decision decide_counts(const std::vector<int>& n, const std::vector<int>& m, int d) const = 0;
  virtual nlohmann::json explain(const std::vector<int>& n, const std::vector<int>& m, int d) const;
};

std::shared_ptr<CompleteEngine> make_complete_engine(Family f, const DesignConfig& cfg);
std::shared_ptr<DesignEngine> make_engine(const DesignConfig& cfg);

// Counts per dose from a snapshot: complete outcomes only.
void complete_counts(const Snapshot& s, int J, std::vector<int>& n, std::vector<int>& m);
nlohmann::json tally_json(const DoseTally& t);

}  // namespace dosefind
