#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dosefind/engine.hpp"
#include "dosefind/rules.hpp"
#include "dosefind/sim.hpp"

namespace dosefind {

// Thrown for anything wrong with a configuration document or flag.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  DesignConfig design;
  RuleConfig rules;
  bool rules_given = false;  // false means the design defaults
  Setting setting = reference_setting(1);
  SimOptions sim;
  std::vector<Scenario> scenarios;  // empty means the 18 reference scenarios
  int n_sims = 1000;
  std::uint64_t seed = 1;
  int workers = 1;

  // Rules after defaults for the design are applied.
  RuleConfig effective_rules() const;
  void validate() const;
};

// Keys: design, rules, setting (1-3 or an object), n_max, cohort, forced_gap,
// n_sims, seed, workers, scenarios (list of objects or indices 1-18).
RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json run_config_json(const RunConfig& c);

nlohmann::json read_json_file(const std::string& path);
std::vector<Scenario> read_scenario_file(const std::string& path);
// "1,3,5-7" style selection of reference scenarios.
std::vector<Scenario> select_reference_scenarios(const std::string& spec);
Setting parse_setting(const nlohmann::json& j);

}  // namespace dosefind
