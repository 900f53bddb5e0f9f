#include "dosefind/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dosefind {

RuleConfig RunConfig::effective_rules() const { return rules_given ? rules : RuleConfig::defaults_for(design.engine); }

void RunConfig::validate() const {
  try {
    design.validate();
    effective_rules().validate();
    setting.validate();
    for (const auto& s : scenarios) {
      s.validate();
      if (static_cast<int>(s.p.size()) != design.grid.J && !design.skeleton.empty())
        throw InputError("scenario " + s.name + " does not match the skeleton length");
    }
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  } catch (const UnsupportedError& e) {
    throw ConfigError(e.what());
  }
  if (n_sims < 1) throw ConfigError("n_sims must be positive");
  if (workers < 1) throw ConfigError("workers must be positive");
  if (sim.n_max < 1) throw ConfigError("n_max must be positive");
  if (sim.cohort < 0) throw ConfigError("cohort must be non-negative");
}

Setting parse_setting(const nlohmann::json& j) {
  try {
    if (j.is_number_integer()) return reference_setting(j.get<int>());
    if (j.is_string()) {
      std::string s = j.get<std::string>();
      if (s.rfind("setting", 0) == 0) s = s.substr(7);
      return reference_setting(std::stoi(s));
    }
    if (j.is_object()) {
      Setting st;
      st.delta = j.value("delta", st.delta);
      st.window = j.value("window", st.window);
      st.wstar = j.value("wstar", st.wstar);
      st.q = j.value("q", st.q);
      st.validate();
      return st;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bad setting: ") + e.what());
  }
  throw ConfigError("setting must be 1, 2, 3, \"setting1\".. or an object");
}

std::vector<Scenario> select_reference_scenarios(const std::string& spec) {
  const auto& all = reference_scenarios();
  std::vector<Scenario> out;
  std::stringstream ss(spec);
  std::string part;
  auto index = [&](const std::string& t) {
    std::size_t used = 0;
    int k = 0;
    try {
      k = std::stoi(t, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad scenario index `" + t + "`");
    }
    if (used != t.size() || k < 1 || k > static_cast<int>(all.size()))
      throw ConfigError("scenario index must be in 1-" + std::to_string(all.size()));
    return k;
  };
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(all[index(part) - 1]);
    } else {
      int a = index(part.substr(0, dash)), b = index(part.substr(dash + 1));
      if (a > b) throw ConfigError("empty scenario range `" + part + "`");
      for (int k = a; k <= b; ++k) out.push_back(all[k - 1]);
    }
  }
  if (out.empty()) throw ConfigError("no scenarios selected");
  return out;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

namespace {

std::vector<Scenario> parse_scenarios(const nlohmann::json& j) {
  std::vector<Scenario> out;
  const auto& list = j.is_object() && j.contains("scenarios") ? j.at("scenarios") : j;
  auto one = [&](const nlohmann::json& e) {
    if (e.is_number_integer()) {
      auto s = select_reference_scenarios(std::to_string(e.get<int>()));
      out.push_back(s[0]);
    } else {
      Scenario s = e.get<Scenario>();
      if (s.name.empty()) s.name = "S" + std::to_string(out.size() + 1);
      out.push_back(s);
    }
  };
  if (list.is_array()) {
    for (const auto& e : list) one(e);
  } else {
    one(list);
  }
  if (out.empty()) throw ConfigError("scenario list is empty");
  return out;
}

}  // namespace

std::vector<Scenario> read_scenario_file(const std::string& path) {
  auto j = read_json_file(path);
  try {
    return parse_scenarios(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const InputError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

RunConfig parse_run_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config must be an object");
  static const std::vector<std::string> known = {"design", "rules",      "setting", "n_max",   "cohort",
                                                 "forced_gap", "n_sims", "seed",    "workers", "scenarios"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("unknown config key `" + it.key() + "`");
  RunConfig c;
  try {
    if (!j.contains("design")) throw ConfigError("run config needs a `design`");
    const auto& dj = j.at("design");
    c.design = dj.is_string() ? nlohmann::json{{"engine", dj}}.get<DesignConfig>() : dj.get<DesignConfig>();
    if (j.contains("rules")) {
      c.rules = RuleConfig::defaults_for(c.design.engine);
      nlohmann::json merged = c.rules;
      merged.merge_patch(j.at("rules"));
      c.rules = merged.get<RuleConfig>();
      c.rules_given = true;
    }
    if (j.contains("setting")) c.setting = parse_setting(j.at("setting"));
    c.sim.n_max = j.value("n_max", c.sim.n_max);
    c.sim.cohort = j.value("cohort", c.sim.cohort);
    c.sim.forced_gap = j.value("forced_gap", c.sim.forced_gap);
    c.n_sims = j.value("n_sims", c.n_sims);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    if (j.contains("scenarios")) c.scenarios = parse_scenarios(j.at("scenarios"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  } catch (const UnsupportedError& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

nlohmann::json run_config_json(const RunConfig& c) {
  nlohmann::json j;
  j["design"] = c.design;
  j["rules"] = c.effective_rules();
  j["setting"] = {{"delta", c.setting.delta}, {"window", c.setting.window}, {"wstar", c.setting.wstar}, {"q", c.setting.q}};
  j["n_max"] = c.sim.n_max;
  j["cohort"] = c.sim.cohort;
  j["forced_gap"] = c.sim.forced_gap;
  j["n_sims"] = c.n_sims;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  if (!c.scenarios.empty()) j["scenarios"] = c.scenarios;
  return j;
}

}  // namespace dosefind
