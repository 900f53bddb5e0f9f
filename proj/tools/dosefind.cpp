#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "dosefind/config.hpp"
#include "dosefind/http_service.hpp"
#include "dosefind/sim.hpp"

using namespace dosefind;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

nlohmann::json json_arg(const std::string& v) {
  if (!v.empty() && (v.front() == '{' || v.front() == '[')) {
    try {
      return nlohmann::json::parse(v);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(e.what());
    }
  }
  return read_json_file(v);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

struct SimulateArgs {
  std::string config, design, scenarios, scenario_file, rules, out;
  std::string setting;
  std::optional<int> n_sims, cohort, n_max, workers;
  std::optional<std::uint64_t> seed;
  bool forced_gap = false;
  bool json = false;
};

int cmd_simulate(const SimulateArgs& a) {
  RunConfig c;
  {
    nlohmann::json j = a.config.empty() ? nlohmann::json::object() : json_arg(a.config);
    if (!a.design.empty()) {
      if (!j.contains("design")) j["design"] = nlohmann::json::object();
      j["design"]["engine"] = a.design;
    }
    if (!j.contains("design")) throw ConfigError("--design is required");
    if (!a.rules.empty()) j["rules"] = json_arg(a.rules);
    if (!a.setting.empty()) j["setting"] = a.setting;
    if (a.n_sims) j["n_sims"] = *a.n_sims;
    if (a.cohort) j["cohort"] = *a.cohort;
    if (a.n_max) j["n_max"] = *a.n_max;
    if (a.workers) j["workers"] = *a.workers;
    if (a.seed) j["seed"] = *a.seed;
    if (a.forced_gap) j["forced_gap"] = true;
    c = parse_run_config(j);
  }
  if (!a.scenarios.empty()) c.scenarios = select_reference_scenarios(a.scenarios);
  if (!a.scenario_file.empty()) c.scenarios = read_scenario_file(a.scenario_file);
  if (c.scenarios.empty()) c.scenarios = reference_scenarios();
  c.validate();
  BatchResult b;
  try {
    b = run_batch(c.design, c.scenarios, c.setting, c.effective_rules(), c.sim, c.n_sims, c.seed, c.workers);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  const std::string csv = metrics_csv(b);
  nlohmann::json full = {{"config", run_config_json(c)}, {"result", b}};
  if (!a.out.empty()) {
    write_file(a.out + ".csv", csv);
    write_file(a.out + ".json", full.dump(2) + "\n");
  }
  if (a.json)
    std::cout << full.dump(2) << "\n";
  else if (a.out.empty())
    std::cout << csv;
  return 0;
}

struct DecideArgs {
  std::string history, snapshot, config, design, rules;
  std::optional<double> at;
  std::optional<double> target;
  std::optional<int> current;
  std::uint64_t seed = 1;
  bool json = false;
};

int cmd_decide(const DecideArgs& a) {
  DesignConfig design;
  RuleConfig rules;
  {
    nlohmann::json j = a.config.empty() ? nlohmann::json::object() : json_arg(a.config);
    nlohmann::json dj = j.contains("design") ? j["design"] : (j.contains("engine") ? j : nlohmann::json::object());
    if (!a.design.empty()) dj["engine"] = a.design;
    if (a.target) dj["target"] = *a.target;
    try {
      design = dj.get<DesignConfig>();
      design.validate();
      nlohmann::json r = RuleConfig::defaults_for(design.engine);
      if (j.contains("rules")) r.merge_patch(j["rules"]);
      if (!a.rules.empty()) r.merge_patch(json_arg(a.rules));
      rules = r.get<RuleConfig>();
      rules.validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  Snapshot s;
  s.window = design.grid.window;
  int current = 1;
  try {
    if (!a.snapshot.empty()) {
      std::ifstream in(a.snapshot);
      if (!in) throw ConfigError("cannot open " + a.snapshot);
      s = read_snapshot(in);
      if (!s.patients.empty()) current = s.patients.back().dose;
    } else if (!a.history.empty()) {
      std::ifstream in(a.history);
      if (!in) throw ConfigError("cannot open " + a.history);
      auto recs = read_records(in);
      double tau = 0.0;
      for (const auto& r : recs) tau = std::max(tau, r.enroll + design.grid.window);
      s = snapshot(recs, a.at.value_or(tau), design.grid.window);
      if (!recs.empty()) current = recs.back().dose;
    }
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
  if (a.current) current = *a.current;
  auto engine = make_engine(design);
  Recommendation rec = recommend(*engine, s, current, rules, a.seed);
  if (a.json) {
    nlohmann::json out = rec;
    out["engine"] = engine->name();
    out["current_dose"] = current;
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  std::cout << "engine: " << engine->name() << "\n";
  std::cout << "current dose: " << current << "\n";
  std::cout << "decision: " << to_string(rec.decision) << "\n";
  if (rec.decision.enrolls()) std::cout << "next dose: " << rec.decision.level << "\n";
  if (rec.evaluated && !(rec.engine_decision == rec.decision))
    std::cout << "engine decision: " << to_string(rec.engine_decision) << "\n";
  for (const auto& f : rec.firings) std::cout << "rule: " << f << "\n";
  if (rec.pod) {
    std::cout << "POD:";
    for (const auto& e : rec.pod->entries) std::cout << " dose " << e.level << "=" << std::fixed << std::setprecision(4) << e.prob;
    std::cout << "\n";
  }
  return 0;
}

struct CalibrateArgs {
  std::optional<double> p;
  double window = 28.0, wstar = 14.0, q = 0.5;
  std::string setting, scenarios;
};

int cmd_calibrate(const CalibrateArgs& a) {
  std::cout << std::setprecision(10);
  if (a.p) {
    Weibull w;
    try {
      w = calibrate_weibull(*a.p, a.window, a.wstar, a.q);
    } catch (const std::logic_error& e) {
      throw ConfigError(e.what());
    }
    std::cout << "p,window,wstar,q,shape,scale\n"
              << *a.p << ',' << a.window << ',' << a.wstar << ',' << a.q << ',' << w.shape << ',' << w.scale << "\n";
    return 0;
  }
  Setting st = a.setting.empty() ? reference_setting(1) : parse_setting(nlohmann::json(a.setting));
  auto scs = a.scenarios.empty() ? reference_scenarios() : select_reference_scenarios(a.scenarios);
  std::cout << "scenario,dose,p,shape,scale\n";
  for (const auto& sc : scs)
    for (std::size_t z = 0; z < sc.p.size(); ++z) {
      Weibull w = calibrate_weibull(sc.p[z], st.window, st.wstar, st.q);
      std::cout << sc.name << ',' << z + 1 << ',' << sc.p[z] << ',' << w.shape << ',' << w.scale << "\n";
    }
  return 0;
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string weights;
};

// Weighted sum of averaged metrics; lower is better with the default weights.
int cmd_report(const ReportArgs& a) {
  std::map<std::string, double> w = {{"PCS", -1.0}, {"POA", 1.0}, {"DS", 0.0}, {"DE", 0.0}, {"SE", 0.0}, {"Dur", 0.0}};
  if (!a.weights.empty()) {
    w.clear();
    std::stringstream ss(a.weights);
    std::string part;
    while (std::getline(ss, part, ',')) {
      auto eq = part.find('=');
      if (eq == std::string::npos) throw ConfigError("weights look like PCS=-1,POA=1");
      try {
        w[part.substr(0, eq)] = std::stod(part.substr(eq + 1));
      } catch (const std::exception&) {
        throw ConfigError("bad weight `" + part + "`");
      }
    }
  }
  static const std::vector<std::string> cols = {"PCS", "PCA", "POS", "POA", "POT", "DS", "DE", "SE", "Dur"};
  for (const auto& [k, v] : w)
    if (std::find(cols.begin(), cols.end(), k) == cols.end()) throw ConfigError("unknown metric `" + k + "`");
  std::cout << "design";
  for (const auto& c : cols) std::cout << ',' << c;
  std::cout << ",loss\n" << std::fixed << std::setprecision(2);
  for (const auto& path : a.inputs) {
    auto j = read_json_file(path);
    const auto& r = j.contains("result") ? j["result"] : j;
    if (!r.contains("average")) throw ConfigError(path + " is not a simulation result");
    const auto& avg = r["average"];
    double loss = 0.0;
    std::cout << r.value("design", path);
    for (const auto& c : cols) {
      double v = avg.at(c).get<double>();
      std::cout << ',' << v;
      if (w.count(c)) loss += w[c] * v;
    }
    std::cout << ',' << loss << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dose-finding designs with pending outcomes: simulation, decisions and trial conduct"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run a simulation batch and print operating characteristics");
  s->add_option("--config", sim.config, "Run config file (JSON) or inline JSON");
  s->add_option("--design", sim.design, "Engine name, e.g. mtpi2, tite-boin, pod-tpi, tite-crm");
  s->add_option("--scenario,--scenarios", sim.scenarios, "Reference scenarios, e.g. 3 or 1-9 or 1,4,10");
  s->add_option("--scenario-file", sim.scenario_file, "JSON file with a scenario or a list of scenarios");
  s->add_option("--setting", sim.setting, "1, 2 or 3");
  s->add_option("--n-sims", sim.n_sims, "Trials per scenario");
  s->add_option("--seed", sim.seed, "Base seed; trial i uses seed + i");
  s->add_option("--rules", sim.rules, "Rule config file or inline JSON");
  s->add_option("--cohort", sim.cohort, "Cohort size (0 means the design default)");
  s->add_option("--n-max", sim.n_max, "Maximum sample size");
  s->add_flag("--forced-gap", sim.forced_gap, "Lengthen every inter-arrival time by W");
  s->add_option("--workers", sim.workers, "Worker threads");
  s->add_option("--out", sim.out, "Write OUT.csv and OUT.json");
  s->add_flag("--json", sim.json, "Print JSON instead of CSV");

  DecideArgs dec;
  auto* d = app.add_subcommand("decide", "Recommend the next dose for a trial history");
  d->add_option("--history", dec.history, "Patient records, one JSON object per line");
  d->add_option("--snapshot", dec.snapshot, "Snapshot JSON instead of records");
  d->add_option("--config", dec.config, "Design config file or inline JSON");
  d->add_option("--design", dec.design, "Engine name");
  d->add_option("--target", dec.target, "Target DLT probability");
  d->add_option("--rules", dec.rules, "Rule config file or inline JSON");
  d->add_option("--at", dec.at, "Decision time (default: every outcome resolved)");
  d->add_option("--current", dec.current, "Current dose (default: dose of the last patient)");
  d->add_option("--seed", dec.seed, "Seed for Monte Carlo inference");
  d->add_flag("--json", dec.json, "Print JSON");

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Weibull time-to-toxicity parameters");
  c->add_option("--p", cal.p, "DLT probability within the window");
  c->add_option("--window", cal.window, "Assessment window W");
  c->add_option("--wstar", cal.wstar, "Split point W*");
  c->add_option("--q", cal.q, "Share of DLTs in (W*, W]");
  c->add_option("--setting", cal.setting, "Tabulate a reference setting instead");
  c->add_option("--scenario,--scenarios", cal.scenarios, "Scenarios to tabulate");

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Compare simulation results with a weighted loss");
  r->add_option("inputs", rep.inputs, "JSON results written by simulate --out")->required();
  r->add_option("--weights", rep.weights, "Loss weights, e.g. PCS=-1,POA=1");

  std::string host = "127.0.0.1", log_dir;
  int port = 8080;
  auto* v = app.add_subcommand("serve", "Run the trial-conduct HTTP service");
  v->add_option("--host", host, "Bind address");
  v->add_option("--port", port, "Port");
  v->add_option("--log-dir", log_dir, "Directory for session event logs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  try {
    if (*s) return cmd_simulate(sim);
    if (*d) {
      if (dec.design.empty() && dec.config.empty()) throw ConfigError("--design or --config is required");
      return cmd_decide(dec);
    }
    if (*c) return cmd_calibrate(cal);
    if (*r) return cmd_report(rep);
    if (*v) {
      ConductService svc(log_dir);
      std::cerr << "listening on " << host << ':' << port << "\n";
      if (!serve(svc, host, port)) {
        std::cerr << "error: cannot listen on " << host << ':' << port << "\n";
        return kRuntimeError;
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
