// Acceptance checks. Prints one PASS/FAIL line per criterion.
//
// Usage: acceptance [--sims N] [--workers K] [--only 1,2,...] [--expect-fail 6,...]
// Exit status is 0 when the set of failing criteria equals the --expect-fail set.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dosefind/engine.hpp"
#include "dosefind/inference.hpp"
#include "dosefind/likelihood.hpp"
#include "dosefind/mtd_select.hpp"
#include "dosefind/rules.hpp"
#include "dosefind/sim.hpp"

using namespace dosefind;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.insert(std::stoi(tok));
  return out;
}

int g_sims = 1000;
int g_workers = 1;

// Batches shared across criteria, run once on first use.
std::map<std::string, BatchResult> g_batches;

const BatchResult& batch(const std::string& key, const std::string& engine,
                         std::optional<TimeModelSpec> tox = std::nullopt) {
  auto it = g_batches.find(key);
  if (it != g_batches.end()) return it->second;
  DesignConfig c;
  c.engine = engine;
  c.tox = tox;
  auto t0 = std::chrono::steady_clock::now();
  auto b = run_batch(c, reference_scenarios(), reference_setting(1), RuleConfig::defaults_for(engine), SimOptions{}, g_sims, 1,
                     g_workers);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  [batch %s: %d sims x 18 scenarios in %.1f s; PCS %.2f PCA %.2f POS %.2f POA %.2f POT %.2f DS %.2f "
              "DE %.2f SE %.2f Dur %.1f]\n",
              key.c_str(), g_sims, secs, b.average.pcs, b.average.pca, b.average.pos, b.average.poa, b.average.pot,
              b.average.ds, b.average.de, b.average.se, b.average.dur);
  std::fflush(stdout);
  return g_batches.emplace(key, std::move(b)).first->second;
}

Snapshot random_snapshot(std::mt19937_64& g, int J, int max_assessed, int min_pending, int max_pending, double W) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Snapshot s;
  s.window = W;
  s.clock = 100.0;
  int na = static_cast<int>(g() % (max_assessed + 1));
  int nr = min_pending + static_cast<int>(g() % (max_pending - min_pending + 1));
  int id = 1;
  for (int i = 0; i < na; ++i) {
    PatientState p;
    p.id = id++;
    p.dose = 1 + static_cast<int>(g() % J);
    p.assessed = true;
    p.dlt = u(g) < 0.1 + 0.15 * p.dose;
    p.followup = p.dlt ? 0.5 + (W - 0.5) * u(g) : W;
    s.patients.push_back(p);
  }
  for (int i = 0; i < nr; ++i) {
    PatientState p;
    p.id = id++;
    p.dose = 1 + static_cast<int>(g() % J);
    p.followup = 0.1 + (W - 0.2) * u(g);
    s.patients.push_back(p);
  }
  return s;
}

WeightModel random_model(std::mt19937_64& g, double W) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  switch (g() % 5) {
    case 0: return WeightModel::uniform(W);
    case 1: {
      std::vector<double> w = {u(g), u(g), u(g)};
      double s = w[0] + w[1] + w[2];
      for (auto& x : w) x /= s;
      return WeightModel::piecewise_uniform_equal(w, W);
    }
    case 2: return WeightModel::discrete_hazard({W / 4, W / 2, W}, {0.5 * u(g), 0.5 * u(g), 1.0}, W);
    case 3: return WeightModel::piecewise_const_hazard({W / 3, 2 * W / 3, W}, {u(g), u(g), u(g)}, W);
    default: return WeightModel::rescaled_beta(0.5 + 2 * u(g), 0.5 + 2 * u(g), W);
  }
}

Result c1_likelihood() {
  std::mt19937_64 g(20240101);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int J = 3;
    Snapshot s = random_snapshot(g, J, 12, 0, 10, 28.0);
    WeightModel wm = random_model(g, 28.0);
    std::vector<double> p = {u(g), u(g), u(g)};
    const int r = s.pending_count();
    std::vector<double> terms;
    for (int mask = 0; mask < (1 << r); ++mask) {
      std::vector<int> y(r);
      for (int i = 0; i < r; ++i) y[i] = (mask >> i) & 1;
      terms.push_back(augmented_loglik(p, wm, y, s));
    }
    worst = std::max(worst, std::fabs(survival_loglik(p, wm, s) - log_sum_exp(terms)));
  }
  return {worst < 1e-10, "max abs difference " + fmt("%.3g", worst) + " over 100 instances"};
}

Result c2_closed_form() {
  Snapshot s;
  s.window = 28.0;
  s.clock = 50.0;
  s.patients = {{1, 1, 10.0, true, true}, {2, 1, 28.0, false, true}, {3, 1, 14.0, false, false}};
  const double want = (3.0 - std::sqrt(3.0)) / 3.0;
  auto em = em_mle(s, TimeModelSpec::uniform(), 1);
  auto sc = score_mle(s, TimeModelSpec::uniform(), 1);
  bool mono = true;
  for (std::size_t i = 1; i < em.trace.size(); ++i) mono = mono && em.trace[i] >= em.trace[i - 1] - 1e-12;
  double de = std::fabs(em.p[0] - want), ds = std::fabs(sc.p[0] - want);
  return {de < 1e-8 && ds < 1e-8 && mono, "EM " + fmt("%.12f", em.p[0]) + ", score " + fmt("%.12f", sc.p[0]) +
                                              ", target " + fmt("%.12f", want) +
                                              (mono ? ", EM trace monotone" : ", EM trace NOT monotone")};
}

Result c3_samplers() {
  std::mt19937_64 g(777);
  const int J = 3;
  std::vector<PPrior> pri(J, PPrior::beta(1.0, 1.0));
  double worst = 0.0;
  int bad = 0, checks = 0;
  for (int rep = 0; rep < 20; ++rep) {
    Snapshot s = random_snapshot(g, J, 9, 1, 6, 28.0);
    SamplerOptions opt;
    opt.iters = 4000;
    opt.seed = 1000 + rep;
    auto a = imh_sample(pri, s, TimeModelSpec::piecewise_uniform(3), J, opt);
    opt.seed = 5000 + rep;
    auto b = da_sample(pri, s, TimeModelSpec::piecewise_uniform(3), J, opt);
    auto ma = a.mean(), mb = b.mean(), sa = a.mc_se(), sb = b.mc_se();
    for (int z = 0; z < J; ++z) {
      double zscore = std::fabs(ma[z] - mb[z]) / std::hypot(sa[z], sb[z]);
      worst = std::max(worst, zscore);
      ++checks;
      if (zscore > 3.0) ++bad;
    }
  }
  return {bad == 0, std::to_string(checks) + " dose means, largest gap " + fmt("%.2f", worst) + " combined SEs"};
}

Result c4_boin() {
  auto a = boin_boundaries(0.3, 0.18, 0.42), b = boin_boundaries(0.2, 0.12, 0.28);
  bool ok = std::fabs(a.lambda_l - 0.2365) < 1e-4 && std::fabs(a.lambda_r - 0.3585) < 1e-4 &&
            std::fabs(b.lambda_l - 0.1573) < 1e-4 && std::fabs(b.lambda_r - 0.2385) < 1e-4;
  char buf[160];
  std::snprintf(buf, sizeof buf, "(%.4f, %.4f) and (%.4f, %.4f)", a.lambda_l, a.lambda_r, b.lambda_l, b.lambda_r);
  return {ok, buf};
}

Result c5_worked_example() {
  Snapshot s;
  s.window = 28.0;
  s.clock = 100.0;
  const int z[6] = {1, 1, 1, 2, 2, 2};
  const bool y[6] = {false, false, false, false, false, true};
  for (int i = 0; i < 6; ++i) s.patients.push_back({i + 1, z[i], y[i] ? 5.0 : 28.0, y[i], true});
  DesignConfig c;
  c.grid.target = 0.2;
  c.engine = "mtpi2";
  int a = make_engine(c)->decide(s, 2, 1).decision.level;
  c.engine = "crm";
  int b = make_engine(c)->decide(s, 2, 1).decision.level;
  return {a == 1 && b == 2, "mTPI-2 dose " + std::to_string(a) + ", CRM dose " + std::to_string(b)};
}

Result c6_reference_oc() {
  const auto& m = batch("mtpi2", "mtpi2").average;
  const auto& b = batch("tite-boin", "tite-boin").average;
  const auto& c = batch("tite-crm", "tite-crm").average;
  bool pcs_m = std::fabs(m.pcs - 51.9) <= 3.0;
  bool dur_m = std::fabs(m.dur - 594.0) <= 0.05 * 594.0;
  bool dur_b = std::fabs(b.dur - 435.0) <= 0.05 * 435.0;
  bool pcs_c = std::fabs(c.pcs - 55.4) <= 3.0;
  auto mark = [](bool ok) { return ok ? "ok" : "out of range"; };
  std::string d = "mTPI-2 PCS " + fmt("%.2f", m.pcs) + " (" + mark(pcs_m) + "), Dur " + fmt("%.1f", m.dur) + " (" +
                  mark(dur_m) + "); TITE-BOIN Dur " + fmt("%.1f", b.dur) + " (" + mark(dur_b) + "); TITE-CRM PCS " +
                  fmt("%.2f", c.pcs) + " (" + mark(pcs_c) + ")";
  return {pcs_m && dur_m && dur_b && pcs_c, d};
}

Result c7_pod_safety() {
  const auto& b = batch("pod-tpi", "pod-tpi");
  long ds = 0, de = 0, se = 0, dec = 0;
  for (const auto& m : b.per_scenario) {
    ds += m.audit.ds;
    de += m.audit.de;
    se += m.audit.se;
    dec += m.audit.decisions;
  }
  return {ds == 0 && de == 0 && se == 0, "DS " + std::to_string(ds) + ", DE " + std::to_string(de) + ", SE " +
                                             std::to_string(se) + " over " + std::to_string(dec) + " decisions"};
}

Result c8_reduction() {
  const std::vector<std::string> engines = {"tite-tpi", "tite-boin",     "tite-crm", "tite-keyboard", "tite-i3",
                                            "tite-spm", "pod-tpi",       "pod-boin", "pod-crm",       "pod-keyboard"};
  SimOptions opt;
  opt.forced_gap = true;
  int mismatches = 0, trials = 0;
  std::string first_bad;
  for (const auto& name : engines) {
    for (int k = 0; k < 100; ++k) {
      const Scenario& sc = reference_scenarios()[k % 18];
      DesignConfig c;
      c.engine = name;
      c = scenario_design(c, sc);
      auto eng = make_engine(c);
      DesignConfig cc = c;
      cc.engine = eng->counterpart()->name();
      auto base = make_engine(cc);
      const std::uint64_t seed = 9000 + k;
      auto a = run_trial(*eng, sc, reference_setting(1), RuleConfig::defaults_for(name), opt, seed);
      auto b = run_trial(*base, sc, reference_setting(1), RuleConfig::defaults_for(cc.engine), opt, seed);
      bool same = a.patients.size() == b.patients.size() && a.terminated == b.terminated &&
                  a.decisions.size() == b.decisions.size();
      for (std::size_t i = 0; same && i < a.patients.size(); ++i)
        same = a.patients[i].dose == b.patients[i].dose && a.patients[i].enroll == b.patients[i].enroll;
      for (std::size_t i = 0; same && i < a.decisions.size(); ++i) same = a.decisions[i].level == b.decisions[i].level;
      ++trials;
      if (!same) {
        ++mismatches;
        if (first_bad.empty()) first_bad = name + " seed " + std::to_string(seed);
      }
    }
  }
  return {mismatches == 0, std::to_string(trials) + " paired trials over " + std::to_string(engines.size()) +
                               " engines, " + std::to_string(mismatches) + " mismatches" +
                               (first_bad.empty() ? "" : " (first: " + first_bad + ")")};
}

// Fraction of trials whose final patient is at dose 4 of scenario 4.
double final_at_mtd(bool exclusion, int n_max, int n) {
  const Scenario sc = reference_scenarios()[3];  // target 0.2, only dose 4 inside (0.15, 0.25)
  DesignConfig c;
  c.engine = "tite-tpi";
  c = scenario_design(c, sc);
  auto eng = make_engine(c);
  SimOptions opt;
  opt.n_max = n_max;
  auto rules = RuleConfig::defaults_for("tite-tpi");
  rules.exclusion = exclusion;
  std::vector<int> hit(n, 0);
  auto work = [&](int w, int W) {
    for (int i = w; i < n; i += W) {
      auto r = run_trial(*eng, sc, reference_setting(1), rules, opt, 31000 + i);
      hit[i] = !r.patients.empty() && r.patients.back().dose == 4;
    }
  };
  std::vector<std::thread> th;
  for (int w = 0; w < g_workers; ++w) th.emplace_back(work, w, g_workers);
  for (auto& t : th) t.join();
  int k = 0;
  for (int h : hit) k += h;
  return 100.0 * k / n;
}

// Judged with dose exclusion off: a permanently excluded dose never accrues the
// unbounded sample size the convergence result assumes.
Result c9_convergence() {
  const double pct = final_at_mtd(false, 300, 200);
  const double with_rules = final_at_mtd(true, 300, 200);
  const double longer = final_at_mtd(false, 600, 200);
  return {pct >= 95.0, "final cohort at dose 4 in " + fmt("%.1f", pct) + "% of 200 trials (exclusion off); " +
                           fmt("%.1f", with_rules) + "% with default safety rules; " + fmt("%.1f", longer) +
                           "% at N* = 600"};
}

Result c10_coherence() {
  long crm = 0, boin = 0, i3 = 0;
  for (const auto& m : batch("tite-crm", "tite-crm").per_scenario) crm += m.coherence_violations;
  for (const auto& m : batch("tite-boin", "tite-boin").per_scenario) boin += m.interval_violations;
  for (const auto& m : batch("tite-i3", "tite-i3").per_scenario) i3 += m.interval_violations;
  return {crm == 0 && boin == 0 && i3 == 0, "TITE-CRM " + std::to_string(crm) + ", TITE-BOIN " + std::to_string(boin) +
                                                ", TITE-i3 " + std::to_string(i3) + " violations"};
}

Result c11_weibull() {
  double worst = 0.0;
  for (int k = 1; k <= 3; ++k) {
    Setting st = reference_setting(k);
    for (const auto& sc : reference_scenarios())
      for (double p : sc.p) {
        Weibull w = calibrate_weibull(p, st.window, st.wstar, st.q);
        worst = std::max(worst, std::fabs(w.cdf(st.window) - p));
        worst = std::max(worst, std::fabs(w.cdf(st.wstar) - (1.0 - st.q) * p));
      }
  }
  Weibull w = calibrate_weibull(0.3, 28.0, 14.0, 0.5);
  bool ok = worst < 1e-10 && std::fabs(w.shape - 1.13395) < 1e-3 && std::fabs(w.scale - 69.50) < 1e-3 * 69.50;
  return {ok, "max residual " + fmt("%.3g", worst) + "; shape " + fmt("%.5f", w.shape) + ", scale " +
                  fmt("%.3f", w.scale)};
}

Result c12_pava() {
  // Exhaustive over lengths 1..5 with rates in tenths (weights 1 or 2 up to length 3, unit beyond),
  // plus random weighted instances at lengths 4 and 5.
  // Oracle: minimum weighted SSE over non-decreasing sequences on a 1e-3 grid, by dynamic programming.
  const int G = 1000;
  auto brute = [&](const std::vector<double>& v, const std::vector<double>& w) {
    std::vector<double> best(G + 1, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::vector<double> nb(G + 1);
      double run = INFINITY;
      for (int x = 0; x <= G; ++x) {
        run = std::min(run, best[x]);
        double d = v[i] - x / static_cast<double>(G);
        nb[x] = run + w[i] * d * d;
      }
      best = nb;
    }
    return *std::min_element(best.begin(), best.end());
  };
  long cases = 0;
  double worst = 0.0;
  bool mono = true;
  std::function<void(std::vector<double>&, std::vector<double>&, std::size_t)> rec;
  auto check = [&](const std::vector<double>& v, const std::vector<double>& w) {
    auto f = pava(v, w);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += w[i] * (v[i] - f[i]) * (v[i] - f[i]);
    for (std::size_t i = 1; i < f.size(); ++i) mono = mono && f[i] >= f[i - 1] - 1e-12;
    worst = std::max(worst, s - brute(v, w));
    ++cases;
  };
  rec = [&](std::vector<double>& v, std::vector<double>& w, std::size_t L) {
    if (v.size() == L) {
      check(v, w);
      return;
    }
    const std::vector<double> weights = L <= 3 ? std::vector<double>{1.0, 2.0} : std::vector<double>{1.0};
    for (int t = 0; t <= 10; ++t)
      for (double wt : weights) {
        v.push_back(t / 10.0);
        w.push_back(wt);
        rec(v, w, L);
        v.pop_back();
        w.pop_back();
      }
  };
  for (std::size_t L = 1; L <= 5; ++L) {
    std::vector<double> v, w;
    rec(v, w, L);
  }
  std::mt19937_64 g(12);
  for (int i = 0; i < 2000; ++i) {
    std::size_t L = 4 + g() % 2;
    std::vector<double> v(L), w(L);
    for (std::size_t k = 0; k < L; ++k) {
      v[k] = static_cast<double>(g() % 11) / 10.0;
      w[k] = 1.0 + static_cast<double>(g() % 3);
    }
    check(v, w);
  }
  auto ex = pava({0.3, 0.1, 0.2}, {3, 3, 3});
  bool ex_ok = std::fabs(ex[0] - 0.2) < 1e-12 && std::fabs(ex[1] - 0.2) < 1e-12 && std::fabs(ex[2] - 0.2) < 1e-12;
  // The grid optimum can only be worse than the exact optimum, so PAVA must never exceed it.
  return {worst <= 1e-12 && mono && ex_ok, std::to_string(cases) + " instances; PAVA SSE minus grid optimum at most " +
                                               fmt("%.2g", worst) + "; example " + (ex_ok ? "ok" : "wrong")};
}

Result c13_sensitivity() {
  const auto& pu = batch("pod-tpi", "pod-tpi", TimeModelSpec::piecewise_uniform(3)).average;
  const auto& un = batch("pod-tpi-uniform", "pod-tpi", TimeModelSpec::uniform()).average;
  const auto& dh = batch("pod-tpi-dh", "pod-tpi", TimeModelSpec::discrete_hazard()).average;
  bool pcs_ok = std::fabs(pu.pcs - un.pcs) < 2.0;
  bool poa_ok = dh.poa <= un.poa;
  return {pcs_ok && poa_ok, "PCS uniform " + fmt("%.2f", un.pcs) + " vs PU3 " + fmt("%.2f", pu.pcs) +
                                "; POA discrete hazard " + fmt("%.2f", dh.poa) + " vs uniform " + fmt("%.2f", un.poa)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, expect_fail;
  g_workers = std::max(1u, std::thread::hardware_concurrency());
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::fprintf(stderr, "missing value for %s\n", a.c_str());
        std::exit(2);
      }
      return argv[++i];
    };
    if (a == "--sims") g_sims = std::stoi(next());
    else if (a == "--workers") g_workers = std::stoi(next());
    else if (a == "--only") only = parse_list(next());
    else if (a == "--expect-fail") expect_fail = parse_list(next());
    else {
      std::fprintf(stderr, "unknown argument %s\n", a.c_str());
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Result()>>> criteria = {
      {"likelihood equivalence", c1_likelihood},
      {"closed-form MLE", c2_closed_form},
      {"IMH vs DA posterior means", c3_samplers},
      {"BOIN boundaries", c4_boin},
      {"worked example", c5_worked_example},
      {"reference operating characteristics, setting 1", c6_reference_oc},
      {"POD-TPI has no DS, DE or SE", c7_pod_safety},
      {"reduction under forced gaps", c8_reduction},
      {"TITE-TPI convergence, N* = 300", c9_convergence},
      {"coherence monitors", c10_coherence},
      {"Weibull calibration", c11_weibull},
      {"PAVA vs grid projection", c12_pava},
      {"time-to-toxicity sensitivity", c13_sensitivity},
  };

  std::set<int> failed;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Result r;
    try {
      r = criteria[k].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!r.pass) failed.insert(id);
    std::printf("criterion %2d: %s  %s: %s [%.1f s]\n", id, r.pass ? "PASS" : "FAIL", criteria[k].first.c_str(),
                r.detail.c_str(), secs);
    std::fflush(stdout);
  }

  std::printf("%zu failed", failed.size());
  if (!expect_fail.empty()) {
    std::printf("; expected to fail:");
    for (int id : expect_fail) std::printf(" %d", id);
  }
  std::printf("\n");
  for (int id : expect_fail)
    if (!failed.count(id) && (only.empty() || only.count(id)))
      std::printf("criterion %d was expected to fail but passed\n", id);
  std::set<int> want;
  for (int id : expect_fail)
    if (only.empty() || only.count(id)) want.insert(id);
  return failed == want ? 0 : 1;
}
