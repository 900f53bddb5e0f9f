#include <doctest.h>

#include <cmath>

#include "dosefind/sim.hpp"

using namespace dosefind;

TEST_CASE("Weibull calibration hits both quantile conditions") {
  for (int k = 1; k <= 3; ++k) {
    Setting st = reference_setting(k);
    for (double p : {0.02, 0.1, 0.3, 0.55}) {
      Weibull w = calibrate_weibull(p, st.window, st.wstar, st.q);
      CHECK(std::fabs(w.cdf(st.window) - p) < 1e-10);
      CHECK(std::fabs(w.cdf(st.wstar) - (1.0 - st.q) * p) < 1e-10);
      CHECK(w.quantile(w.cdf(20.0)) == doctest::Approx(20.0));
    }
  }
}

TEST_CASE("Weibull shape and scale for p = 0.3 in the first setting") {
  // -log(1 - F(t)) = (t / scale)^shape; solve with the two conditions directly.
  const double a = -std::log(1.0 - 0.3), b = -std::log(1.0 - 0.15);
  const double shape = std::log(a / b) / std::log(28.0 / 14.0);
  const double scale = 28.0 / std::pow(a, 1.0 / shape);
  Weibull w = calibrate_weibull(0.3, 28.0, 14.0, 0.5);
  CHECK(w.shape == doctest::Approx(shape).epsilon(1e-10));
  CHECK(w.scale == doctest::Approx(scale).epsilon(1e-10));
  CHECK(std::fabs(w.shape - 1.13395) < 1e-3);
  CHECK(std::fabs(w.scale - 69.50) < 1e-3 * 69.50);
}

TEST_CASE("calibration rejects impossible inputs") {
  CHECK_THROWS(calibrate_weibull(0.0, 28.0, 14.0, 0.5));
  CHECK_THROWS(calibrate_weibull(0.3, 28.0, 30.0, 0.5));
}

TEST_CASE("reference scenarios and MTD sets") {
  const auto& sc = reference_scenarios();
  REQUIRE(sc.size() == 18);
  for (const auto& s : sc) {
    CHECK_NOTHROW(s.validate());
    for (std::size_t z = 1; z < s.p.size(); ++z) CHECK(s.p[z] >= s.p[z - 1]);
  }
  Scenario a{"a", 0.3, {0.05, 0.1, 0.28, 0.33, 0.5}};
  CHECK(true_mtd_set(a) == std::vector<int>{3, 4});
  Scenario b{"b", 0.3, {0.05, 0.1, 0.2, 0.4, 0.5}};
  CHECK(true_mtd_set(b) == std::vector<int>{3});
  Scenario c{"c", 0.3, {0.5, 0.6}};
  CHECK(true_mtd_set(c).empty());
}

TEST_CASE("a trial is reproducible from its seed") {
  DesignConfig c;
  c.engine = "tite-boin";
  c.grid.target = 0.3;
  c.grid.J = 5;
  auto sc = reference_scenarios()[9];
  c = scenario_design(c, sc);
  auto eng = make_engine(c);
  auto rules = RuleConfig::defaults_for("tite-boin");
  SimOptions opt;
  auto a = run_trial(*eng, sc, reference_setting(1), rules, opt, 42);
  auto b = run_trial(*eng, sc, reference_setting(1), rules, opt, 42);
  CHECK(nlohmann::json(a).dump() == nlohmann::json(b).dump());
  CHECK(static_cast<int>(a.patients.size()) <= opt.n_max);
  for (std::size_t i = 1; i < a.patients.size(); ++i) CHECK(a.patients[i].enroll >= a.patients[i - 1].enroll);
}

TEST_CASE("complete designs never enroll while outcomes are pending") {
  DesignConfig c;
  c.engine = "mtpi2";
  auto sc = reference_scenarios()[0];
  c = scenario_design(c, sc);
  auto eng = make_engine(c);
  SimOptions opt;
  opt.cohort = 1;
  auto r = run_trial(*eng, sc, reference_setting(1), RuleConfig::defaults_for("mtpi2"), opt, 3);
  for (std::size_t i = 1; i < r.patients.size(); ++i) {
    const auto& p = r.patients[i - 1];
    double resolved = p.enroll + std::min(p.dlt_time.value_or(28.0), 28.0);
    CHECK(r.patients[i].enroll >= resolved - 1e-9);
  }
}

TEST_CASE("forced gaps leave nothing pending and remove aggressive incompatibilities") {
  DesignConfig c;
  c.engine = "tite-crm";
  auto sc = reference_scenarios()[3];
  c = scenario_design(c, sc);
  auto eng = make_engine(c);
  SimOptions opt;
  opt.forced_gap = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto r = run_trial(*eng, sc, reference_setting(1), RuleConfig::defaults_for("tite-crm"), opt, seed);
    CHECK(r.audit.aggressive() == 0);
  }
}

TEST_CASE("batch metrics are bounded and deterministic") {
  DesignConfig c;
  c.engine = "tite-boin";
  std::vector<Scenario> scs = {reference_scenarios()[0], reference_scenarios()[12]};
  auto rules = RuleConfig::defaults_for("tite-boin");
  auto a = run_batch(c, scs, reference_setting(1), rules, SimOptions{}, 30, 5, 1);
  auto b = run_batch(c, scs, reference_setting(1), rules, SimOptions{}, 30, 5, 3);
  REQUIRE(a.per_scenario.size() == b.per_scenario.size());
  for (std::size_t i = 0; i < a.per_scenario.size(); ++i) {
    const auto &x = a.per_scenario[i], &y = b.per_scenario[i];
    CHECK(x.pcs == doctest::Approx(y.pcs));
    CHECK(x.dur == doctest::Approx(y.dur));
    CHECK(x.pot == doctest::Approx(y.pot));
    CHECK(x.audit.decisions == y.audit.decisions);
  }
  for (const auto& m : a.per_scenario) {
    CHECK(m.trials == 30);
    CHECK(m.pcs >= 0.0);
    CHECK(m.pcs <= 100.0);
    CHECK(m.pot <= 100.0);
    CHECK(m.dur > 0.0);
    double sel = 0.0;
    for (double v : m.selection) sel += v;
    CHECK(sel <= 100.0 + 1e-9);
  }
  auto csv = metrics_csv(a);
  CHECK(csv.rfind("design,scenario,PCS,PCA,POS,POA,POT,DS,DE,SE,Dur", 0) == 0);
}

TEST_CASE("scenario design rejects a skeleton of the wrong length") {
  DesignConfig c;
  c.engine = "crm";
  c.grid.J = 5;
  c.grid.target = 0.3;
  c.skeleton = {0.1, 0.2, 0.3};
  CHECK_THROWS(scenario_design(c, reference_scenarios()[9]));
}

TEST_CASE("metrics accumulators merge") {
  DesignConfig c;
  c.engine = "boin";
  auto sc = reference_scenarios()[2];
  c = scenario_design(c, sc);
  auto eng = make_engine(c);
  auto rules = RuleConfig::defaults_for("boin");
  MetricsAccumulator all(sc), a(sc), b(sc);
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto r = run_trial(*eng, sc, reference_setting(3), rules, SimOptions{}, s);
    all.add(r);
    (s < 5 ? a : b).add(r);
  }
  a.merge(b);
  auto x = a.finish(), y = all.finish();
  CHECK(x.trials == y.trials);
  CHECK(x.pcs == doctest::Approx(y.pcs));
  CHECK(x.pca == doctest::Approx(y.pca));
  CHECK(x.dur == doctest::Approx(y.dur));
  CHECK(x.dur_se == doctest::Approx(y.dur_se));
  CHECK(x.audit.decisions == y.audit.decisions);
}
