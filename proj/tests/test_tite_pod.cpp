#include <doctest.h>

#include <cmath>
#include <random>

#include "dosefind/engine.hpp"
#include "dosefind/rules.hpp"
#include "test_helpers.hpp"

using namespace dosefind;

namespace {

DesignConfig config(const std::string& engine, double target = 0.3, int J = 5) {
  DesignConfig c;
  c.engine = engine;
  c.grid.target = target;
  c.grid.J = J;
  return c;
}

double lbeta_(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

}  // namespace

TEST_CASE("TITE and POD engines reduce to the complete design when nothing is pending") {
  const std::vector<std::string> fams = {"tpi", "boin", "crm", "keyboard", "i3"};
  std::mt19937_64 g(3);
  for (const auto& f : fams) {
    for (const std::string mode : {"tite-", "pod-"}) {
      if (f == "i3" && mode == "pod-") continue;
      auto c = config(mode + f);
      auto eng = make_engine(c);
      auto base = std::dynamic_pointer_cast<const CompleteEngine>(eng->counterpart());
      REQUIRE(base);
      for (int rep = 0; rep < 25; ++rep) {
        std::vector<std::pair<int, bool>> assessed;
        int top = 1 + static_cast<int>(g() % 4);
        for (int i = 0; i < 9; ++i) {
          int d = 1 + static_cast<int>(g() % top);
          assessed.push_back({d, (g() % 100) < static_cast<unsigned>(10 * d)});
        }
        auto s = testing::make_snapshot(assessed, {});
        int d = assessed.back().first;
        std::vector<int> n, m;
        complete_counts(s, 5, n, m);
        INFO(mode, f, " rep ", rep);
        CHECK(eng->decide(s, d, 7).decision == base->decide_counts(n, m, d));
      }
    }
  }
}

TEST_CASE("POD probabilities for one pending patient match the Beta integral") {
  auto c = config("pod-boin");
  c.tox = TimeModelSpec::uniform();
  auto eng = make_engine(c);
  for (double v : {3.0, 14.0, 25.0}) {
    auto s = testing::make_snapshot({{1, false}, {1, false}}, {{1, v}});
    auto res = eng->decide(s, 1, 1);
    REQUIRE(res.pod);
    const double rho = v / 28.0;
    // Pr(K = 1 | H) with p ~ Beta(1, 1): weight (1 - rho) B(2, 3) against B(1, 4).
    double a = std::log(1.0 - rho) + lbeta_(2, 3), b = lbeta_(1, 4);
    double k1 = 1.0 / (1.0 + std::exp(b - a));
    CHECK(res.pod->prob(1) == doctest::Approx(k1).epsilon(1e-10));
    CHECK(res.pod->prob(2) == doctest::Approx(1.0 - k1).epsilon(1e-10));
    CHECK(res.pod->chosen == 2);
    CHECK(res.pod->exact);
  }
}

TEST_CASE("POD distribution is normalised and its mode is chosen") {
  for (const std::string e : {"pod-tpi", "pod-crm", "pod-keyboard"}) {
    auto eng = make_engine(config(e));
    auto s = testing::make_snapshot({{1, false}, {1, false}, {1, false}, {2, true}, {2, false}},
                                    {{2, 4.0}, {2, 10.0}, {2, 20.0}}, 28.0, 6.0);
    auto res = eng->decide(s, 2, 3);
    REQUIRE(res.pod);
    double tot = 0.0, best = -1.0;
    int mode = 0;
    for (const auto& en : res.pod->entries) {
      tot += en.prob;
      if (en.prob > best + 1e-12) {
        best = en.prob;
        mode = en.level;
      }
    }
    CHECK(tot == doctest::Approx(1.0));
    CHECK(res.pod->chosen == mode);
    CHECK(res.decision.level == res.pod->chosen);
  }
}

TEST_CASE("Monte Carlo POD agrees with enumeration") {
  auto c = config("pod-crm");
  c.tox = TimeModelSpec::uniform();
  auto exact = make_engine(c);
  c.pod_enum_cap = 1;
  c.pod_mc_draws = 40000;
  auto mc = make_engine(c);
  auto s = testing::make_snapshot({{1, false}, {1, false}, {1, false}, {2, false}}, {{2, 5.0}, {2, 12.0}, {2, 21.0}});
  auto a = exact->decide(s, 2, 1), b = mc->decide(s, 2, 1);
  REQUIRE(a.pod);
  REQUIRE(b.pod);
  CHECK_FALSE(b.pod->exact);
  for (int l = 1; l <= 5; ++l) CHECK(std::fabs(a.pod->prob(l) - b.pod->prob(l)) < 0.02);
}

TEST_CASE("probability suspension with q = 0 fires whenever a lower level is possible") {
  auto c = config("pod-boin");
  c.tox = TimeModelSpec::uniform();
  auto eng = make_engine(c);
  auto s = testing::make_snapshot({{1, false}, {1, false}}, {{1, 14.0}});
  auto rules = RuleConfig::defaults_for("pod-boin");
  CHECK(rules.suspension == SuspensionKind::Probability);
  auto rec = recommend(*eng, s, 1, rules, 1);
  CHECK(rec.suspended);
  rules.q = 0.2;
  rec = recommend(*eng, s, 1, rules, 1);
  CHECK_FALSE(rec.suspended);
  CHECK(rec.decision.level == 2);
}

TEST_CASE("TITE engines discount pending patients by follow-up") {
  auto eng = make_engine(config("tite-crm"));
  auto early = testing::make_snapshot({{1, false}, {1, false}, {1, false}}, {{2, 1.0}, {2, 1.0}});
  auto late = testing::make_snapshot({{1, false}, {1, false}, {1, false}}, {{2, 27.0}, {2, 27.0}});
  auto a = eng->decide(early, 2, 1), b = eng->decide(late, 2, 1);
  CHECK(a.decision.level <= b.decision.level);
}

TEST_CASE("TITE-i3 can de-escalate when fresh patients join without a new DLT") {
  auto eng = make_engine(config("tite-i3", 0.2));
  const std::vector<std::pair<int, bool>> done = {{1, false}, {1, false}, {1, false}, {2, true}, {2, false}, {2, false}};
  auto before = testing::make_snapshot(done, {});
  auto after = testing::make_snapshot(done, {{2, 0.5}, {2, 0.5}, {2, 0.5}});
  // 1/3 at dose 2: (3 * 1/3 - 1) / 3 = 0 lies below the stay interval, so stay.
  CHECK(eng->decide(before, 2, 1).decision.level == 2);
  // Three fresh patients leave the MLE near 1/3 but lift (6 * p - 1) / 6 into the stay interval.
  CHECK(eng->decide(after, 2, 1).decision.level == 1);
}
