#include <doctest.h>

#include <cmath>

#include "dosefind/rules.hpp"
#include "test_helpers.hpp"

using namespace dosefind;

namespace {

// Pr(p > t) under Beta(1 + n, 1 + m) as a binomial head probability.
double exceed(int n, int m, double t) {
  int a = n + 1, b = m + 1, N = a + b - 1;
  double s = 0.0;
  for (int k = 0; k < a; ++k)
    s += std::exp(std::lgamma(N + 1.0) - std::lgamma(k + 1.0) - std::lgamma(N - k + 1.0)) * std::pow(t, k) *
         std::pow(1.0 - t, N - k);
  return s;
}

DoseTally counts(std::vector<std::array<int, 3>> nmr) {
  DoseTally t;
  for (auto [n, m, r] : nmr) t.push_back({n + m + r, n, m, r});
  return t;
}

}  // namespace

TEST_CASE("toxicity exceedance probability") {
  for (int n = 0; n <= 4; ++n)
    for (int m = 0; m <= 4; ++m) CHECK(tox_exceed_prob(n, m, 0.3) == doctest::Approx(exceed(n, m, 0.3)).epsilon(1e-10));
}

TEST_CASE("Rule 1 excludes a toxic dose and every dose above") {
  auto st = safety_check(counts({{0, 3, 0}, {3, 0, 0}, {0, 0, 0}}), 0.3, 0.95);
  CHECK_FALSE(st.excluded[0]);
  CHECK(st.excluded[1]);
  CHECK(st.excluded[2]);
  CHECK(st.highest_open == 1);
  CHECK_FALSE(st.terminated);
}

TEST_CASE("Rule 1 needs three assessed patients") {
  auto st = safety_check(counts({{2, 0, 1}}), 0.3, 0.95);
  CHECK_FALSE(st.excluded[0]);
}

TEST_CASE("Rule 2 terminates when the lowest dose is toxic with nothing pending") {
  auto st = safety_check(counts({{3, 0, 0}, {0, 0, 0}}), 0.3, 0.95);
  CHECK(st.lowest_toxic);
  CHECK(st.terminated);
  CHECK(st.highest_open == 0);
}

TEST_CASE("Rule 2 suspends while outcomes are pending at the lowest dose and reopens") {
  auto st = safety_check(counts({{3, 0, 2}, {0, 0, 0}}), 0.3, 0.95);
  CHECK(st.suspended);
  CHECK_FALSE(st.terminated);
  // Both pending patients finish without DLT: Pr(p > 0.3 | 3, 2) drops below 0.95.
  CHECK(exceed(3, 2, 0.3) < 0.95);
  auto re = reopen_on_resolution(st, counts({{3, 2, 0}, {0, 0, 0}}), 0.3, 0.95);
  CHECK_FALSE(re.suspended);
  CHECK_FALSE(re.terminated);
  CHECK(re.highest_open >= 1);
  // Termination is permanent.
  auto done = safety_check(counts({{3, 0, 0}}), 0.3, 0.95);
  auto still = reopen_on_resolution(done, counts({{3, 5, 0}}), 0.3, 0.95);
  CHECK(still.terminated);
}

TEST_CASE("Rule 3 blocks escalation until one non-DLT is assessed at the current dose") {
  auto up = Decision::escalate(2, 5);
  CHECK(rule3_gate(up, 0, 2) == Decision::stay(2));
  CHECK(rule3_gate(up, 1, 2) == up);
  CHECK(rule3_gate(Decision::deescalate(2), 0, 2) == Decision::deescalate(2));
}

TEST_CASE("fixed suspension rule") {
  RuleConfig r;
  CHECK(fixed_suspension(2, 3, r));
  CHECK_FALSE(fixed_suspension(1, 3, r));
  CHECK_FALSE(fixed_suspension(3, 6, r));
  r.fixed_c = 0;
  CHECK(fixed_suspension(1, 6, r));
}

TEST_CASE("probability suspension versions") {
  PodDistribution pod;
  pod.entries = {{1, 0.1, true, Decision::deescalate(2)}, {2, 0.3, true, Decision::stay(2)},
                 {3, 0.6, true, Decision::escalate(2, 5)}};
  pod.chosen = 3;
  RuleConfig r;
  r.suspension = SuspensionKind::Probability;
  r.q = 0.0;
  CHECK(prob_suspension(pod, r, 2));
  r.q = 0.5;
  CHECK_FALSE(prob_suspension(pod, r, 2));
  r.q = 0.35;
  CHECK(prob_suspension(pod, r, 2));
  r.prob_version = 2;
  CHECK(prob_suspension(pod, r, 2));
  r.prob_version = 3;
  r.q_escalate = 0.45;
  CHECK_FALSE(prob_suspension(pod, r, 2));
  r.q_escalate = 0.3;
  CHECK(prob_suspension(pod, r, 2));
  r.prob_version = 4;
  CHECK_THROWS_AS(prob_suspension(pod, r, 2), InputError);
}

TEST_CASE("incompatibility classes") {
  CHECK(classify_incompatibility(2, 1, 2) == Incompatibility::DS);
  CHECK(classify_incompatibility(3, 1, 2) == Incompatibility::DE);
  CHECK(classify_incompatibility(3, 2, 2) == Incompatibility::SE);
  CHECK(classify_incompatibility(1, 2, 2) == Incompatibility::SD);
  CHECK(classify_incompatibility(1, 3, 2) == Incompatibility::ED);
  CHECK(classify_incompatibility(2, 3, 2) == Incompatibility::ES);
  CHECK(classify_incompatibility(3, 3, 2) == Incompatibility::None);
}

TEST_CASE("audit replays decisions with resolved outcomes") {
  DesignConfig c;
  c.engine = "mtpi2";
  c.grid.target = 0.3;
  c.grid.J = 5;
  auto base = make_engine(c);
  // Three at dose 2, all with late DLTs; the executed decision escalated anyway.
  std::vector<PatientRecord> pts = {{1, 1, 0.0, std::nullopt}, {2, 1, 0.0, std::nullopt}, {3, 1, 0.0, std::nullopt},
                                    {4, 2, 30.0, 20.0},         {5, 2, 31.0, 20.0},         {6, 2, 32.0, 20.0}};
  std::vector<DecisionEvent> ev = {{35.0, 2, 3, 6}};
  auto a = incompatibility_audit(*base, ev, pts, 28.0);
  CHECK(a.decisions == 1);
  CHECK(a.de == 1);
}

TEST_CASE("coherence monitors") {
  std::vector<EngineEval> ev = {{0, 2, 3, {0, 0, 0}}, {1, 3, 2, {0, 0, 0}}, {2, 2, 1, {0, 1, 0}}};
  CHECK(coherence_violations(ev) == 1);
  CHECK(interval_coherence_violations(ev) == 0);
  std::vector<EngineEval> ev2 = {{0, 2, 3, {0, 0, 0}}, {1, 2, 2, {1, 0, 0}}};
  CHECK(coherence_violations(ev2) == 0);
  CHECK(interval_coherence_violations(ev2) == 1);
}

TEST_CASE("rule config defaults and validation") {
  CHECK(RuleConfig::defaults_for("mtpi2").suspension == SuspensionKind::Complete);
  CHECK(RuleConfig::defaults_for("tite-boin").suspension == SuspensionKind::Fixed);
  CHECK(RuleConfig::defaults_for("pod-tpi").suspension == SuspensionKind::Probability);
  RuleConfig r;
  r.nu = 1.5;
  CHECK_THROWS_AS(r.validate(), InputError);
  nlohmann::json j = RuleConfig::defaults_for("pod-tpi");
  auto back = j.get<RuleConfig>();
  CHECK(back.suspension == SuspensionKind::Probability);
  CHECK_THROWS_AS(parse_suspension_kind("sometimes"), InputError);
}

TEST_CASE("recommendation waits for all outcomes under the complete rule") {
  DesignConfig c;
  c.engine = "mtpi2";
  c.grid.J = 5;
  auto eng = make_engine(c);
  auto s = testing::make_snapshot({{1, false}, {1, false}}, {{1, 10.0}});
  auto rec = recommend(*eng, s, 1, RuleConfig::defaults_for("mtpi2"), 1);
  CHECK(rec.suspended);
  CHECK_FALSE(rec.decision.enrolls());
}

TEST_CASE("turning exclusion off disables Rules 1 and 2") {
  RuleConfig r = RuleConfig::defaults_for("tite-tpi");
  CHECK(r.effective_nu() == r.nu);
  r.exclusion = false;
  auto st = safety_check(counts({{3, 0, 0}, {0, 0, 0}}), 0.3, r.effective_nu());
  CHECK_FALSE(st.terminated);
  CHECK_FALSE(st.excluded[0]);
  nlohmann::json j = r;
  CHECK_FALSE(j.get<RuleConfig>().exclusion);
}
