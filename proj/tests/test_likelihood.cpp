#include <doctest.h>

#include <cmath>
#include <random>

#include "dosefind/likelihood.hpp"
#include "dosefind/numeric.hpp"
#include "test_helpers.hpp"

using namespace dosefind;

namespace {

double brute_log_marginal(const ToxProbVector& p, const WeightModel& wm, const Snapshot& s) {
  int r = s.pending_count();
  std::vector<double> terms;
  for (int mask = 0; mask < (1 << r); ++mask) {
    std::vector<int> y(r);
    for (int i = 0; i < r; ++i) y[i] = (mask >> i) & 1;
    terms.push_back(augmented_loglik(p, wm, y, s));
  }
  double mx = -INFINITY;
  for (double t : terms) mx = std::max(mx, t);
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - mx);
  return mx + std::log(acc);
}

}  // namespace

TEST_CASE("complete log-likelihood is a product of Bernoulli terms") {
  std::vector<CompleteOutcome> y = {{1, true}, {1, false}, {2, false}};
  ToxProbVector p = {0.2, 0.4};
  CHECK(complete_loglik(p, y) == doctest::Approx(std::log(0.2) + std::log(0.8) + std::log(0.6)));
  CHECK(complete_loglik({0.0, 0.4}, y) == -INFINITY);
}

TEST_CASE("survival likelihood of one pending patient") {
  auto s = testing::make_snapshot({}, {{1, 7.0}});
  auto wm = WeightModel::uniform(28.0);
  CHECK(survival_loglik({0.4}, wm, s) == doctest::Approx(std::log(1.0 - 0.4 * 0.25)));
}

TEST_CASE("survival likelihood equals the log-sum over augmented completions") {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<WeightModel> models = {WeightModel::uniform(28.0),
                                     WeightModel::piecewise_uniform_equal({0.6, 0.3, 0.1}, 28.0),
                                     WeightModel::rescaled_beta(1.5, 2.5, 28.0)};
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<std::pair<int, bool>> assessed;
    std::vector<std::pair<int, double>> pending;
    for (int i = 0; i < 4; ++i) assessed.push_back({1 + static_cast<int>(u(g) * 3), u(g) < 0.3});
    for (int i = 0; i < 4; ++i) pending.push_back({1 + static_cast<int>(u(g) * 3), 0.5 + 27.0 * u(g)});
    auto s = testing::make_snapshot(assessed, pending, 28.0, 1.0 + 26.0 * u(g));
    ToxProbVector p = {0.05 + 0.3 * u(g), 0.1 + 0.4 * u(g), 0.2 + 0.6 * u(g)};
    const auto& wm = models[rep % models.size()];
    CHECK(std::fabs(survival_loglik(p, wm, s) - brute_log_marginal(p, wm, s)) < 1e-10);
  }
}

TEST_CASE("pending DLT probability") {
  CHECK(pending_dlt_prob(0.3, 0.0) == doctest::Approx(0.3));
  CHECK(pending_dlt_prob(0.3, 0.5) == doctest::Approx(0.15 / 0.85));
  CHECK(pending_dlt_prob(0.3, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("augmented likelihood requires one value per pending patient") {
  auto s = testing::make_snapshot({}, {{1, 7.0}, {1, 8.0}});
  CHECK_THROWS(augmented_loglik({0.3}, WeightModel::uniform(28.0), {1}, s));
}
