#include <doctest.h>

#include <cmath>

#include "dosefind/inference.hpp"
#include "dosefind/numeric.hpp"
#include "test_helpers.hpp"

using namespace dosefind;

namespace {

// I_x(a, b) for integer a, b as a binomial tail.
double ibeta_int(int a, int b, double x) {
  int n = a + b - 1;
  double s = 0.0;
  for (int k = a; k <= n; ++k) s += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)) *
                                    std::pow(x, k) * std::pow(1.0 - x, n - k);
  return s;
}

}  // namespace

TEST_CASE("incomplete beta agrees with the binomial tail identity") {
  for (int a = 1; a <= 6; ++a)
    for (int b = 1; b <= 6; ++b)
      for (double x : {0.05, 0.2, 0.35, 0.6, 0.9}) CHECK(ibeta(a, b, x) == doctest::Approx(ibeta_int(a, b, x)).epsilon(1e-10));
  CHECK(beta_mass(2, 3, 0.1, 0.4) == doctest::Approx(ibeta_int(2, 3, 0.4) - ibeta_int(2, 3, 0.1)));
}

TEST_CASE("Poisson binomial and elementary symmetric polynomials") {
  auto pk = poisson_binomial({0.5, 0.2, 0.1});
  REQUIRE(pk.size() == 4);
  CHECK(pk[0] == doctest::Approx(0.5 * 0.8 * 0.9));
  CHECK(pk[3] == doctest::Approx(0.5 * 0.2 * 0.1));
  auto le = log_elementary_symmetric({1.0, 2.0, 3.0});
  CHECK(std::exp(le[0]) == doctest::Approx(1.0));
  CHECK(std::exp(le[1]) == doctest::Approx(6.0));
  CHECK(std::exp(le[2]) == doctest::Approx(11.0));
  CHECK(std::exp(le[3]) == doctest::Approx(6.0));
}

TEST_CASE("closed-form MLE with one pending patient at half the window") {
  auto s = testing::make_snapshot({{1, true}, {1, false}}, {{1, 14.0}});
  const double want = (3.0 - std::sqrt(3.0)) / 3.0;
  auto em = em_mle(s, TimeModelSpec::uniform(), 1);
  auto sc = score_mle(s, TimeModelSpec::uniform(), 1);
  CHECK(em.converged);
  CHECK(std::fabs(em.p[0] - want) < 1e-8);
  CHECK(std::fabs(sc.p[0] - want) < 1e-10);
  for (std::size_t i = 1; i < em.trace.size(); ++i) CHECK(em.trace[i] >= em.trace[i - 1] - 1e-12);
  CHECK(score_root(1, 1, {0.5}) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("score root at the boundaries") {
  CHECK(score_root(0, 3, {0.4}) == doctest::Approx(0.0));
  CHECK(score_root(2, 0, {}) == doctest::Approx(1.0));
}

TEST_CASE("EM with a learned time model increases the observed likelihood") {
  auto s = testing::make_snapshot({{1, true}, {1, false}, {2, true}, {2, false}}, {{1, 5.0}, {2, 20.0}, {2, 3.0}}, 28.0,
                                  4.0);
  auto r = em_mle(s, TimeModelSpec::piecewise_uniform(3), 2);
  REQUIRE(r.trace.size() >= 2);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] >= r.trace[i - 1] - 1e-9);
}

TEST_CASE("Beta prior posterior mean and interval probabilities") {
  auto pr = PPrior::beta(1.0, 1.0);
  CHECK(pr.posterior_mean(2, 3) == doctest::Approx(3.0 / 7.0));
  auto ip = interval_probs(3.0, 4.0, {0.0, 0.25, 0.35, 1.0});
  CHECK(ip[0] == doctest::Approx(ibeta_int(3, 4, 0.25)));
  CHECK(ip[1] == doctest::Approx(ibeta_int(3, 4, 0.35) - ibeta_int(3, 4, 0.25)));
  CHECK(ip[0] + ip[1] + ip[2] == doctest::Approx(1.0));
}

TEST_CASE("samplers recover the complete-data Beta posterior when nothing is pending") {
  auto s = testing::make_snapshot({{1, true}, {1, false}, {1, false}, {2, true}, {2, true}, {2, false}}, {});
  std::vector<PPrior> pri(2, PPrior::beta(1.0, 1.0));
  SamplerOptions opt;
  opt.iters = 6000;
  opt.seed = 5;
  auto a = imh_sample(pri, s, TimeModelSpec::uniform(), 2, opt);
  auto b = da_sample(pri, s, TimeModelSpec::uniform(), 2, opt);
  CHECK(a.mean()[0] == doctest::Approx(2.0 / 5.0).epsilon(0.05));
  CHECK(a.mean()[1] == doctest::Approx(3.0 / 5.0).epsilon(0.05));
  CHECK(b.mean()[0] == doctest::Approx(2.0 / 5.0).epsilon(0.05));
  CHECK(b.mean()[1] == doctest::Approx(3.0 / 5.0).epsilon(0.05));
}

TEST_CASE("IMH and DA agree with pending outcomes and a learned time model") {
  auto s = testing::make_snapshot({{1, false}, {1, true}, {2, false}}, {{1, 6.0}, {2, 18.0}, {2, 2.0}}, 28.0, 5.0);
  std::vector<PPrior> pri(2, PPrior::beta(0.5, 0.5));
  SamplerOptions opt;
  opt.iters = 8000;
  opt.seed = 9;
  auto a = imh_sample(pri, s, TimeModelSpec::piecewise_uniform(3), 2, opt);
  opt.seed = 10;
  auto b = da_sample(pri, s, TimeModelSpec::piecewise_uniform(3), 2, opt);
  auto ma = a.mean(), mb = b.mean(), sa = a.mc_se(), sb = b.mc_se();
  for (int z = 0; z < 2; ++z) CHECK(std::fabs(ma[z] - mb[z]) <= 4.0 * std::hypot(sa[z], sb[z]));
}

TEST_CASE("piecewise prior matches a Beta prior written on a fine grid") {
  std::vector<double> edges, masses;
  const int K = 400;
  for (int k = 0; k <= K; ++k) edges.push_back(static_cast<double>(k) / K);
  for (int k = 0; k < K; ++k) masses.push_back(1.0 / K);
  auto pw = PPrior::piecewise(edges, masses);
  CHECK(pw.posterior_mean(2, 5) == doctest::Approx(3.0 / 9.0).epsilon(1e-3));
}
