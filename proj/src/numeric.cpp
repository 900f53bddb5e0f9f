#include "dosefind/numeric.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/beta.hpp>

namespace dosefind {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

double log_sum_exp(const std::vector<double>& x) {
  double mx = kNegInf;
  for (double v : x) mx = std::max(mx, v);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

double lbeta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(a, b, x);
}

double beta_mass(double a, double b, double lo, double hi) {
  lo = std::max(lo, 0.0);
  hi = std::min(hi, 1.0);
  if (hi <= lo) return 0.0;
  // use the upper tail when the interval sits above the mean to keep precision
  if (lo > a / (a + b)) {
    double ulo = lo <= 0.0 ? 1.0 : boost::math::ibetac(a, b, lo);
    double uhi = hi >= 1.0 ? 0.0 : boost::math::ibetac(a, b, hi);
    return std::max(ulo - uhi, 0.0);
  }
  return std::max(ibeta(a, b, hi) - ibeta(a, b, lo), 0.0);
}

double log_beta_mass(double a, double b, double lo, double hi) {
  double m = beta_mass(a, b, lo, hi);
  return m > 0.0 ? std::log(m) : kNegInf;
}

std::vector<double> log_elementary_symmetric(const std::vector<double>& w) {
  std::vector<double> e(w.size() + 1, kNegInf);
  e[0] = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    double lw = w[i] > 0.0 ? std::log(w[i]) : kNegInf;
    for (std::size_t k = i + 1; k >= 1; --k) e[k] = log_add(e[k], e[k - 1] + lw);
  }
  return e;
}

std::vector<double> poisson_binomial(const std::vector<double>& q) {
  std::vector<double> pr(q.size() + 1, 0.0);
  pr[0] = 1.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t k = i + 1; k >= 1; --k) pr[k] = pr[k] * (1.0 - q[i]) + pr[k - 1] * q[i];
    pr[0] *= 1.0 - q[i];
  }
  return pr;
}

double draw_gamma(Rng& rng, double shape, double rate) {
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(rng);
}

double draw_beta(Rng& rng, double a, double b) {
  double x = draw_gamma(rng, a);
  double y = draw_gamma(rng, b);
  double s = x + y;
  if (s <= 0.0) return a / (a + b);
  return x / s;
}

void draw_dirichlet(Rng& rng, const std::vector<double>& alpha, std::vector<double>& out) {
  out.resize(alpha.size());
  double s = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    out[k] = draw_gamma(rng, alpha[k]);
    s += out[k];
  }
  if (s <= 0.0) {
    double t = 0.0;
    for (double a : alpha) t += a;
    for (std::size_t k = 0; k < alpha.size(); ++k) out[k] = alpha[k] / t;
    return;
  }
  for (double& v : out) v /= s;
}

double draw_uniform(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng);
}

double clip_prob(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }

}  // namespace dosefind
