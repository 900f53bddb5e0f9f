#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace dosefind {

using Rng = std::mt19937_64;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Independent stream derived from a base seed and a stream label.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

double log_add(double a, double b);
double log_sum_exp(const std::vector<double>& x);

double lbeta(double a, double b);

// Regularized incomplete beta I_x(a, b).
double ibeta(double a, double b, double x);
// Beta(a, b) probability of (lo, hi].
double beta_mass(double a, double b, double lo, double hi);
double log_beta_mass(double a, double b, double lo, double hi);

// log e_k(w_1..w_r) for k = 0..r, computed in the log domain.
std::vector<double> log_elementary_symmetric(const std::vector<double>& w);

// Pr(K = k) for a sum of independent Bernoulli(q_i).
std::vector<double> poisson_binomial(const std::vector<double>& q);

double draw_gamma(Rng& rng, double shape, double rate = 1.0);
double draw_beta(Rng& rng, double a, double b);
void draw_dirichlet(Rng& rng, const std::vector<double>& alpha, std::vector<double>& out);
double draw_uniform(Rng& rng);

double clip_prob(double p, double eps = 1e-12);

}  // namespace dosefind
