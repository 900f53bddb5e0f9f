#pragma once

#include <cstdint>
#include <vector>

#include "dosefind/inference.hpp"

namespace dosefind {

// Power model p_z = s_z^exp(α) with α ~ N(0, sigma^2).
struct CrmCurve {
  std::vector<double> skeleton;
  double sigma = 1.34;

  void validate() const;
};

// Skeleton with the prior MTD at dose nu (1-based) and indifference halfwidth.
std::vector<double> crm_skeleton(int J, double target, double halfwidth = 0.05, int nu = 0);

// Deterministic quadrature over α on [-6σ, 6σ].
class CrmGrid {
 public:
  explicit CrmGrid(const CrmCurve& curve, int points = 512);

  int size() const { return G_; }
  int doses() const { return J_; }
  double alpha(int g) const { return alpha_[g]; }
  double phi(int z, int g) const { return phi_[static_cast<std::size_t>(z) * G_ + g]; }
  double log_phi(int z, int g) const { return lphi_[static_cast<std::size_t>(z) * G_ + g]; }
  double log_1m_phi(int z, int g) const { return l1phi_[static_cast<std::size_t>(z) * G_ + g]; }

  // Log posterior weights (unnormalised) given complete counts per dose.
  void log_post_counts(const std::vector<int>& n, const std::vector<int>& m, std::vector<double>& out) const;
  // Adds log(1 - rho phi_z) for a pending patient at dose z (0-based).
  void add_pending(int z, double rho, std::vector<double>& lw) const;
  // Posterior means of phi_z from log weights.
  std::vector<double> means(const std::vector<double>& lw) const;

 private:
  int J_, G_;
  std::vector<double> alpha_, log_prior_, phi_, lphi_, l1phi_;
};

struct CrmPosterior {
  std::vector<double> phat;
  std::vector<double> alpha_draws;
  double ess = 0.0;  // importance-sampling ESS over time-model draws
};

struct CrmOptions {
  int xi_draws = 128;
  int alpha_draws = 0;       // draws of α to return
  bool mcmc = false;         // random-walk path instead of quadrature
  int iters = 4000;
  int burn = 1000;
  std::uint64_t seed = 1;
};

CrmPosterior crm_posterior(const CrmGrid& grid, const Snapshot& s, const TimeModelSpec& tox, const CrmOptions& opt);
CrmPosterior crm_posterior(const CrmCurve& curve, const Snapshot& s, const TimeModelSpec& tox,
                           const CrmOptions& opt);

}  // namespace dosefind
