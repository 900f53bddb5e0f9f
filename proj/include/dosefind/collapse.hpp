#pragma once

#include <cstdint>
#include <vector>

#include "dosefind/inference.hpp"

namespace dosefind {

// Per-count quantities of one prior on p evaluated at integer (DLT, non-DLT)
// pairs; pairs with x + y <= cache_n are precomputed.
class CountPrior {
 public:
  CountPrior(PPrior prior, std::vector<double> edges, int cache_n = 72);

  const PPrior& prior() const { return prior_; }
  const std::vector<double>& edges() const { return edges_; }
  double log_marginal(int x, int y) const;
  double mean(int x, int y) const;
  // Posterior probabilities of the partition intervals.
  std::vector<double> interval_probs(int x, int y) const;

 private:
  std::size_t index(int x, int y) const;

  PPrior prior_;
  std::vector<double> edges_;
  int cache_n_;
  std::vector<double> lmarg_;
  std::vector<double> means_;
  std::vector<std::vector<double>> probs_;
};

// Pr(K_z = k | H): number of latent DLTs among the pending patients at each dose.
struct PendingPosterior {
  std::vector<std::vector<double>> k_probs;  // per dose, length r_z + 1
  double ess = 1.0;                          // importance-sampling ESS over time-model draws
};

struct CollapseOptions {
  int xi_draws = 256;
  std::uint64_t seed = 1;
  bool plugin = false;  // plug in the MLE instead of integrating over (p, ξ)
  std::vector<double> plugin_xi;  // time-model MLE for the plug-in path; empty means the point value
};

PendingPosterior collapse_pending(const ObservedData& d, const TimeModel& tm, const CountPrior& prior,
                                  const CollapseOptions& opt);

// Mixture over k of the interval probabilities at (n + k, m + r - k).
std::vector<double> mixture_interval_probs(const CountPrior& prior, const DoseData& dd, const std::vector<double>& k_probs);
double mixture_mean(const CountPrior& prior, const DoseData& dd, const std::vector<double>& k_probs);

}  // namespace dosefind
