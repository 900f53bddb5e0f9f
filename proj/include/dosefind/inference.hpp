#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dosefind/numeric.hpp"
#include "dosefind/tox_model.hpp"
#include "dosefind/trial_core.hpp"

namespace dosefind {

struct DoseData {
  int n = 0;
  int m = 0;
  std::vector<double> pending_v;  // follow-up of pending patients
};

struct ObservedData {
  double window = 28.0;
  std::vector<DoseData> doses;     // indexed by dose minus one
  std::vector<double> dlt_times;   // observed DLT times, all doses
};

ObservedData observe(const Snapshot& s, int J);

// Prior on one toxicity probability: Beta(a, b), or a piecewise constant
// density over a partition of [0, 1].
class PPrior {
 public:
  static PPrior beta(double a, double b);
  // masses[j] is the prior probability of (edges[j], edges[j+1]]
  static PPrior piecewise(std::vector<double> edges, std::vector<double> masses);

  bool is_beta() const { return edges_.empty(); }
  double a() const { return a_; }
  double b() const { return b_; }

  // log of the integral of prior(p) p^x (1-p)^y over [lo, hi]
  double log_mass(double x, double y, double lo = 0.0, double hi = 1.0) const;
  double log_marginal(double x, double y) const { return log_mass(x, y); }
  double posterior_mean(double x, double y) const;
  // Posterior probabilities of the intervals (edges[j], edges[j+1]].
  std::vector<double> interval_probs(double x, double y, const std::vector<double>& edges) const;
  double draw(Rng& rng, double x, double y) const;

 private:
  double a_ = 1.0, b_ = 1.0;
  std::vector<double> edges_;
  std::vector<double> log_density_;
};

// Exact Beta interval probabilities; edges must start at 0, end at 1 and increase.
std::vector<double> interval_probs(double a, double b, const std::vector<double>& edges);
// Fraction of draws falling in each interval.
std::vector<double> interval_probs(const std::vector<double>& draws, const std::vector<double>& edges);

struct PosteriorDraws {
  std::vector<std::vector<double>> p;   // draw-major, J entries each
  std::vector<std::vector<double>> xi;
  double acceptance = 1.0;

  std::size_t size() const { return p.size(); }
  std::vector<double> mean() const;
  // batch-means Monte Carlo standard error per dose
  std::vector<double> mc_se(int batches = 40) const;
  // effective sample size per dose from the batch-means variance
  std::vector<double> ess(int batches = 40) const;
};

struct SamplerOptions {
  int iters = 4000;
  int burn = 1000;
  std::uint64_t seed = 1;
};

// priors holds one prior per dose.
PosteriorDraws imh_sample(const std::vector<PPrior>& priors, const Snapshot& s, const TimeModelSpec& tox, int J,
                          const SamplerOptions& opt);
PosteriorDraws da_sample(const std::vector<PPrior>& priors, const Snapshot& s, const TimeModelSpec& tox, int J,
                         const SamplerOptions& opt);

struct MleResult {
  std::vector<double> p;
  std::vector<double> xi;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // observed-data log-likelihood per iteration
};

struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what, MleResult last) : std::runtime_error(what), last(std::move(last)) {}
  MleResult last;
};

// Observed-data (survival) log-likelihood through the time model family.
double observed_loglik(const std::vector<double>& p, const std::vector<double>& xi, const ObservedData& d,
                       const TimeModel& tm);

// Root of n/p - m/(1-p) - sum rho_i/(1 - rho_i p) on [0, 1].
double score_root(int n, int m, const std::vector<double>& rho);

MleResult em_mle(const Snapshot& s, const TimeModelSpec& tox, int J, double tol = 1e-12, int max_iters = 20000);
MleResult score_mle(const Snapshot& s, const TimeModelSpec& tox, int J, double tol = 1e-12, int max_iters = 20000);

}  // namespace dosefind
