#pragma once

#include <string>
#include <vector>

#include "dosefind/trial_core.hpp"

namespace dosefind {

enum class IntervalLabel { E, S, D };

// Sub-intervals of [0, 1] from left to right: E_0..E_K1, S, D_1..D_K2, D_0.
struct IntervalPartition {
  std::vector<double> edges;        // size = number of intervals + 1
  std::vector<IntervalLabel> label;
  std::vector<bool> boundary;       // E_0 and D_0 stubs
  int target = 0;                   // index of I_S

  static IntervalPartition build(double target, double eps1, double eps2);
  std::size_t size() const { return label.size(); }
};

// Where a point estimate falls in I_E = [0, p*-eps1), I_S, I_D = (p*+eps2, 1].
IntervalLabel classify(double x, const DoseGrid& g);

Decision label_decision(IntervalLabel l, int d, int J);

struct BoinBoundaries {
  double lambda_l = 0.0;
  double lambda_r = 0.0;
};

BoinBoundaries boin_boundaries(double target, double pl, double pr);
Decision boin_decide(double phat, const BoinBoundaries& b, int d, int J);

// Index of the interval with the highest score; ties favour S, then E, then D.
int argmax_label(const std::vector<double>& score, const IntervalPartition& part, bool skip_boundary = false);

// Posterior model probabilities Pr(M = k | n, m) for mTPI-2 under prior model masses.
std::vector<double> mtpi2_model_probs(int n, int m, const IntervalPartition& part, const std::vector<double>& prior);
Decision mtpi2_decide(int n, int m, const IntervalPartition& part, const std::vector<double>& prior, int d, int J);

// Beta(1 + n, 1 + m) key masses.
std::vector<double> keyboard_key_probs(int n, int m, const IntervalPartition& part);
Decision keyboard_decide(int n, int m, const IntervalPartition& part, int d, int J);

// Argmin |p_z - p*| (lower dose on ties), at most one level above d.
Decision crm_decide(const std::vector<double>& phat, double target, int d);

// x plays the role of n_d / N_d, y of (n_d - 1) / N_d.
Decision i3_rule(double x, double y, const DoseGrid& g, int d);
Decision i3_decide(int n, int N, const DoseGrid& g, int d);

struct SpmModel {
  std::vector<double> kappa;                // prior on the MTD location
  double c = 2.0;
  std::vector<std::vector<double>> theta;   // theta[gamma][z], prior modes

  static SpmModel from_skeleton(const std::vector<double>& skeleton, const DoseGrid& g, double c = 2.0,
                                std::vector<double> kappa = {});
  void validate(const DoseGrid& g) const;
};

class SpmPosterior {
 public:
  SpmPosterior(const SpmModel& model, const DoseGrid& g);

  // log of the marginal of (x DLTs, y non-DLTs) at dose z (0-based) when the MTD is gamma (0-based)
  double log_marginal(int z, int gamma, double x, double y) const;
  // Posterior over gamma from complete counts.
  std::vector<double> gamma_probs(const std::vector<int>& n, const std::vector<int>& m) const;
  const SpmModel& model() const { return model_; }
  const DoseGrid& grid() const { return grid_; }

 private:
  SpmModel model_;
  DoseGrid grid_;
  std::vector<double> lo_, hi_;  // interval per relation (below, at, above)
  std::vector<std::vector<double>> a_, b_, lnorm_;
};

Decision spm_decide(const std::vector<double>& gamma_probs, int d);

}  // namespace dosefind
