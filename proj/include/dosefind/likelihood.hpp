#pragma once

#include <vector>

#include "dosefind/tox_model.hpp"
#include "dosefind/trial_core.hpp"

namespace dosefind {

// p_1..p_J, indexed by dose minus one. Monotonicity is not enforced here.
using ToxProbVector = std::vector<double>;

struct CompleteOutcome {
  int dose = 1;
  bool dlt = false;
};

// -inf when a probability of 0 or 1 contradicts the data.
double complete_loglik(const ToxProbVector& p, const std::vector<CompleteOutcome>& y);

// Assessed non-DLT patients contribute log(1 - p) under every time model.
double survival_loglik(const ToxProbVector& p, const WeightModel& model, const Snapshot& s);

// y_mis lists one 0/1 value per pending patient in snapshot order.
double augmented_loglik(const ToxProbVector& p, const WeightModel& model, const std::vector<int>& y_mis,
                        const Snapshot& s);

// Pr(Y = 1 | T > v) for a pending patient with weight rho.
double pending_dlt_prob(double p, double rho);

}  // namespace dosefind
