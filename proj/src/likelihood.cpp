#include "dosefind/likelihood.hpp"

#include <cmath>

namespace dosefind {

namespace {

double log_or_neginf(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

double prob_at(const ToxProbVector& p, int dose) {
  if (dose < 1 || dose > static_cast<int>(p.size())) throw InputError("dose index out of range");
  return p[dose - 1];
}

}  // namespace

double complete_loglik(const ToxProbVector& p, const std::vector<CompleteOutcome>& y) {
  double ll = 0.0;
  for (const auto& o : y) {
    double pz = prob_at(p, o.dose);
    ll += o.dlt ? log_or_neginf(pz) : log_or_neginf(1.0 - pz);
  }
  return ll;
}

double survival_loglik(const ToxProbVector& p, const WeightModel& model, const Snapshot& s) {
  double ll = 0.0;
  for (const auto& pt : s.patients) {
    double pz = prob_at(p, pt.dose);
    if (pt.dlt) {
      ll += log_or_neginf(pz) + std::log(model.density(pt.followup));
    } else if (pt.assessed) {
      ll += log_or_neginf(1.0 - pz);
    } else {
      ll += log_or_neginf(1.0 - model.weight(pt.followup) * pz);
    }
  }
  return ll;
}

double augmented_loglik(const ToxProbVector& p, const WeightModel& model, const std::vector<int>& y_mis,
                        const Snapshot& s) {
  if (static_cast<int>(y_mis.size()) != s.pending_count())
    throw InputError("y_mis length must equal the number of pending patients");
  double ll = 0.0;
  std::size_t j = 0;
  for (const auto& pt : s.patients) {
    double pz = prob_at(p, pt.dose);
    if (pt.dlt) {
      ll += log_or_neginf(pz) + std::log(model.density(pt.followup));
    } else if (pt.assessed) {
      ll += log_or_neginf(1.0 - pz);
    } else if (y_mis[j++]) {
      ll += log_or_neginf(pz) + log_or_neginf(1.0 - model.weight(pt.followup));
    } else {
      ll += log_or_neginf(1.0 - pz);
    }
  }
  return ll;
}

double pending_dlt_prob(double p, double rho) {
  double num = (1.0 - rho) * p;
  double den = num + (1.0 - p);
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace dosefind
