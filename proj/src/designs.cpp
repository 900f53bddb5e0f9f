#include "dosefind/designs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dosefind/inference.hpp"
#include "dosefind/numeric.hpp"

namespace dosefind {

namespace {

constexpr double kEdgeTol = 1e-12;
constexpr double kTieTol = 1e-12;

int label_rank(IntervalLabel l) {
  switch (l) {
    case IntervalLabel::S: return 0;
    case IntervalLabel::E: return 1;
    case IntervalLabel::D: return 2;
  }
  return 3;
}

}  // namespace

IntervalPartition IntervalPartition::build(double target, double eps1, double eps2) {
  DoseGrid g;
  g.target = target;
  g.eps1 = eps1;
  g.eps2 = eps2;
  g.validate();
  const double w = eps1 + eps2;
  const double L = target - eps1, R = target + eps2;
  std::vector<double> left, right;
  for (int k = 0;; ++k) {
    double e = L - k * w;
    if (e <= kEdgeTol) break;
    left.push_back(e);
  }
  for (int k = 0;; ++k) {
    double e = R + k * w;
    if (e >= 1.0 - kEdgeTol) break;
    right.push_back(e);
  }
  IntervalPartition p;
  p.edges.push_back(0.0);
  for (auto it = left.rbegin(); it != left.rend(); ++it) p.edges.push_back(*it);
  for (double e : right) p.edges.push_back(e);
  p.edges.push_back(1.0);
  const std::size_t nE = left.size(), nI = p.edges.size() - 1;
  for (std::size_t j = 0; j < nI; ++j) {
    IntervalLabel l = j < nE ? IntervalLabel::E : (j == nE ? IntervalLabel::S : IntervalLabel::D);
    p.label.push_back(l);
    double len = p.edges[j + 1] - p.edges[j];
    bool stub = (j == 0 || j + 1 == nI) && l != IntervalLabel::S && len < w - 1e-9;
    p.boundary.push_back(stub);
  }
  p.target = static_cast<int>(nE);
  return p;
}

IntervalLabel classify(double x, const DoseGrid& g) {
  if (x < g.target - g.eps1 - kEdgeTol) return IntervalLabel::E;
  if (x > g.target + g.eps2 + kEdgeTol) return IntervalLabel::D;
  return IntervalLabel::S;
}

Decision label_decision(IntervalLabel l, int d, int J) {
  switch (l) {
    case IntervalLabel::E: return Decision::escalate(d, J);
    case IntervalLabel::S: return Decision::stay(d);
    case IntervalLabel::D: return Decision::deescalate(d);
  }
  return Decision::stay(d);
}

BoinBoundaries boin_boundaries(double target, double pl, double pr) {
  if (!(pl > 0.0 && pl < target && target < pr && pr < 1.0))
    throw InputError("BOIN needs 0 < pL < p* < pR < 1");
  BoinBoundaries b;
  b.lambda_l = std::log((1.0 - pl) / (1.0 - target)) / std::log(target * (1.0 - pl) / (pl * (1.0 - target)));
  b.lambda_r = std::log((1.0 - target) / (1.0 - pr)) / std::log(pr * (1.0 - target) / (target * (1.0 - pr)));
  return b;
}

Decision boin_decide(double phat, const BoinBoundaries& b, int d, int J) {
  if (phat <= b.lambda_l) return Decision::escalate(d, J);
  if (phat >= b.lambda_r) return Decision::deescalate(d);
  return Decision::stay(d);
}

int argmax_label(const std::vector<double>& score, const IntervalPartition& part, bool skip_boundary) {
  int best = -1;
  for (std::size_t j = 0; j < score.size(); ++j) {
    if (skip_boundary && part.boundary[j]) continue;
    if (best < 0) {
      best = static_cast<int>(j);
      continue;
    }
    double s = score[j], t = score[best];
    double tol = kTieTol * std::max(std::fabs(s), std::fabs(t));
    if (s > t + tol || (std::fabs(s - t) <= tol && label_rank(part.label[j]) < label_rank(part.label[best])))
      best = static_cast<int>(j);
  }
  return best;
}

std::vector<double> mtpi2_model_probs(int n, int m, const IntervalPartition& part, const std::vector<double>& prior) {
  std::vector<double> masses = prior.empty() ? std::vector<double>(part.size(), 1.0) : prior;
  if (masses.size() != part.size()) throw InputError("model prior must have one mass per sub-interval");
  return PPrior::piecewise(part.edges, masses).interval_probs(n, m, part.edges);
}

Decision mtpi2_decide(int n, int m, const IntervalPartition& part, const std::vector<double>& prior, int d, int J) {
  auto pr = mtpi2_model_probs(n, m, part, prior);
  return label_decision(part.label[argmax_label(pr, part)], d, J);
}

std::vector<double> keyboard_key_probs(int n, int m, const IntervalPartition& part) {
  return interval_probs(1.0 + n, 1.0 + m, part.edges);
}

Decision keyboard_decide(int n, int m, const IntervalPartition& part, int d, int J) {
  auto pr = keyboard_key_probs(n, m, part);
  return label_decision(part.label[argmax_label(pr, part, true)], d, J);
}

Decision crm_decide(const std::vector<double>& phat, double target, int d) {
  int best = 0;
  for (std::size_t z = 1; z < phat.size(); ++z)
    if (std::fabs(phat[z] - target) < std::fabs(phat[best] - target) - kTieTol) best = static_cast<int>(z);
  return Decision::assign(std::min(best + 1, d + 1));
}

Decision i3_rule(double x, double y, const DoseGrid& g, int d) {
  switch (classify(x, g)) {
    case IntervalLabel::E: return Decision::escalate(d, g.J);
    case IntervalLabel::S: return Decision::stay(d);
    case IntervalLabel::D:
      return classify(y, g) == IntervalLabel::E ? Decision::stay(d) : Decision::deescalate(d);
  }
  return Decision::stay(d);
}

Decision i3_decide(int n, int N, const DoseGrid& g, int d) {
  if (N < 1) throw InputError("i3+3 needs at least one patient at the current dose");
  return i3_rule(static_cast<double>(n) / N, static_cast<double>(n - 1) / N, g, d);
}

SpmModel SpmModel::from_skeleton(const std::vector<double>& skeleton, const DoseGrid& g, double c,
                                 std::vector<double> kappa) {
  const int J = static_cast<int>(skeleton.size());
  SpmModel m;
  m.c = c;
  m.kappa = kappa.empty() ? std::vector<double>(J, 1.0 / J) : std::move(kappa);
  const double lo = g.target - g.eps1, hi = g.target + g.eps2;
  m.theta.assign(J, std::vector<double>(J));
  for (int gam = 0; gam < J; ++gam) {
    double e = std::log(g.target) / std::log(skeleton[gam]);
    for (int z = 0; z < J; ++z) {
      double th = std::pow(skeleton[z], e);
      if (z < gam) th = std::min(th, 0.9 * lo);
      else if (z > gam) th = std::max(th, hi + 0.1 * (1.0 - hi));
      else th = g.target;
      m.theta[gam][z] = th;
    }
  }
  return m;
}

void SpmModel::validate(const DoseGrid& g) const {
  const std::size_t J = static_cast<std::size_t>(g.J);
  if (kappa.size() != J || theta.size() != J) throw InputError("SPM hyperparameters must match J");
  double s = std::accumulate(kappa.begin(), kappa.end(), 0.0);
  if (std::fabs(s - 1.0) > 1e-9) throw InputError("SPM kappa must sum to 1");
  for (double k : kappa)
    if (k < 0.0) throw InputError("SPM kappa must be non-negative");
  if (!(c >= 0.0)) throw InputError("SPM concentration must be non-negative");
  for (const auto& row : theta) {
    if (row.size() != J) throw InputError("SPM theta rows must have J entries");
    for (double t : row)
      if (!(t > 0.0 && t < 1.0)) throw InputError("SPM prior modes must lie in (0, 1)");
  }
}

SpmPosterior::SpmPosterior(const SpmModel& model, const DoseGrid& g) : model_(model), grid_(g) {
  model_.validate(g);
  lo_ = {0.0, g.target - g.eps1, g.target + g.eps2};
  hi_ = {g.target - g.eps1, g.target + g.eps2, 1.0};
  const int J = g.J;
  a_.assign(J, std::vector<double>(J));
  b_ = a_;
  lnorm_ = a_;
  for (int gam = 0; gam < J; ++gam)
    for (int z = 0; z < J; ++z) {
      double th = model_.theta[gam][z];
      double a = model_.c * th + 1.0, b = model_.c * (1.0 - th) + 1.0;
      int rel = z < gam ? 0 : (z == gam ? 1 : 2);
      a_[gam][z] = a;
      b_[gam][z] = b;
      lnorm_[gam][z] = lbeta(a, b) + log_beta_mass(a, b, lo_[rel], hi_[rel]);
    }
}

double SpmPosterior::log_marginal(int z, int gamma, double x, double y) const {
  if (x == 0.0 && y == 0.0) return 0.0;
  int rel = z < gamma ? 0 : (z == gamma ? 1 : 2);
  double a = a_[gamma][z] + x, b = b_[gamma][z] + y;
  return lbeta(a, b) + log_beta_mass(a, b, lo_[rel], hi_[rel]) - lnorm_[gamma][z];
}

std::vector<double> SpmPosterior::gamma_probs(const std::vector<int>& n, const std::vector<int>& m) const {
  const int J = grid_.J;
  std::vector<double> lp(J);
  for (int gam = 0; gam < J; ++gam) {
    double l = model_.kappa[gam] > 0.0 ? std::log(model_.kappa[gam]) : kNegInf;
    for (int z = 0; z < J && l != kNegInf; ++z) l += log_marginal(z, gam, n[z], m[z]);
    lp[gam] = l;
  }
  double zn = log_sum_exp(lp);
  for (double& v : lp) v = std::exp(v - zn);
  return lp;
}

Decision spm_decide(const std::vector<double>& gamma_probs, int d) {
  int best = 0;
  for (std::size_t g = 1; g < gamma_probs.size(); ++g)
    if (gamma_probs[g] > gamma_probs[best] * (1.0 + kTieTol)) best = static_cast<int>(g);
  return Decision::assign(std::min(best + 1, d + 1));
}

}  // namespace dosefind
