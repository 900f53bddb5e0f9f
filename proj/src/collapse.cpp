#include "dosefind/collapse.hpp"

#include <algorithm>
#include <cmath>

#include "dosefind/likelihood.hpp"

namespace dosefind {

CountPrior::CountPrior(PPrior prior, std::vector<double> edges, int cache_n)
    : prior_(std::move(prior)), edges_(std::move(edges)), cache_n_(std::max(0, cache_n)) {
  const std::size_t size = static_cast<std::size_t>(cache_n_ + 1) * (cache_n_ + 2) / 2;
  lmarg_.resize(size);
  means_.resize(size);
  if (!edges_.empty()) probs_.resize(size);
  for (int x = 0; x <= cache_n_; ++x)
    for (int y = 0; x + y <= cache_n_; ++y) {
      std::size_t i = index(x, y);
      lmarg_[i] = prior_.log_marginal(x, y);
      means_[i] = prior_.posterior_mean(x, y);
      if (!edges_.empty()) probs_[i] = prior_.interval_probs(x, y, edges_);
    }
}

std::size_t CountPrior::index(int x, int y) const {
  // pairs ordered by total count t = x + y, then by x
  int t = x + y;
  return static_cast<std::size_t>(t) * (t + 1) / 2 + x;
}

double CountPrior::log_marginal(int x, int y) const {
  if (x + y <= cache_n_) return lmarg_[index(x, y)];
  return prior_.log_marginal(x, y);
}

double CountPrior::mean(int x, int y) const {
  if (x + y <= cache_n_) return means_[index(x, y)];
  return prior_.posterior_mean(x, y);
}

std::vector<double> CountPrior::interval_probs(int x, int y) const {
  if (edges_.empty()) throw InputError("prior has no partition");
  if (x + y <= cache_n_) return probs_[index(x, y)];
  return prior_.interval_probs(x, y, edges_);
}

namespace {

std::vector<double> plugin_probs(const DoseData& dd, double p, const TimeModel& tm, const std::vector<double>& xi) {
  std::vector<double> q;
  q.reserve(dd.pending_v.size());
  for (double v : dd.pending_v) q.push_back(pending_dlt_prob(p, tm.weight(v, xi)));
  return poisson_binomial(q);
}

}  // namespace

PendingPosterior collapse_pending(const ObservedData& d, const TimeModel& tm, const CountPrior& prior,
                                  const CollapseOptions& opt) {
  const std::size_t J = d.doses.size();
  PendingPosterior out;
  out.k_probs.resize(J);
  std::vector<std::size_t> active;
  for (std::size_t z = 0; z < J; ++z) {
    if (d.doses[z].pending_v.empty()) out.k_probs[z] = {1.0};
    else active.push_back(z);
  }
  if (active.empty()) return out;

  if (opt.plugin) {
    const std::vector<double>& xi = opt.plugin_xi.empty() ? tm.point() : opt.plugin_xi;
    for (std::size_t z : active) {
      const auto& dd = d.doses[z];
      std::vector<double> rho;
      for (double v : dd.pending_v) rho.push_back(tm.weight(v, xi));
      out.k_probs[z] = plugin_probs(dd, score_root(dd.n, dd.m, rho), tm, xi);
    }
    return out;
  }

  // log integrals of the prior against p^(n+k) (1-p)^(m+r-k)
  std::vector<std::vector<double>> L(J);
  for (std::size_t z : active) {
    const auto& dd = d.doses[z];
    int r = static_cast<int>(dd.pending_v.size());
    L[z].resize(r + 1);
    for (int k = 0; k <= r; ++k) L[z][k] = prior.log_marginal(dd.n + k, dd.m + r - k);
  }

  auto dose_terms = [&](std::size_t z, const std::vector<double>& xi, std::vector<double>& lu) {
    const auto& dd = d.doses[z];
    std::vector<double> w;
    w.reserve(dd.pending_v.size());
    for (double v : dd.pending_v) w.push_back(1.0 - tm.weight(v, xi));
    lu = log_elementary_symmetric(w);
    for (std::size_t k = 0; k < lu.size(); ++k) lu[k] += L[z][k];
    return log_sum_exp(lu);
  };

  std::vector<double> lu;
  if (!tm.learned()) {
    for (std::size_t z : active) {
      double zn = dose_terms(z, tm.point(), lu);
      auto& kp = out.k_probs[z];
      kp.resize(lu.size());
      for (std::size_t k = 0; k < lu.size(); ++k) kp[k] = std::exp(lu[k] - zn);
    }
    return out;
  }

  // self-normalised importance sampling over ξ from its complete-case posterior
  Rng rng = make_rng(opt.seed, 29);
  const int S = std::max(1, opt.xi_draws);
  std::vector<double> logw(S);
  std::vector<std::vector<std::vector<double>>> cond(S, std::vector<std::vector<double>>(J));
  std::vector<double> xi;
  for (int s = 0; s < S; ++s) {
    tm.draw_complete_case(rng, xi);
    double lw = 0.0;
    for (std::size_t z : active) {
      double zn = dose_terms(z, xi, lu);
      lw += zn;
      auto& c = cond[s][z];
      c.resize(lu.size());
      for (std::size_t k = 0; k < lu.size(); ++k) c[k] = std::exp(lu[k] - zn);
    }
    logw[s] = lw;
  }
  double mx = *std::max_element(logw.begin(), logw.end());
  double sw = 0.0, sw2 = 0.0;
  for (double& v : logw) {
    v = std::exp(v - mx);
    sw += v;
    sw2 += v * v;
  }
  for (std::size_t z : active) {
    auto& kp = out.k_probs[z];
    kp.assign(d.doses[z].pending_v.size() + 1, 0.0);
    for (int s = 0; s < S; ++s)
      for (std::size_t k = 0; k < kp.size(); ++k) kp[k] += logw[s] / sw * cond[s][z][k];
  }
  out.ess = sw * sw / sw2;
  return out;
}

std::vector<double> mixture_interval_probs(const CountPrior& prior, const DoseData& dd,
                                           const std::vector<double>& k_probs) {
  const int r = static_cast<int>(k_probs.size()) - 1;
  std::vector<double> out;
  for (int k = 0; k <= r; ++k) {
    if (k_probs[k] <= 0.0) continue;
    auto pr = prior.interval_probs(dd.n + k, dd.m + r - k);
    if (out.empty()) out.assign(pr.size(), 0.0);
    for (std::size_t j = 0; j < pr.size(); ++j) out[j] += k_probs[k] * pr[j];
  }
  if (out.empty()) out = prior.interval_probs(dd.n, dd.m + r);
  return out;
}

double mixture_mean(const CountPrior& prior, const DoseData& dd, const std::vector<double>& k_probs) {
  const int r = static_cast<int>(k_probs.size()) - 1;
  double m = 0.0;
  for (int k = 0; k <= r; ++k) m += k_probs[k] * prior.mean(dd.n + k, dd.m + r - k);
  return m;
}

}  // namespace dosefind
