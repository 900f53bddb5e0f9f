#include "dosefind/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

#include "dosefind/likelihood.hpp"

namespace dosefind {

ObservedData observe(const Snapshot& s, int J) {
  ObservedData d;
  d.window = s.window;
  d.doses.resize(static_cast<std::size_t>(J));
  for (const auto& pt : s.patients) {
    if (pt.dose < 1 || pt.dose > J) throw InputError("dose index out of range");
    auto& dd = d.doses[pt.dose - 1];
    if (pt.dlt) {
      ++dd.n;
      d.dlt_times.push_back(pt.followup);
    } else if (pt.assessed) {
      ++dd.m;
    } else {
      dd.pending_v.push_back(pt.followup);
    }
  }
  return d;
}

PPrior PPrior::beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw InputError("Beta prior parameters must be positive");
  PPrior p;
  p.a_ = a;
  p.b_ = b;
  return p;
}

PPrior PPrior::piecewise(std::vector<double> edges, std::vector<double> masses) {
  if (edges.size() < 2 || masses.size() + 1 != edges.size()) throw InputError("piecewise prior needs K+1 edges");
  if (edges.front() != 0.0 || edges.back() != 1.0) throw InputError("piecewise prior must cover [0, 1]");
  double tot = 0.0;
  PPrior p;
  for (std::size_t j = 0; j < masses.size(); ++j) {
    if (!(edges[j + 1] > edges[j])) throw InputError("piecewise prior edges must increase");
    if (masses[j] < 0.0) throw InputError("piecewise prior masses must be non-negative");
    tot += masses[j];
  }
  if (!(tot > 0.0)) throw InputError("piecewise prior has no mass");
  for (std::size_t j = 0; j < masses.size(); ++j) {
    double g = masses[j] / tot / (edges[j + 1] - edges[j]);
    p.log_density_.push_back(g > 0.0 ? std::log(g) : kNegInf);
  }
  p.edges_ = std::move(edges);
  return p;
}

double PPrior::log_mass(double x, double y, double lo, double hi) const {
  if (is_beta()) return lbeta(a_ + x, b_ + y) - lbeta(a_, b_) + log_beta_mass(a_ + x, b_ + y, lo, hi);
  double acc = kNegInf;
  for (std::size_t j = 0; j + 1 < edges_.size(); ++j) {
    double l = std::max(lo, edges_[j]), h = std::min(hi, edges_[j + 1]);
    if (h <= l || log_density_[j] == kNegInf) continue;
    acc = log_add(acc, log_density_[j] + log_beta_mass(x + 1.0, y + 1.0, l, h));
  }
  return acc == kNegInf ? kNegInf : acc + lbeta(x + 1.0, y + 1.0);
}

double PPrior::posterior_mean(double x, double y) const {
  if (is_beta()) return (a_ + x) / (a_ + b_ + x + y);
  return std::exp(log_mass(x + 1.0, y) - log_mass(x, y));
}

std::vector<double> PPrior::interval_probs(double x, double y, const std::vector<double>& edges) const {
  std::vector<double> lm(edges.size() - 1);
  for (std::size_t j = 0; j + 1 < edges.size(); ++j) lm[j] = log_mass(x, y, edges[j], edges[j + 1]);
  double z = log_sum_exp(lm);
  std::vector<double> out(lm.size());
  for (std::size_t j = 0; j < lm.size(); ++j) out[j] = z == kNegInf ? 0.0 : std::exp(lm[j] - z);
  return out;
}

double PPrior::draw(Rng& rng, double x, double y) const {
  if (is_beta()) return draw_beta(rng, a_ + x, b_ + y);
  const double a = x + 1.0, b = y + 1.0;
  std::vector<double> lw(edges_.size() - 1);
  for (std::size_t j = 0; j + 1 < edges_.size(); ++j)
    lw[j] = log_density_[j] == kNegInf ? kNegInf : log_density_[j] + log_beta_mass(a, b, edges_[j], edges_[j + 1]);
  double z = log_sum_exp(lw);
  double u = draw_uniform(rng), acc = 0.0;
  std::size_t j = 0;
  for (; j + 1 < lw.size(); ++j) {
    acc += std::exp(lw[j] - z);
    if (u < acc) break;
  }
  double lo = edges_[j], hi = edges_[j + 1];
  double v = draw_uniform(rng);
  double mean = a / (a + b);
  if (lo > mean) {
    double clo = boost::math::ibetac(a, b, lo), chi = hi >= 1.0 ? 0.0 : boost::math::ibetac(a, b, hi);
    if (clo - chi <= 1e-300) return lo + v * (hi - lo);
    return std::clamp(boost::math::ibetac_inv(a, b, clo - v * (clo - chi)), lo, hi);
  }
  double flo = ibeta(a, b, lo), fhi = ibeta(a, b, hi);
  if (fhi - flo <= 1e-300) return lo + v * (hi - lo);
  return std::clamp(boost::math::ibeta_inv(a, b, flo + v * (fhi - flo)), lo, hi);
}

namespace {

void check_partition(const std::vector<double>& edges) {
  if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0)
    throw InputError("partition must start at 0 and end at 1");
  for (std::size_t j = 0; j + 1 < edges.size(); ++j)
    if (!(edges[j + 1] > edges[j])) throw InputError("partition intervals overlap or are empty");
}

}  // namespace

std::vector<double> interval_probs(double a, double b, const std::vector<double>& edges) {
  check_partition(edges);
  return PPrior::beta(a, b).interval_probs(0.0, 0.0, edges);
}

std::vector<double> interval_probs(const std::vector<double>& draws, const std::vector<double>& edges) {
  check_partition(edges);
  if (draws.empty()) throw InputError("no draws");
  std::vector<double> out(edges.size() - 1, 0.0);
  for (double p : draws) {
    auto it = std::lower_bound(edges.begin() + 1, edges.end(), p);
    std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - edges.begin()) - 1, out.size() - 1);
    out[j] += 1.0;
  }
  for (double& v : out) v /= static_cast<double>(draws.size());
  return out;
}

std::vector<double> PosteriorDraws::mean() const {
  if (p.empty()) return {};
  std::vector<double> m(p.front().size(), 0.0);
  for (const auto& d : p)
    for (std::size_t z = 0; z < m.size(); ++z) m[z] += d[z];
  for (double& v : m) v /= static_cast<double>(p.size());
  return m;
}

std::vector<double> PosteriorDraws::mc_se(int batches) const {
  if (p.empty()) return {};
  const std::size_t J = p.front().size();
  const std::size_t B = static_cast<std::size_t>(std::max(2, batches));
  const std::size_t len = std::max<std::size_t>(1, p.size() / B);
  const std::size_t nb = p.size() / len;
  std::vector<double> out(J, 0.0);
  for (std::size_t z = 0; z < J; ++z) {
    std::vector<double> bm(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t i = b * len; i < (b + 1) * len; ++i) bm[b] += p[i][z];
      bm[b] /= static_cast<double>(len);
    }
    double mu = std::accumulate(bm.begin(), bm.end(), 0.0) / static_cast<double>(nb);
    double ss = 0.0;
    for (double v : bm) ss += (v - mu) * (v - mu);
    out[z] = nb > 1 ? std::sqrt(ss / static_cast<double>(nb - 1) / static_cast<double>(nb)) : 0.0;
  }
  return out;
}

std::vector<double> PosteriorDraws::ess(int batches) const {
  auto se = mc_se(batches);
  auto mu = mean();
  std::vector<double> out(se.size(), 0.0);
  for (std::size_t z = 0; z < se.size(); ++z) {
    double var = 0.0;
    for (const auto& d : p) var += (d[z] - mu[z]) * (d[z] - mu[z]);
    var /= static_cast<double>(std::max<std::size_t>(1, p.size() - 1));
    out[z] = se[z] > 0.0 ? var / (se[z] * se[z]) : static_cast<double>(p.size());
  }
  return out;
}

namespace {

void check_sampler(const std::vector<PPrior>& priors, int J, const SamplerOptions& opt) {
  if (opt.iters <= 0) throw InputError("sampler needs at least one iteration");
  if (opt.burn < 0) throw InputError("burn-in must be non-negative");
  if (static_cast<int>(priors.size()) != J) throw InputError("one prior per dose is required");
}

struct PendingRef {
  int dose;
  double v;
};

std::vector<PendingRef> pending_list(const Snapshot& s) {
  std::vector<PendingRef> out;
  for (const auto& pt : s.patients)
    if (!pt.assessed && !pt.dlt) out.push_back({pt.dose, pt.followup});
  return out;
}

}  // namespace

PosteriorDraws imh_sample(const std::vector<PPrior>& priors, const Snapshot& s, const TimeModelSpec& tox, int J,
                          const SamplerOptions& opt) {
  check_sampler(priors, J, opt);
  ObservedData d = observe(s, J);
  TimeModel tm(tox, s);
  auto pend = pending_list(s);
  Rng rng = make_rng(opt.seed, 11);

  auto log_ratio_term = [&](const std::vector<double>& p, const std::vector<double>& xi) {
    double l = 0.0;
    for (const auto& q : pend) l += std::log1p(-tm.weight(q.v, xi) * p[q.dose - 1]);
    return l;
  };
  auto propose = [&](std::vector<double>& p, std::vector<double>& xi) {
    for (int z = 0; z < J; ++z) p[z] = priors[z].draw(rng, d.doses[z].n, d.doses[z].m);
    tm.draw_complete_case(rng, xi);
  };

  std::vector<double> p(J), xi, pp(J), pxi;
  propose(p, xi);
  double cur = log_ratio_term(p, xi);
  PosteriorDraws out;
  out.p.reserve(opt.iters);
  int accepted = 0;
  for (int it = 0; it < opt.burn + opt.iters; ++it) {
    propose(pp, pxi);
    double prop = log_ratio_term(pp, pxi);
    bool acc = pend.empty() || std::log(draw_uniform(rng)) < prop - cur;
    if (acc) {
      std::swap(p, pp);
      std::swap(xi, pxi);
      cur = prop;
    }
    if (it >= opt.burn) {
      accepted += acc ? 1 : 0;
      out.p.push_back(p);
      out.xi.push_back(xi);
    }
  }
  out.acceptance = static_cast<double>(accepted) / opt.iters;
  return out;
}

PosteriorDraws da_sample(const std::vector<PPrior>& priors, const Snapshot& s, const TimeModelSpec& tox, int J,
                         const SamplerOptions& opt) {
  check_sampler(priors, J, opt);
  ObservedData d = observe(s, J);
  TimeModel tm(tox, s);
  auto pend = pending_list(s);
  Rng rng = make_rng(opt.seed, 13);

  std::vector<double> p(J), xi = tm.point(), latent, nxi;
  for (int z = 0; z < J; ++z) p[z] = priors[z].draw(rng, d.doses[z].n, d.doses[z].m);
  std::vector<int> extra(J);
  PosteriorDraws out;
  out.p.reserve(opt.iters);
  for (int it = 0; it < opt.burn + opt.iters; ++it) {
    std::fill(extra.begin(), extra.end(), 0);
    latent.clear();
    for (const auto& q : pend) {
      double pr = pending_dlt_prob(p[q.dose - 1], tm.weight(q.v, xi));
      if (draw_uniform(rng) < pr) {
        ++extra[q.dose - 1];
        latent.push_back(q.v);
      }
    }
    for (int z = 0; z < J; ++z) {
      int r = static_cast<int>(d.doses[z].pending_v.size());
      p[z] = priors[z].draw(rng, d.doses[z].n + extra[z], d.doses[z].m + r - extra[z]);
    }
    tm.draw_augmented(rng, xi, latent, nxi);
    xi.swap(nxi);
    if (it >= opt.burn) {
      out.p.push_back(p);
      out.xi.push_back(xi);
    }
  }
  return out;
}

double observed_loglik(const std::vector<double>& p, const std::vector<double>& xi, const ObservedData& d,
                       const TimeModel& tm) {
  double ll = 0.0;
  for (std::size_t z = 0; z < d.doses.size(); ++z) {
    const auto& dd = d.doses[z];
    double pz = p[z];
    if (dd.n > 0) ll += dd.n * (pz > 0.0 ? std::log(pz) : kNegInf);
    if (dd.m > 0) ll += dd.m * (pz < 1.0 ? std::log1p(-pz) : kNegInf);
    for (double v : dd.pending_v) {
      double t = 1.0 - tm.weight(v, xi) * pz;
      ll += t > 0.0 ? std::log(t) : kNegInf;
    }
  }
  if (tm.learned())
    for (double t : d.dlt_times) ll += tm.log_density(t, xi);
  return ll;
}

double score_root(int n, int m, const std::vector<double>& rho) {
  if (n == 0) return 0.0;
  bool none = true;
  for (double r : rho) none = none && r <= 0.0;
  if (rho.empty() || none) return static_cast<double>(n) / (n + m);
  auto g = [&](double p) {
    double s = n / p - m / (1.0 - p);
    for (double r : rho) s -= r / (1.0 - r * p);
    return s;
  };
  if (m == 0) {
    // score at 1- is finite only when m = 0
    double s1 = n;
    for (double r : rho) s1 -= r < 1.0 ? r / (1.0 - r) : std::numeric_limits<double>::infinity();
    if (s1 >= 0.0) return 1.0;
  }
  // g is strictly decreasing on (0, 1)
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

void flat_pending(const ObservedData& d, std::vector<double>& v, std::vector<int>& dose) {
  v.clear();
  dose.clear();
  for (std::size_t z = 0; z < d.doses.size(); ++z)
    for (double x : d.doses[z].pending_v) {
      v.push_back(x);
      dose.push_back(static_cast<int>(z));
    }
}

void check_mle_pre(const ObservedData& d) {
  for (const auto& dd : d.doses)
    if (dd.n + dd.m > 0) return;
  throw InputError("MLE needs at least one assessed outcome");
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

MleResult em_mle(const Snapshot& s, const TimeModelSpec& tox, int J, double tol, int max_iters) {
  ObservedData d = observe(s, J);
  check_mle_pre(d);
  TimeModel tm(tox, s);
  std::vector<double> pv, yhat;
  std::vector<int> pd;
  flat_pending(d, pv, pd);

  MleResult res;
  res.p.assign(J, 0.0);
  res.xi = tm.point();
  for (int z = 0; z < J; ++z) {
    const auto& dd = d.doses[z];
    int N = dd.n + dd.m + static_cast<int>(dd.pending_v.size());
    res.p[z] = N > 0 ? static_cast<double>(dd.n) / N : 0.0;
  }
  res.trace.push_back(observed_loglik(res.p, res.xi, d, tm));
  yhat.resize(pv.size());
  for (int it = 1; it <= max_iters; ++it) {
    // E step
    std::vector<double> ysum(J, 0.0);
    for (std::size_t i = 0; i < pv.size(); ++i) {
      yhat[i] = pending_dlt_prob(res.p[pd[i]], tm.weight(pv[i], res.xi));
      ysum[pd[i]] += yhat[i];
    }
    // M step
    std::vector<double> np(J, 0.0);
    for (int z = 0; z < J; ++z) {
      const auto& dd = d.doses[z];
      int N = dd.n + dd.m + static_cast<int>(dd.pending_v.size());
      np[z] = N > 0 ? (dd.n + ysum[z]) / N : 0.0;
    }
    std::vector<double> nxi = tm.m_step(res.xi, pv, yhat);
    double change = std::max(max_abs_diff(np, res.p), max_abs_diff(nxi, res.xi));
    res.p = std::move(np);
    res.xi = std::move(nxi);
    res.iterations = it;
    res.trace.push_back(observed_loglik(res.p, res.xi, d, tm));
    if (change < tol) {
      res.converged = true;
      return res;
    }
  }
  throw ConvergenceError("EM did not converge", res);
}

MleResult score_mle(const Snapshot& s, const TimeModelSpec& tox, int J, double tol, int max_iters) {
  ObservedData d = observe(s, J);
  check_mle_pre(d);
  TimeModel tm(tox, s);
  std::vector<double> pv;
  std::vector<int> pd;
  flat_pending(d, pv, pd);

  MleResult res;
  res.p.assign(J, 0.0);
  res.xi = tm.point();
  auto solve_p = [&](const std::vector<double>& xi, std::vector<double>& p) {
    for (int z = 0; z < J; ++z) {
      const auto& dd = d.doses[z];
      std::vector<double> rho;
      rho.reserve(dd.pending_v.size());
      for (double v : dd.pending_v) rho.push_back(tm.weight(v, xi));
      p[z] = score_root(dd.n, dd.m, rho);
    }
  };
  solve_p(res.xi, res.p);
  res.trace.push_back(observed_loglik(res.p, res.xi, d, tm));
  if (!tm.learned()) {
    res.converged = true;
    return res;
  }
  // alternate the exact p solve with an EM update for the time model
  std::vector<double> yhat(pv.size()), np(J);
  for (int it = 1; it <= max_iters; ++it) {
    for (std::size_t i = 0; i < pv.size(); ++i) yhat[i] = pending_dlt_prob(res.p[pd[i]], tm.weight(pv[i], res.xi));
    std::vector<double> nxi = tm.m_step(res.xi, pv, yhat);
    solve_p(nxi, np);
    double change = std::max(max_abs_diff(np, res.p), max_abs_diff(nxi, res.xi));
    res.p = np;
    res.xi = std::move(nxi);
    res.iterations = it;
    res.trace.push_back(observed_loglik(res.p, res.xi, d, tm));
    if (change < tol) {
      res.converged = true;
      return res;
    }
  }
  throw ConvergenceError("score equations did not converge", res);
}

}  // namespace dosefind
