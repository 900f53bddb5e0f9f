#include "dosefind/crm.hpp"

#include <algorithm>
#include <cmath>

namespace dosefind {

void CrmCurve::validate() const {
  if (skeleton.empty()) throw InputError("skeleton is empty");
  double prev = 0.0;
  for (double s : skeleton) {
    if (!(s > prev) || !(s < 1.0)) throw InputError("skeleton must be strictly increasing inside (0, 1)");
    prev = s;
  }
  if (!(sigma > 0.0)) throw InputError("prior sd for alpha must be positive");
}

std::vector<double> crm_skeleton(int J, double target, double halfwidth, int nu) {
  if (J < 1) throw InputError("J must be positive");
  if (nu == 0) nu = (J + 1) / 2;
  if (nu < 1 || nu > J) throw InputError("prior MTD outside the dose grid");
  if (!(halfwidth > 0.0) || !(target - halfwidth > 0.0) || !(target + halfwidth < 1.0))
    throw InputError("halfwidth incompatible with target");
  std::vector<double> s(static_cast<std::size_t>(J));
  s[nu - 1] = target;
  for (int k = nu; k >= 2; --k) {
    double e = std::log(target + halfwidth) / std::log(s[k - 1]);
    s[k - 2] = std::exp(std::log(target - halfwidth) / e);
  }
  for (int k = nu; k <= J - 1; ++k) {
    double e = std::log(target - halfwidth) / std::log(s[k - 1]);
    s[k] = std::exp(std::log(target + halfwidth) / e);
  }
  return s;
}

CrmGrid::CrmGrid(const CrmCurve& curve, int points) : J_(static_cast<int>(curve.skeleton.size())), G_(points) {
  curve.validate();
  if (points < 2) throw InputError("quadrature needs at least two points");
  const double lim = 6.0 * curve.sigma, step = 2.0 * lim / G_;
  alpha_.resize(G_);
  log_prior_.resize(G_);
  phi_.resize(static_cast<std::size_t>(J_) * G_);
  lphi_.resize(phi_.size());
  l1phi_.resize(phi_.size());
  for (int g = 0; g < G_; ++g) {
    double a = -lim + (g + 0.5) * step;
    alpha_[g] = a;
    log_prior_[g] = -0.5 * a * a / (curve.sigma * curve.sigma);
    for (int z = 0; z < J_; ++z) {
      double lp = std::exp(a) * std::log(curve.skeleton[z]);
      std::size_t i = static_cast<std::size_t>(z) * G_ + g;
      lphi_[i] = lp;
      phi_[i] = std::exp(lp);
      l1phi_[i] = std::log(-std::expm1(lp));
    }
  }
}

void CrmGrid::log_post_counts(const std::vector<int>& n, const std::vector<int>& m, std::vector<double>& out) const {
  out = log_prior_;
  for (int z = 0; z < J_; ++z) {
    if (n[z] > 0) {
      const double* lp = &lphi_[static_cast<std::size_t>(z) * G_];
      for (int g = 0; g < G_; ++g) out[g] += n[z] * lp[g];
    }
    if (m[z] > 0) {
      const double* lq = &l1phi_[static_cast<std::size_t>(z) * G_];
      for (int g = 0; g < G_; ++g) out[g] += m[z] * lq[g];
    }
  }
}

void CrmGrid::add_pending(int z, double rho, std::vector<double>& lw) const {
  if (rho <= 0.0) return;
  const double* ph = &phi_[static_cast<std::size_t>(z) * G_];
  if (rho >= 1.0) {
    const double* lq = &l1phi_[static_cast<std::size_t>(z) * G_];
    for (int g = 0; g < G_; ++g) lw[g] += lq[g];
    return;
  }
  for (int g = 0; g < G_; ++g) lw[g] += std::log1p(-rho * ph[g]);
}

std::vector<double> CrmGrid::means(const std::vector<double>& lw) const {
  double mx = *std::max_element(lw.begin(), lw.end());
  std::vector<double> w(G_);
  double tot = 0.0;
  for (int g = 0; g < G_; ++g) tot += (w[g] = std::exp(lw[g] - mx));
  std::vector<double> out(J_, 0.0);
  for (int z = 0; z < J_; ++z) {
    const double* ph = &phi_[static_cast<std::size_t>(z) * G_];
    double s = 0.0;
    for (int g = 0; g < G_; ++g) s += w[g] * ph[g];
    out[z] = s / tot;
  }
  return out;
}

namespace {

CrmPosterior crm_mcmc(const CrmCurve* curve, const Snapshot& s, const TimeModelSpec& tox, const CrmOptions& opt) {
  const int J = static_cast<int>(curve->skeleton.size());
  ObservedData d = observe(s, J);
  TimeModel tm(tox, s);
  Rng rng = make_rng(opt.seed, 17);
  auto loglik = [&](double a, const std::vector<double>& xi) {
    double ea = std::exp(a), l = -0.5 * a * a / (curve->sigma * curve->sigma);
    for (int z = 0; z < J; ++z) {
      double lp = ea * std::log(curve->skeleton[z]);
      double ph = std::exp(lp);
      l += d.doses[z].n * lp + d.doses[z].m * std::log(-std::expm1(lp));
      for (double v : d.doses[z].pending_v) l += std::log1p(-tm.weight(v, xi) * ph);
    }
    return l;
  };
  std::normal_distribution<double> step(0.0, 0.6);
  double a = 0.0;
  std::vector<double> xi, pxi;
  tm.draw_complete_case(rng, xi);
  double cur = loglik(a, xi);
  CrmPosterior out;
  out.phat.assign(J, 0.0);
  for (int it = 0; it < opt.burn + opt.iters; ++it) {
    double na = a + step(rng);
    double prop = loglik(na, xi);
    if (std::log(draw_uniform(rng)) < prop - cur) {
      a = na;
      cur = prop;
    }
    if (tm.learned()) {
      // independence proposal for the time model from its complete-case posterior
      tm.draw_complete_case(rng, pxi);
      double pl = loglik(a, pxi);
      if (std::log(draw_uniform(rng)) < pl - cur) {
        xi.swap(pxi);
        cur = pl;
      }
    }
    if (it >= opt.burn) {
      out.alpha_draws.push_back(a);
      for (int z = 0; z < J; ++z) out.phat[z] += std::pow(curve->skeleton[z], std::exp(a));
    }
  }
  for (double& v : out.phat) v /= opt.iters;
  out.ess = opt.iters;
  return out;
}

}  // namespace

CrmPosterior crm_posterior(const CrmGrid& grid, const Snapshot& s, const TimeModelSpec& tox, const CrmOptions& opt) {
  const int J = grid.doses();
  ObservedData d = observe(s, J);
  TimeModel tm(tox, s);
  std::vector<int> n(J), m(J);
  for (int z = 0; z < J; ++z) {
    n[z] = d.doses[z].n;
    m[z] = d.doses[z].m;
  }
  std::vector<double> base;
  grid.log_post_counts(n, m, base);
  bool any_pending = false;
  for (const auto& dd : d.doses) any_pending = any_pending || !dd.pending_v.empty();

  CrmPosterior out;
  std::vector<double> final_lw;
  if (!tm.learned() || !any_pending) {
    final_lw = base;
    for (int z = 0; z < J; ++z)
      for (double v : d.doses[z].pending_v) grid.add_pending(z, tm.weight(v, tm.point()), final_lw);
    out.phat = grid.means(final_lw);
    out.ess = 1.0;
  } else {
    // importance sampling over the time model from its complete-case posterior
    Rng rng = make_rng(opt.seed, 19);
    const int S = std::max(1, opt.xi_draws);
    std::vector<std::vector<double>> lws(S);
    std::vector<double> ev(S);
    std::vector<double> xi;
    for (int k = 0; k < S; ++k) {
      tm.draw_complete_case(rng, xi);
      lws[k] = base;
      for (int z = 0; z < J; ++z)
        for (double v : d.doses[z].pending_v) grid.add_pending(z, tm.weight(v, xi), lws[k]);
      ev[k] = log_sum_exp(lws[k]);
    }
    double mx = *std::max_element(ev.begin(), ev.end());
    final_lw.assign(grid.size(), kNegInf);
    double sw = 0.0, sw2 = 0.0;
    for (int k = 0; k < S; ++k) {
      double w = std::exp(ev[k] - mx);
      sw += w;
      sw2 += w * w;
      for (int g = 0; g < grid.size(); ++g) final_lw[g] = log_add(final_lw[g], lws[k][g] - mx);
    }
    out.phat = grid.means(final_lw);
    out.ess = sw * sw / sw2;
  }
  if (opt.alpha_draws > 0) {
    Rng rng = make_rng(opt.seed, 23);
    double mx = *std::max_element(final_lw.begin(), final_lw.end());
    std::vector<double> w(grid.size());
    for (int g = 0; g < grid.size(); ++g) w[g] = std::exp(final_lw[g] - mx);
    std::discrete_distribution<int> pick(w.begin(), w.end());
    double half = grid.size() > 1 ? 0.5 * (grid.alpha(1) - grid.alpha(0)) : 0.0;
    for (int k = 0; k < opt.alpha_draws; ++k)
      out.alpha_draws.push_back(grid.alpha(pick(rng)) + (2.0 * draw_uniform(rng) - 1.0) * half);
  }
  return out;
}

CrmPosterior crm_posterior(const CrmCurve& curve, const Snapshot& s, const TimeModelSpec& tox,
                           const CrmOptions& opt) {
  if (opt.mcmc) {
    curve.validate();
    return crm_mcmc(&curve, s, tox, opt);
  }
  return crm_posterior(CrmGrid(curve), s, tox, opt);
}

}  // namespace dosefind
