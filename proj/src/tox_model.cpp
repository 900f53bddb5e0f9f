#include "dosefind/tox_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/beta.hpp>

namespace dosefind {

namespace {

constexpr double kTimeTol = 1e-9;

std::vector<double> equal_bounds(int K, double W) {
  std::vector<double> h(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) h[k - 1] = W * k / K;
  h.back() = W;
  return h;
}

std::vector<double> distinct_below(std::vector<double> t, double W) {
  std::sort(t.begin(), t.end());
  std::vector<double> out;
  for (double v : t) {
    if (v >= W - kTimeTol) continue;
    if (out.empty() || v > out.back() + kTimeTol) out.push_back(v);
  }
  return out;
}

double rho_value(ToxModelKind kind, const std::vector<double>& h, double W, const std::vector<double>& w, double t) {
  switch (kind) {
    case ToxModelKind::Uniform:
      return t / W;
    case ToxModelKind::PiecewiseUniform: {
      double s = 0.0, lo = 0.0;
      for (std::size_t k = 0; k < h.size(); ++k) {
        s += w[k] * piece_fraction(t, lo, h[k]);
        lo = h[k];
      }
      return std::min(s, 1.0);
    }
    case ToxModelKind::DiscreteHazard: {
      double surv = 1.0;
      for (std::size_t k = 0; k < h.size(); ++k) {
        if (h[k] <= t + kTimeTol) surv *= 1.0 - w[k];
        else break;
      }
      return 1.0 - surv;
    }
    case ToxModelKind::PiecewiseConstHazard: {
      double s = 0.0, lo = 0.0;
      for (std::size_t k = 0; k < h.size(); ++k) {
        s += w[k] * piece_fraction(t, lo, h[k]);
        lo = h[k];
      }
      return 1.0 - std::exp(-s);
    }
    case ToxModelKind::RescaledBeta:
      return ibeta(w[0], w[1], t / W);
  }
  return 0.0;
}

int piece_index(const std::vector<double>& h, double t) {
  for (std::size_t k = 0; k < h.size(); ++k)
    if (t <= h[k] + kTimeTol) return static_cast<int>(k);
  return static_cast<int>(h.size()) - 1;
}

double log_density_value(ToxModelKind kind, const std::vector<double>& h, double W, const std::vector<double>& w,
                         double t) {
  switch (kind) {
    case ToxModelKind::Uniform:
      return -std::log(W);
    case ToxModelKind::PiecewiseUniform: {
      int k = piece_index(h, t);
      double lo = k == 0 ? 0.0 : h[k - 1];
      return w[k] > 0.0 ? std::log(w[k]) - std::log(h[k] - lo) : kNegInf;
    }
    case ToxModelKind::DiscreteHazard: {
      double lp = 0.0;
      for (std::size_t k = 0; k < h.size(); ++k) {
        if (std::fabs(h[k] - t) <= kTimeTol) return w[k] > 0.0 ? lp + std::log(w[k]) : kNegInf;
        if (h[k] > t) break;
        lp += w[k] < 1.0 ? std::log1p(-w[k]) : kNegInf;
      }
      return kNegInf;
    }
    case ToxModelKind::PiecewiseConstHazard: {
      int kt = piece_index(h, t);
      double s = 0.0, lo = 0.0;
      for (std::size_t k = 0; k < h.size(); ++k) {
        s += w[k] * (h[k] - lo) * piece_fraction(t, lo, h[k]);
        lo = h[k];
      }
      return (w[kt] > 0.0 ? std::log(w[kt]) : kNegInf) - s;
    }
    case ToxModelKind::RescaledBeta: {
      double x = t / W;
      if (x <= 0.0 || x >= 1.0) {
        if ((x <= 0.0 && w[0] < 1.0) || (x >= 1.0 && w[1] < 1.0)) return std::numeric_limits<double>::infinity();
        if ((x <= 0.0 && w[0] > 1.0) || (x >= 1.0 && w[1] > 1.0)) return kNegInf;
      }
      return (w[0] - 1.0) * std::log(x) + (w[1] - 1.0) * std::log1p(-x) - lbeta(w[0], w[1]) - std::log(W);
    }
  }
  return kNegInf;
}

}  // namespace

double piece_fraction(double t, double lo, double hi) {
  if (t > hi) return 1.0;
  if (t > lo) return (t - lo) / (hi - lo);
  return 0.0;
}

std::string to_string(ToxModelKind k) {
  switch (k) {
    case ToxModelKind::Uniform: return "uniform";
    case ToxModelKind::PiecewiseUniform: return "piecewise-uniform";
    case ToxModelKind::DiscreteHazard: return "discrete-hazard";
    case ToxModelKind::PiecewiseConstHazard: return "piecewise-hazard";
    case ToxModelKind::RescaledBeta: return "rescaled-beta";
  }
  return "?";
}

ToxModelKind parse_tox_model_kind(const std::string& s) {
  if (s == "uniform") return ToxModelKind::Uniform;
  if (s == "piecewise-uniform" || s == "pu") return ToxModelKind::PiecewiseUniform;
  if (s == "discrete-hazard" || s == "dh") return ToxModelKind::DiscreteHazard;
  if (s == "piecewise-hazard" || s == "piecewise-const-hazard" || s == "pch") return ToxModelKind::PiecewiseConstHazard;
  if (s == "rescaled-beta") return ToxModelKind::RescaledBeta;
  throw InputError("unknown tox model kind: " + s);
}

WeightModel::WeightModel(ToxModelKind k, double W, std::vector<double> h, std::vector<double> w)
    : kind_(k), W_(W), h_(std::move(h)), w_(std::move(w)) {
  validate();
}

void WeightModel::validate() const {
  if (!(W_ > 0.0)) throw InputError("window must be positive");
  if (kind_ == ToxModelKind::Uniform) return;
  if (kind_ == ToxModelKind::RescaledBeta) {
    if (w_.size() != 2 || !(w_[0] > 0.0) || !(w_[1] > 0.0)) throw InputError("rescaled beta needs xi1, xi2 > 0");
    return;
  }
  if (h_.empty() || h_.size() != w_.size()) throw InputError("bounds and parameters must have equal length K >= 1");
  double prev = 0.0;
  for (double v : h_) {
    if (!(v > prev)) throw InputError("boundaries must be strictly increasing from 0");
    prev = v;
  }
  if (std::fabs(h_.back() - W_) > kTimeTol) throw InputError("last boundary must equal the window");
  for (double v : w_)
    if (v < 0.0) throw InputError("weights and hazards must be non-negative");
  if (kind_ == ToxModelKind::PiecewiseUniform) {
    double s = std::accumulate(w_.begin(), w_.end(), 0.0);
    if (std::fabs(s - 1.0) > 1e-9) throw InputError("piecewise uniform weights must sum to 1");
  }
  if (kind_ == ToxModelKind::DiscreteHazard) {
    for (double v : w_)
      if (v > 1.0) throw InputError("discrete hazards must lie in [0,1]");
    if (std::fabs(w_.back() - 1.0) > 1e-12) throw InputError("last discrete hazard must equal 1");
  }
}

WeightModel WeightModel::uniform(double W) { return WeightModel(ToxModelKind::Uniform, W, {W}, {1.0}); }

WeightModel WeightModel::piecewise_uniform(std::vector<double> bounds, std::vector<double> weights, double W) {
  return WeightModel(ToxModelKind::PiecewiseUniform, W, std::move(bounds), std::move(weights));
}

WeightModel WeightModel::piecewise_uniform_equal(std::vector<double> weights, double W) {
  auto h = equal_bounds(static_cast<int>(weights.size()), W);
  return piecewise_uniform(std::move(h), std::move(weights), W);
}

WeightModel WeightModel::piecewise_uniform_empirical(std::vector<double> dlt_times, double W) {
  auto h = distinct_below(std::move(dlt_times), W);
  if (h.empty()) return uniform(W);
  h.push_back(W);
  std::vector<double> w(h.size(), 1.0 / static_cast<double>(h.size()));
  return piecewise_uniform(std::move(h), std::move(w), W);
}

WeightModel WeightModel::discrete_hazard(std::vector<double> times, std::vector<double> hazards, double W) {
  return WeightModel(ToxModelKind::DiscreteHazard, W, std::move(times), std::move(hazards));
}

WeightModel WeightModel::piecewise_const_hazard(std::vector<double> bounds, std::vector<double> hazards, double W) {
  return WeightModel(ToxModelKind::PiecewiseConstHazard, W, std::move(bounds), std::move(hazards));
}

WeightModel WeightModel::rescaled_beta(double xi1, double xi2, double W) {
  return WeightModel(ToxModelKind::RescaledBeta, W, {W}, {xi1, xi2});
}

double WeightModel::weight(double t) const {
  if (t < -kTimeTol || t > W_ + kTimeTol) throw InputError("follow-up time outside [0, W]");
  t = std::clamp(t, 0.0, W_);
  return rho_value(kind_, h_, W_, w_, t);
}

double WeightModel::density(double t) const {
  if (!(t > 0.0)) throw InputError("density requires t > 0");
  if (t > W_ + kTimeTol) throw InputError("density requires t <= W");
  if (kind_ == ToxModelKind::DiscreteHazard) {
    double ld = log_density_value(kind_, h_, W_, w_, t);
    return ld == kNegInf ? 0.0 : std::exp(ld);
  }
  return std::exp(log_density_value(kind_, h_, W_, w_, t));
}

double WeightModel::sample(Rng& rng) const {
  switch (kind_) {
    case ToxModelKind::Uniform:
      return (1.0 - draw_uniform(rng)) * W_;
    case ToxModelKind::PiecewiseUniform: {
      double u = draw_uniform(rng), acc = 0.0;
      std::size_t k = 0;
      for (; k + 1 < w_.size(); ++k) {
        acc += w_[k];
        if (u < acc) break;
      }
      double lo = k == 0 ? 0.0 : h_[k - 1];
      return lo + (1.0 - draw_uniform(rng)) * (h_[k] - lo);
    }
    case ToxModelKind::DiscreteHazard: {
      for (std::size_t k = 0; k < h_.size(); ++k)
        if (draw_uniform(rng) < w_[k]) return h_[k];
      return h_.back();
    }
    case ToxModelKind::RescaledBeta: {
      double x = draw_beta(rng, w_[0], w_[1]);
      return std::max(x, 1e-300) * W_;
    }
    case ToxModelKind::PiecewiseConstHazard:
      throw UnsupportedError("the piecewise constant hazard model is improper and cannot be sampled");
  }
  return W_;
}

TimeModelSpec TimeModelSpec::uniform() { return TimeModelSpec{}; }

TimeModelSpec TimeModelSpec::piecewise_uniform(int K) {
  TimeModelSpec s;
  s.kind = ToxModelKind::PiecewiseUniform;
  s.K = K;
  return s;
}

TimeModelSpec TimeModelSpec::discrete_hazard() {
  TimeModelSpec s;
  s.kind = ToxModelKind::DiscreteHazard;
  return s;
}

TimeModelSpec TimeModelSpec::piecewise_hazard(int K) {
  TimeModelSpec s;
  s.kind = ToxModelKind::PiecewiseConstHazard;
  s.K = K;
  return s;
}

TimeModelSpec TimeModelSpec::rescaled_beta(double xi1, double xi2) {
  TimeModelSpec s;
  s.kind = ToxModelKind::RescaledBeta;
  s.xi1 = xi1;
  s.xi2 = xi2;
  return s;
}

bool TimeModelSpec::learned() const {
  switch (kind) {
    case ToxModelKind::Uniform:
    case ToxModelKind::RescaledBeta:
      return false;
    case ToxModelKind::PiecewiseUniform:
      return !empirical && fixed.empty();
    default:
      return fixed.empty();
  }
}

std::string TimeModelSpec::label() const {
  switch (kind) {
    case ToxModelKind::Uniform: return "uniform";
    case ToxModelKind::PiecewiseUniform:
      return empirical ? "piecewise-uniform-empirical" : "piecewise-uniform-" + std::to_string(K);
    case ToxModelKind::DiscreteHazard: return "discrete-hazard";
    case ToxModelKind::PiecewiseConstHazard: return "piecewise-hazard-" + std::to_string(K);
    case ToxModelKind::RescaledBeta: return "rescaled-beta";
  }
  return "?";
}

void to_json(nlohmann::json& j, const TimeModelSpec& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)}, {"K", s.K}};
  if (s.empirical) j["empirical"] = true;
  if (!s.fixed.empty()) j["fixed"] = s.fixed;
  if (!s.prior.empty()) j["prior"] = s.prior;
  if (s.kind == ToxModelKind::PiecewiseConstHazard) j["gamma_rate"] = s.gamma_rate;
  if (s.kind == ToxModelKind::RescaledBeta) j["xi"] = {s.xi1, s.xi2};
}

void from_json(const nlohmann::json& j, TimeModelSpec& s) {
  s = TimeModelSpec{};
  if (j.is_string()) {
    s.kind = parse_tox_model_kind(j.get<std::string>());
    return;
  }
  s.kind = parse_tox_model_kind(j.value("kind", std::string("uniform")));
  s.K = j.value("K", 3);
  s.empirical = j.value("empirical", false);
  s.fixed = j.value("fixed", std::vector<double>{});
  s.prior = j.value("prior", std::vector<double>{});
  s.gamma_rate = j.value("gamma_rate", 0.5);
  if (j.contains("xi")) {
    auto xi = j["xi"].get<std::vector<double>>();
    if (xi.size() != 2) throw InputError("rescaled beta needs two parameters");
    s.xi1 = xi[0];
    s.xi2 = xi[1];
  }
  if (s.K < 1) throw InputError("tox_model.K must be at least 1");
}

TimeModel::TimeModel(const TimeModelSpec& spec, const Snapshot& s) : kind_(spec.kind), W_(s.window) {
  std::vector<double> t;
  for (const auto& p : s.patients)
    if (p.dlt) t.push_back(p.followup);
  init(spec, t);
}

TimeModel::TimeModel(const TimeModelSpec& spec, const std::vector<double>& dlt_times, double W)
    : kind_(spec.kind), W_(W) {
  init(spec, dlt_times);
}

void TimeModel::init(const TimeModelSpec& spec, const std::vector<double>& dlt_times) {
  const int K = spec.K;
  switch (kind_) {
    case ToxModelKind::Uniform:
      h_ = {W_};
      break;
    case ToxModelKind::RescaledBeta:
      h_ = {W_};
      point_ = {spec.xi1, spec.xi2};
      break;
    case ToxModelKind::PiecewiseUniform: {
      if (spec.empirical) {
        h_ = distinct_below(dlt_times, W_);
        h_.push_back(W_);
        point_.assign(h_.size(), 1.0 / static_cast<double>(h_.size()));
        break;
      }
      h_ = equal_bounds(K, W_);
      if (!spec.fixed.empty()) {
        if (static_cast<int>(spec.fixed.size()) != K) throw InputError("fixed weights must have length K");
        point_ = spec.fixed;
        break;
      }
      prior_ = spec.prior.empty() ? std::vector<double>(K, 1.0) : spec.prior;
      if (static_cast<int>(prior_.size()) != K) throw InputError("Dirichlet prior must have length K");
      double s = std::accumulate(prior_.begin(), prior_.end(), 0.0);
      for (double a : prior_) point_.push_back(a / s);
      learned_ = true;
      obs_events_.assign(K, 0.0);
      for (double t : dlt_times) obs_events_[piece_of(t)] += 1.0;
      break;
    }
    case ToxModelKind::DiscreteHazard: {
      h_ = distinct_below(dlt_times, W_);
      h_.push_back(W_);
      const std::size_t KK = h_.size();
      if (!spec.fixed.empty()) {
        if (spec.fixed.size() != KK) throw InputError("fixed discrete hazards must match the observed grid");
        point_ = spec.fixed;
        point_.back() = 1.0;
        break;
      }
      prior_ = spec.prior.empty() ? std::vector<double>{0.5, 0.5} : spec.prior;
      if (prior_.size() != 2) throw InputError("discrete hazard prior is Beta(a, b)");
      point_.assign(KK, prior_[0] / (prior_[0] + prior_[1]));
      point_.back() = 1.0;
      learned_ = KK > 1;
      obs_events_.assign(KK, 0.0);
      obs_exposure_.assign(KK, 0.0);
      for (double t : dlt_times) {
        int k = piece_of(t);
        obs_events_[k] += 1.0;
        for (int j = 0; j < k; ++j) obs_exposure_[j] += 1.0;
      }
      break;
    }
    case ToxModelKind::PiecewiseConstHazard: {
      h_ = equal_bounds(K, W_);
      rate0_ = spec.gamma_rate;
      if (!spec.fixed.empty()) {
        if (static_cast<int>(spec.fixed.size()) != K) throw InputError("fixed hazards must have length K");
        point_ = spec.fixed;
        break;
      }
      if (spec.prior.empty()) {
        for (int k = 1; k <= K; ++k) prior_.push_back(K / (2.0 * W_ * (K - k + 0.5)));
      } else {
        prior_ = spec.prior;
      }
      if (static_cast<int>(prior_.size()) != K) throw InputError("Gamma prior shapes must have length K");
      for (double a : prior_) point_.push_back(a / rate0_);
      learned_ = true;
      obs_events_.assign(K, 0.0);
      obs_exposure_.assign(K, 0.0);
      for (double t : dlt_times) {
        obs_events_[piece_of(t)] += 1.0;
        double lo = 0.0;
        for (int k = 0; k < K; ++k) {
          obs_exposure_[k] += (h_[k] - lo) * piece_fraction(t, lo, h_[k]);
          lo = h_[k];
        }
      }
      break;
    }
  }
}

int TimeModel::piece_of(double t) const { return piece_index(h_, t); }

double TimeModel::weight(double t, const std::vector<double>& xi) const {
  return rho_value(kind_, h_, W_, xi, std::clamp(t, 0.0, W_));
}

double TimeModel::log_density(double t, const std::vector<double>& xi) const {
  return log_density_value(kind_, h_, W_, xi, t);
}

WeightModel TimeModel::model(const std::vector<double>& xi) const {
  switch (kind_) {
    case ToxModelKind::Uniform: return WeightModel::uniform(W_);
    case ToxModelKind::PiecewiseUniform: return WeightModel::piecewise_uniform(h_, xi, W_);
    case ToxModelKind::DiscreteHazard: return WeightModel::discrete_hazard(h_, xi, W_);
    case ToxModelKind::PiecewiseConstHazard: return WeightModel::piecewise_const_hazard(h_, xi, W_);
    case ToxModelKind::RescaledBeta: return WeightModel::rescaled_beta(xi[0], xi[1], W_);
  }
  return WeightModel::uniform(W_);
}

void TimeModel::draw_complete_case(Rng& rng, std::vector<double>& xi) const {
  if (!learned_) {
    xi = point_;
    return;
  }
  const std::size_t K = h_.size();
  switch (kind_) {
    case ToxModelKind::PiecewiseUniform: {
      std::vector<double> a(K);
      for (std::size_t k = 0; k < K; ++k) a[k] = prior_[k] + obs_events_[k];
      draw_dirichlet(rng, a, xi);
      break;
    }
    case ToxModelKind::DiscreteHazard:
      xi.resize(K);
      for (std::size_t k = 0; k + 1 < K; ++k)
        xi[k] = std::min(draw_beta(rng, prior_[0] + obs_events_[k], prior_[1] + obs_exposure_[k]), 1.0 - 1e-12);
      xi[K - 1] = 1.0;
      break;
    case ToxModelKind::PiecewiseConstHazard:
      xi.resize(K);
      for (std::size_t k = 0; k < K; ++k)
        xi[k] = draw_gamma(rng, prior_[k] + obs_events_[k], rate0_ + obs_exposure_[k]);
      break;
    default:
      xi = point_;
  }
}

void TimeModel::draw_augmented(Rng& rng, const std::vector<double>& xi, const std::vector<double>& latent_v,
                               std::vector<double>& out) const {
  if (!learned_) {
    out = point_;
    return;
  }
  const std::size_t K = h_.size();
  std::vector<double> prob(K);
  switch (kind_) {
    case ToxModelKind::PiecewiseUniform: {
      std::vector<double> a(K);
      for (std::size_t k = 0; k < K; ++k) a[k] = prior_[k] + obs_events_[k];
      for (double v : latent_v) {
        // piece of the unobserved DLT time given T > v
        double tot = 0.0, lo = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          prob[k] = xi[k] * (1.0 - piece_fraction(v, lo, h_[k]));
          tot += prob[k];
          lo = h_[k];
        }
        if (tot <= 0.0) continue;
        double u = draw_uniform(rng) * tot, acc = 0.0;
        std::size_t k = 0;
        for (; k + 1 < K; ++k) {
          acc += prob[k];
          if (u < acc) break;
        }
        a[k] += 1.0;
      }
      draw_dirichlet(rng, a, out);
      break;
    }
    case ToxModelKind::DiscreteHazard: {
      std::vector<double> e = obs_events_, s = obs_exposure_;
      for (double v : latent_v) {
        double tot = 0.0, surv = 1.0;
        for (std::size_t k = 0; k < K; ++k) {
          double mass = xi[k] * surv;
          surv *= 1.0 - xi[k];
          prob[k] = h_[k] > v + kTimeTol ? mass : 0.0;
          tot += prob[k];
        }
        if (tot <= 0.0) continue;
        double u = draw_uniform(rng) * tot, acc = 0.0;
        std::size_t k = 0;
        for (; k + 1 < K; ++k) {
          acc += prob[k];
          if (u < acc && prob[k] > 0.0) break;
        }
        e[k] += 1.0;
        for (std::size_t j = 0; j < k; ++j) s[j] += 1.0;
      }
      out.resize(K);
      for (std::size_t k = 0; k + 1 < K; ++k)
        out[k] = std::min(draw_beta(rng, prior_[0] + e[k], prior_[1] + s[k]), 1.0 - 1e-12);
      out[K - 1] = 1.0;
      break;
    }
    case ToxModelKind::PiecewiseConstHazard: {
      std::vector<double> rate(K);
      for (std::size_t k = 0; k < K; ++k) rate[k] = rate0_ + obs_exposure_[k];
      for (double v : latent_v) {
        double lo = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          rate[k] += piece_fraction(v, lo, h_[k]);
          lo = h_[k];
        }
      }
      out.resize(K);
      for (std::size_t k = 0; k < K; ++k) out[k] = draw_gamma(rng, prior_[k] + obs_events_[k], rate[k]);
      break;
    }
    default:
      out = point_;
  }
}

std::vector<double> TimeModel::m_step(const std::vector<double>& xi, const std::vector<double>& pending_v,
                                      const std::vector<double>& yhat) const {
  if (!learned_) return point_;
  const std::size_t K = h_.size();
  std::vector<double> out = xi;
  switch (kind_) {
    case ToxModelKind::PiecewiseUniform: {
      std::vector<double> c = obs_events_;
      std::vector<double> a(K);
      for (std::size_t i = 0; i < pending_v.size(); ++i) {
        double tot = 0.0, lo = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          a[k] = xi[k] * (1.0 - piece_fraction(pending_v[i], lo, h_[k]));
          tot += a[k];
          lo = h_[k];
        }
        if (tot <= 0.0) continue;
        for (std::size_t k = 0; k < K; ++k) c[k] += yhat[i] * a[k] / tot;
      }
      double s = std::accumulate(c.begin(), c.end(), 0.0);
      if (s > 0.0)
        for (std::size_t k = 0; k < K; ++k) out[k] = c[k] / s;
      break;
    }
    case ToxModelKind::DiscreteHazard: {
      std::vector<double> e = obs_events_, s = obs_exposure_, mass(K);
      for (std::size_t i = 0; i < pending_v.size(); ++i) {
        double tot = 0.0, surv = 1.0;
        for (std::size_t k = 0; k < K; ++k) {
          double mk = xi[k] * surv;
          surv *= 1.0 - xi[k];
          mass[k] = h_[k] > pending_v[i] + kTimeTol ? mk : 0.0;
          tot += mass[k];
        }
        if (tot <= 0.0) continue;
        for (std::size_t k = 0; k < K; ++k) {
          double w = yhat[i] * mass[k] / tot;
          e[k] += w;
          for (std::size_t j = 0; j < k; ++j) s[j] += w;
        }
      }
      for (std::size_t k = 0; k + 1 < K; ++k)
        if (e[k] + s[k] > 0.0) out[k] = std::min(e[k] / (e[k] + s[k]), 1.0 - 1e-12);
      out[K - 1] = 1.0;
      break;
    }
    case ToxModelKind::PiecewiseConstHazard: {
      std::vector<double> rate = obs_exposure_;
      for (std::size_t i = 0; i < pending_v.size(); ++i) {
        double lo = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          rate[k] += yhat[i] * piece_fraction(pending_v[i], lo, h_[k]);
          lo = h_[k];
        }
      }
      for (std::size_t k = 0; k < K; ++k)
        if (rate[k] > 0.0) out[k] = obs_events_[k] / rate[k];
      break;
    }
    default:
      break;
  }
  return out;
}

}  // namespace dosefind
