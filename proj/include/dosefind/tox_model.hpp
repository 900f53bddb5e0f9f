#pragma once

#include <string>
#include <vector>

#include "dosefind/numeric.hpp"
#include "dosefind/trial_core.hpp"

namespace dosefind {

enum class ToxModelKind { Uniform, PiecewiseUniform, DiscreteHazard, PiecewiseConstHazard, RescaledBeta };

std::string to_string(ToxModelKind k);
ToxModelKind parse_tox_model_kind(const std::string& s);

// Conditional time-to-DLT model given Y = 1 with fixed parameters.
// Parameters are shared across doses.
class WeightModel {
 public:
  static WeightModel uniform(double W);
  // bounds are h_1..h_K with h_K = W
  static WeightModel piecewise_uniform(std::vector<double> bounds, std::vector<double> weights, double W);
  static WeightModel piecewise_uniform_equal(std::vector<double> weights, double W);
  // K = (distinct DLT times below W) + 1, equal weights; Uniform when no DLTs
  static WeightModel piecewise_uniform_empirical(std::vector<double> dlt_times, double W);
  // times are h_1..h_K with h_K = W and hazards ω_K = 1
  static WeightModel discrete_hazard(std::vector<double> times, std::vector<double> hazards, double W);
  static WeightModel piecewise_const_hazard(std::vector<double> bounds, std::vector<double> hazards, double W);
  static WeightModel rescaled_beta(double xi1, double xi2, double W);

  ToxModelKind kind() const { return kind_; }
  double window() const { return W_; }
  const std::vector<double>& bounds() const { return h_; }
  const std::vector<double>& params() const { return w_; }
  bool proper() const { return kind_ != ToxModelKind::PiecewiseConstHazard; }

  // ρ(t) = Pr(T <= t | Y = 1)
  double weight(double t) const;
  // density on (0, W]; point mass at h_k for the discrete hazard model
  double density(double t) const;
  double sample(Rng& rng) const;

 private:
  WeightModel(ToxModelKind k, double W, std::vector<double> h, std::vector<double> w);
  void validate() const;

  ToxModelKind kind_;
  double W_;
  std::vector<double> h_;
  std::vector<double> w_;
};

double piece_fraction(double t, double lo, double hi);

struct TimeModelSpec {
  ToxModelKind kind = ToxModelKind::Uniform;
  int K = 3;
  bool empirical = false;
  std::vector<double> fixed;  // fixed weights or hazards; empty means learned under the prior
  std::vector<double> prior;  // Dirichlet α, Beta (a, b), or Gamma shapes; empty means default
  double gamma_rate = 0.5;
  double xi1 = 1.0, xi2 = 1.0;

  static TimeModelSpec uniform();
  static TimeModelSpec piecewise_uniform(int K);
  static TimeModelSpec discrete_hazard();
  static TimeModelSpec piecewise_hazard(int K);
  static TimeModelSpec rescaled_beta(double xi1, double xi2);

  bool learned() const;
  std::string label() const;
};

void to_json(nlohmann::json& j, const TimeModelSpec& s);
void from_json(const nlohmann::json& j, TimeModelSpec& s);

// A time model family bound to the DLT times observed in one snapshot. Holds
// the complete-case sufficient statistics used by the conjugate updates.
class TimeModel {
 public:
  TimeModel(const TimeModelSpec& spec, const Snapshot& s);
  TimeModel(const TimeModelSpec& spec, const std::vector<double>& dlt_times, double W);

  bool learned() const { return learned_; }
  ToxModelKind kind() const { return kind_; }
  double window() const { return W_; }
  std::size_t dim() const { return point_.size(); }
  const std::vector<double>& point() const { return point_; }
  const std::vector<double>& bounds() const { return h_; }

  double weight(double t, const std::vector<double>& xi) const;
  double log_density(double t, const std::vector<double>& xi) const;
  WeightModel model(const std::vector<double>& xi) const;
  WeightModel model() const { return model(point_); }

  // Draw from the posterior given observed DLT times only.
  void draw_complete_case(Rng& rng, std::vector<double>& xi) const;
  // Draw from the full-data conditional given latent DLTs at the listed follow-ups.
  void draw_augmented(Rng& rng, const std::vector<double>& xi, const std::vector<double>& latent_v,
                      std::vector<double>& out) const;
  // EM update given expected latent DLT indicators for pending follow-ups.
  std::vector<double> m_step(const std::vector<double>& xi, const std::vector<double>& pending_v,
                             const std::vector<double>& yhat) const;

 private:
  void init(const TimeModelSpec& spec, const std::vector<double>& dlt_times);
  int piece_of(double t) const;

  ToxModelKind kind_;
  double W_;
  bool learned_ = false;
  std::vector<double> h_;
  std::vector<double> point_;
  std::vector<double> prior_;
  double rate0_ = 0.5;
  std::vector<double> obs_events_;
  std::vector<double> obs_exposure_;
};

}  // namespace dosefind
