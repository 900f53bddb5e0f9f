#include <algorithm>
#include <cmath>
#include <functional>

#include "dosefind/likelihood.hpp"
#include "engines_internal.hpp"

namespace dosefind::detail {

namespace {

class TiteEngine : public DesignEngine {
 public:
  TiteEngine(const DesignConfig& cfg, Family f)
      : DesignEngine(cfg), family_(f), base_(make_complete_engine(f, cfg)), tox_(cfg.effective_tox()) {}

  Family family() const override { return family_; }
  Mode mode() const override { return Mode::Tite; }
  std::shared_ptr<const DesignEngine> counterpart() const override { return base_; }

 protected:
  EngineResult finish(Decision dec, nlohmann::json why, const Snapshot& s) const {
    EngineResult r;
    r.decision = dec;
    r.rationale = std::move(why);
    r.rationale["counts"] = tally_json(tally(s, cfg_.grid.J));
    r.rationale["tox_model"] = tox_.label();
    return r;
  }

  Family family_;
  std::shared_ptr<CompleteEngine> base_;
  TimeModelSpec tox_;
};

class TiteCrmEngine : public TiteEngine {
 public:
  explicit TiteCrmEngine(const DesignConfig& cfg)
      : TiteEngine(cfg, Family::Crm), crm_(static_cast<const CrmEngine*>(base_.get())) {}

  EngineResult decide(const Snapshot& s, int d, std::uint64_t seed) const override {
    CrmOptions opt;
    opt.xi_draws = cfg_.xi_draws;
    opt.seed = seed;
    auto post = crm_posterior(crm_->quadrature(), s, tox_, opt);
    Decision dec = crm_decide(post.phat, cfg_.grid.target, d);
    Decision free = crm_decide(post.phat, cfg_.grid.target, cfg_.grid.J);
    return finish(dec, {{"phat", post.phat}, {"ess", post.ess}, {"unrestricted", free.level}}, s);
  }

 private:
  const CrmEngine* crm_;
};

class TiteBoinEngine : public TiteEngine {
 public:
  explicit TiteBoinEngine(const DesignConfig& cfg)
      : TiteEngine(cfg, Family::Boin), boin_(static_cast<const BoinEngine*>(base_.get())) {}

  EngineResult decide(const Snapshot& s, int d, std::uint64_t) const override {
    ObservedData od = observe(s, cfg_.grid.J);
    TimeModel tm(tox_, s);
    const auto& dd = od.doses[d - 1];
    const int r = static_cast<int>(dd.pending_v.size());
    const int N = dd.n + dd.m + r;
    if (N == 0) return finish(Decision::stay(d), {{"note", "no patients at the current dose"}}, s);
    std::vector<double> rho;
    for (double v : dd.pending_v) rho.push_back(tm.weight(v, tm.point()));
    double p = static_cast<double>(dd.n) / N;
    bool converged = r == 0;
    for (int it = 0; it < 100 && !converged; ++it) {
      double y = 0.0;
      for (double w : rho) y += pending_dlt_prob(p, w);
      double np = (dd.n + y) / N;
      converged = std::fabs(np - p) < 1e-10;
      p = np;
    }
    nlohmann::json why{{"lambda_l", boin_->bounds().lambda_l}, {"lambda_r", boin_->bounds().lambda_r}};
    if (!converged) {
      p = static_cast<double>(dd.n) / N;
      why["warning"] = "fixed point did not converge; using n/N";
    }
    why["phat"] = p;
    return finish(boin_->from_estimate(p, d), why, s);
  }

 private:
  const BoinEngine* boin_;
};

// TITE-TPI and TITE-keyboard: interval probabilities of p_d with the pending
// outcomes integrated out.
class TiteIntervalEngine : public TiteEngine {
 public:
  TiteIntervalEngine(const DesignConfig& cfg, Family f) : TiteEngine(cfg, f) {
    if (f == Family::Mtpi2) {
      auto* b = static_cast<const Mtpi2Engine*>(base_.get());
      prior_ = &b->prior();
      part_ = &b->partition();
      pick_ = [b](const std::vector<double>& pr, int d) { return b->from_probs(pr, d); };
    } else {
      auto* b = static_cast<const KeyboardEngine*>(base_.get());
      prior_ = &b->prior();
      part_ = &b->partition();
      pick_ = [b](const std::vector<double>& pr, int d) { return b->from_probs(pr, d); };
    }
  }

  EngineResult decide(const Snapshot& s, int d, std::uint64_t seed) const override {
    ObservedData od = observe(s, cfg_.grid.J);
    TimeModel tm(tox_, s);
    CollapseOptions opt;
    opt.xi_draws = cfg_.xi_draws;
    opt.seed = seed;
    auto pp = collapse_pending(od, tm, *prior_, opt);
    const auto& dd = od.doses[d - 1];
    auto pr = mixture_interval_probs(*prior_, dd, pp.k_probs[d - 1]);
    nlohmann::json probs = nlohmann::json::array();
    for (std::size_t k = 0; k < pr.size(); ++k)
      probs.push_back({{"lo", part_->edges[k]}, {"hi", part_->edges[k + 1]}, {"prob", pr[k]}});
    return finish(pick_(pr, d), {{"interval_probs", probs}, {"pending_dlt_pmf", pp.k_probs[d - 1]}, {"ess", pp.ess}},
                  s);
  }

 private:
  const CountPrior* prior_ = nullptr;
  const IntervalPartition* part_ = nullptr;
  std::function<Decision(const std::vector<double>&, int)> pick_;
};

class TiteSpmEngine : public TiteEngine {
 public:
  explicit TiteSpmEngine(const DesignConfig& cfg)
      : TiteEngine(cfg, Family::Spm), spm_(static_cast<const SpmEngine*>(base_.get())) {}

  EngineResult decide(const Snapshot& s, int d, std::uint64_t seed) const override {
    auto gp = gamma_posterior(s, seed);
    return finish(spm_decide(gp, d), {{"gamma_probs", gp}}, s);
  }

  std::vector<double> gamma_posterior(const Snapshot& s, std::uint64_t seed) const {
    const int J = cfg_.grid.J;
    const auto& post = spm_->posterior();
    ObservedData od = observe(s, J);
    TimeModel tm(tox_, s);
    Rng rng = make_rng(seed, 31);
    const int S = tm.learned() ? cfg_.xi_draws : 1;
    std::vector<double> acc(J, kNegInf), lw(J), w;
    std::vector<double> xi = tm.point();
    for (int k = 0; k < S; ++k) {
      if (tm.learned()) tm.draw_complete_case(rng, xi);
      std::vector<std::vector<double>> le(J);
      for (int z = 0; z < J; ++z) {
        w.clear();
        for (double v : od.doses[z].pending_v) w.push_back(1.0 - tm.weight(v, xi));
        le[z] = log_elementary_symmetric(w);
      }
      for (int g = 0; g < J; ++g) {
        double l = post.model().kappa[g] > 0.0 ? std::log(post.model().kappa[g]) : kNegInf;
        for (int z = 0; z < J && l != kNegInf; ++z) {
          const auto& dd = od.doses[z];
          const int r = static_cast<int>(dd.pending_v.size());
          double m = kNegInf;
          for (int j = 0; j <= r; ++j) m = log_add(m, le[z][j] + post.log_marginal(z, g, dd.n + j, dd.m + r - j));
          l += m;
        }
        lw[g] = l;
      }
      for (int g = 0; g < J; ++g) acc[g] = log_add(acc[g], lw[g]);
    }
    double zn = log_sum_exp(acc);
    for (double& v : acc) v = std::exp(v - zn);
    return acc;
  }

 private:
  const SpmEngine* spm_;
};

class TiteI3Engine : public TiteEngine {
 public:
  explicit TiteI3Engine(const DesignConfig& cfg) : TiteEngine(cfg, Family::I3) {}

  EngineResult decide(const Snapshot& s, int d, std::uint64_t) const override {
    ObservedData od = observe(s, cfg_.grid.J);
    const auto& dd = od.doses[d - 1];
    const int N = dd.n + dd.m + static_cast<int>(dd.pending_v.size());
    if (N == 0) return finish(Decision::stay(d), {{"note", "no patients at the current dose"}}, s);
    std::vector<double> rho;
    for (double v : dd.pending_v) rho.push_back(std::clamp(v / s.window, 0.0, 1.0));
    double p = score_root(dd.n, dd.m, rho);
    Decision dec = i3_rule(p, (N * p - 1.0) / N, cfg_.grid, d);
    return finish(dec, {{"phat", p}, {"effective_dlts", N * p}}, s);
  }
};

}  // namespace

std::shared_ptr<DesignEngine> make_tite_engine(Family f, const DesignConfig& cfg) {
  switch (f) {
    case Family::Crm: return std::make_shared<TiteCrmEngine>(cfg);
    case Family::Boin: return std::make_shared<TiteBoinEngine>(cfg);
    case Family::Mtpi2:
    case Family::Keyboard: return std::make_shared<TiteIntervalEngine>(cfg, f);
    case Family::Spm: return std::make_shared<TiteSpmEngine>(cfg);
    case Family::I3: return std::make_shared<TiteI3Engine>(cfg);
  }
  throw InputError("unknown family");
}

}  // namespace dosefind::detail
