#include <algorithm>
#include <cmath>
#include <map>

#include "dosefind/likelihood.hpp"
#include "engines_internal.hpp"

namespace dosefind::detail {

namespace {

// One mixture component of the posterior predictive of the pending DLT counts:
// the counts are independent across doses given the component.
struct Component {
  double logw = 0.0;
  std::vector<std::vector<double>> pmf;  // per dose, length r_z + 1
};

struct Accumulator {
  std::map<int, PodEntry> by_level;

  void add(const Decision& dec, double w) {
    auto it = by_level.find(dec.level);
    if (it == by_level.end()) {
      PodEntry e;
      e.level = dec.level;
      e.decision = dec;
      it = by_level.emplace(dec.level, e).first;
    }
    it->second.prob += w;
    it->second.possible = true;
  }

  PodDistribution finish(bool exact, double mc_error) {
    PodDistribution pd;
    pd.exact = exact;
    pd.mc_error = mc_error;
    double tot = 0.0;
    for (auto& [lvl, e] : by_level) tot += e.prob;
    for (auto& [lvl, e] : by_level) {
      if (tot > 0.0) e.prob /= tot;
      pd.entries.push_back(e);
    }
    int best = -1;
    for (std::size_t i = 0; i < pd.entries.size(); ++i)
      if (best < 0 || pd.entries[i].prob > pd.entries[best].prob * (1.0 + 1e-12)) best = static_cast<int>(i);
    pd.chosen = pd.entries[best].level;
    return pd;
  }
};

std::vector<double> plugin_pmf(const DoseData& dd, double p, const TimeModel& tm, const std::vector<double>& xi) {
  std::vector<double> q;
  for (double v : dd.pending_v) q.push_back(pending_dlt_prob(p, tm.weight(v, xi)));
  return poisson_binomial(q);
}

class PodEngine : public DesignEngine {
 public:
  PodEngine(const DesignConfig& cfg, Family f)
      : DesignEngine(cfg), family_(f), base_(make_complete_engine(f, cfg)), tox_(cfg.effective_tox()) {
    if (f == Family::Mtpi2) {
      prior_ = &static_cast<const Mtpi2Engine*>(base_.get())->prior();
    } else if (f == Family::Keyboard) {
      prior_ = &static_cast<const KeyboardEngine*>(base_.get())->prior();
    } else {
      flat_ = std::make_shared<CountPrior>(PPrior::beta(1.0, 1.0), std::vector<double>{}, cfg_.cache_n);
      prior_ = flat_.get();
    }
  }

  Family family() const override { return family_; }
  Mode mode() const override { return Mode::Pod; }
  std::shared_ptr<const DesignEngine> counterpart() const override { return base_; }

  EngineResult decide(const Snapshot& s, int d, std::uint64_t seed) const override {
    const int J = cfg_.grid.J;
    ObservedData od = observe(s, J);
    std::vector<int> n(J), m(J), r(J);
    for (int z = 0; z < J; ++z) {
      n[z] = od.doses[z].n;
      m[z] = od.doses[z].m;
      r[z] = static_cast<int>(od.doses[z].pending_v.size());
    }
    nlohmann::json why = nlohmann::json::object();
    PodDistribution pod =
        is_local(family_) ? local_pod(s, od, n, m, d, seed, why) : global_pod(s, od, n, m, r, d, seed, why);

    EngineResult res;
    res.decision = pod.find(pod.chosen)->decision;
    why["pod"] = pod;
    why["counts"] = tally_json(tally(s, J));
    why["tox_model"] = tox_.label();
    res.rationale = std::move(why);
    res.pod = std::move(pod);
    return res;
  }

 private:
  // Interval designs read only the current dose, so the outcome configurations
  // collapse to the number of latent DLTs there.
  PodDistribution local_pod(const Snapshot& s, const ObservedData& od, std::vector<int> n, std::vector<int> m, int d,
                            std::uint64_t seed, nlohmann::json& why) const {
    const auto& dd = od.doses[d - 1];
    const int r = static_cast<int>(dd.pending_v.size());
    std::vector<double> kp{1.0};
    if (r > 0) {
      TimeModel tm = time_model(od);
      CollapseOptions opt;
      opt.xi_draws = cfg_.xi_draws;
      opt.seed = seed;
      opt.plugin = cfg_.pod_plugin;
      if (opt.plugin) opt.plugin_xi = plugin_mle(s).xi;
      ObservedData one = od;
      for (int z = 0; z < static_cast<int>(one.doses.size()); ++z)
        if (z != d - 1) one.doses[z].pending_v.clear();
      auto pp = collapse_pending(one, tm, *prior_, opt);
      kp = pp.k_probs[d - 1];
      why["ess"] = pp.ess;
    }
    why["pending_dlt_pmf"] = kp;
    Accumulator acc;
    const int n0 = n[d - 1], m0 = m[d - 1];
    for (int k = 0; k <= r; ++k) {
      n[d - 1] = n0 + k;
      m[d - 1] = m0 + r - k;
      acc.add(base_->decide_counts(n, m, d), kp[k]);
    }
    return acc.finish(true, 0.0);
  }

  PodDistribution global_pod(const Snapshot& s, const ObservedData& od, const std::vector<int>& n, const std::vector<int>& m,
                             const std::vector<int>& r, int d, std::uint64_t seed, nlohmann::json& why) const {
    const int J = cfg_.grid.J;
    std::vector<int> active;
    double configs = 1.0;
    for (int z = 0; z < J; ++z)
      if (r[z] > 0) {
        active.push_back(z);
        configs *= r[z] + 1;
      }
    Accumulator acc;
    if (active.empty()) {
      acc.add(base_->decide_counts(n, m, d), 1.0);
      return acc.finish(true, 0.0);
    }
    std::vector<Component> comps = components(s, od, seed);
    double mx = kNegInf;
    for (const auto& c : comps) mx = std::max(mx, c.logw);
    std::vector<double> w(comps.size());
    for (std::size_t c = 0; c < comps.size(); ++c) w[c] = std::exp(comps[c].logw - mx);
    double ws = 0.0;
    for (double v : w) ws += v;
    for (double& v : w) v /= ws;
    why["components"] = comps.size();

    std::vector<int> nn = n, mm = m;
    auto decide_k = [&](const std::vector<int>& k) {
      for (std::size_t a = 0; a < active.size(); ++a) {
        int z = active[a];
        nn[z] = n[z] + k[a];
        mm[z] = m[z] + r[z] - k[a];
      }
      return base_->decide_counts(nn, mm, d);
    };

    if (configs <= cfg_.pod_enum_cap) {
      std::vector<int> k(active.size(), 0);
      for (;;) {
        double pr = 0.0;
        for (std::size_t c = 0; c < comps.size(); ++c) {
          if (w[c] == 0.0) continue;
          double t = w[c];
          for (std::size_t a = 0; a < active.size() && t > 0.0; ++a) t *= comps[c].pmf[active[a]][k[a]];
          pr += t;
        }
        acc.add(decide_k(k), pr);
        std::size_t a = 0;
        while (a < active.size() && ++k[a] > r[active[a]]) k[a++] = 0;
        if (a == active.size()) break;
      }
      return acc.finish(true, 0.0);
    }

    // Monte Carlo over outcome configurations; only sampled levels are flagged possible
    Rng rng = make_rng(seed, 37);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::map<std::vector<int>, Decision> memo;
    std::vector<int> k(active.size());
    const int M = cfg_.pod_mc_draws;
    for (int i = 0; i < M; ++i) {
      const auto& c = comps[pick(rng)];
      for (std::size_t a = 0; a < active.size(); ++a) {
        const auto& pmf = c.pmf[active[a]];
        std::discrete_distribution<int> dk(pmf.begin(), pmf.end());
        k[a] = dk(rng);
      }
      auto it = memo.find(k);
      if (it == memo.end()) it = memo.emplace(k, decide_k(k)).first;
      acc.add(it->second, 1.0);
    }
    double worst = 0.0;
    for (auto& [lvl, e] : acc.by_level) {
      double p = e.prob / M;
      worst = std::max(worst, std::sqrt(p * (1.0 - p) / M));
    }
    return acc.finish(false, worst);
  }

  TimeModel time_model(const ObservedData& od) const { return TimeModel(tox_, od.dlt_times, od.window); }

  // MLE of (p, ξ); with no assessed outcome the time model stays at its point value
  MleResult plugin_mle(const Snapshot& s) const {
    try {
      return score_mle(s, tox_, cfg_.grid.J);
    } catch (const InputError&) {
      MleResult r;
      r.xi = TimeModel(tox_, s).point();
      r.p.assign(cfg_.grid.J, 0.0);
      return r;
    } catch (const ConvergenceError& e) {
      return e.last;
    }
  }

  std::vector<Component> components(const Snapshot& s, const ObservedData& od, std::uint64_t seed) const {
    const int J = cfg_.grid.J;
    TimeModel tm = time_model(od);
    std::vector<Component> out;
    if (cfg_.pod_plugin) {
      Component c;
      c.pmf.resize(J);
      MleResult mle = plugin_mle(s);
      for (int z = 0; z < J; ++z) c.pmf[z] = plugin_pmf(od.doses[z], mle.p[z], tm, mle.xi);
      out.push_back(std::move(c));
      return out;
    }
    Rng rng = make_rng(seed, 41);
    const int S = tm.learned() ? cfg_.xi_draws : 1;
    std::vector<double> xi = tm.point();
    for (int sdraw = 0; sdraw < S; ++sdraw) {
      if (tm.learned()) tm.draw_complete_case(rng, xi);
      if (family_ == Family::Crm) crm_components(od, tm, xi, out);
      else spm_components(od, tm, xi, out);
    }
    return out;
  }

  void crm_components(const ObservedData& od, const TimeModel& tm, const std::vector<double>& xi,
                      std::vector<Component>& out) const {
    const auto& grid = static_cast<const CrmEngine*>(base_.get())->quadrature();
    const int J = cfg_.grid.J;
    std::vector<int> n(J), m(J);
    for (int z = 0; z < J; ++z) {
      n[z] = od.doses[z].n;
      m[z] = od.doses[z].m;
    }
    std::vector<double> lw;
    grid.log_post_counts(n, m, lw);
    std::vector<std::vector<double>> rho(J);
    for (int z = 0; z < J; ++z)
      for (double v : od.doses[z].pending_v) {
        double w = tm.weight(v, xi);
        rho[z].push_back(w);
        grid.add_pending(z, w, lw);
      }
    double mx = *std::max_element(lw.begin(), lw.end());
    for (int g = 0; g < grid.size(); ++g) {
      if (lw[g] - mx < -40.0) continue;
      Component c;
      c.logw = lw[g];
      c.pmf.resize(J);
      for (int z = 0; z < J; ++z) {
        std::vector<double> q;
        for (double w : rho[z]) q.push_back(pending_dlt_prob(grid.phi(z, g), w));
        c.pmf[z] = poisson_binomial(q);
      }
      out.push_back(std::move(c));
    }
  }

  void spm_components(const ObservedData& od, const TimeModel& tm, const std::vector<double>& xi,
                      std::vector<Component>& out) const {
    const auto& post = static_cast<const SpmEngine*>(base_.get())->posterior();
    const int J = cfg_.grid.J;
    std::vector<std::vector<double>> le(J);
    for (int z = 0; z < J; ++z) {
      std::vector<double> w;
      for (double v : od.doses[z].pending_v) w.push_back(1.0 - tm.weight(v, xi));
      le[z] = log_elementary_symmetric(w);
    }
    for (int g = 0; g < J; ++g) {
      double kap = post.model().kappa[g];
      if (kap <= 0.0) continue;
      Component c;
      c.logw = std::log(kap);
      c.pmf.resize(J);
      for (int z = 0; z < J; ++z) {
        const auto& dd = od.doses[z];
        const int r = static_cast<int>(dd.pending_v.size());
        std::vector<double> lu(r + 1);
        for (int k = 0; k <= r; ++k) lu[k] = le[z][k] + post.log_marginal(z, g, dd.n + k, dd.m + r - k);
        double zn = log_sum_exp(lu);
        c.logw += zn;
        c.pmf[z].resize(r + 1);
        for (int k = 0; k <= r; ++k) c.pmf[z][k] = std::exp(lu[k] - zn);
      }
      out.push_back(std::move(c));
    }
  }

  Family family_;
  std::shared_ptr<CompleteEngine> base_;
  TimeModelSpec tox_;
  const CountPrior* prior_ = nullptr;
  std::shared_ptr<CountPrior> flat_;
};

}  // namespace

std::shared_ptr<DesignEngine> make_pod_engine(Family f, const DesignConfig& cfg) {
  return std::make_shared<PodEngine>(cfg, f);
}

}  // namespace dosefind::detail
