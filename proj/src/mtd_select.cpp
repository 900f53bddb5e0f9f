#include "dosefind/mtd_select.hpp"

#include <cmath>
#include <limits>

#include "dosefind/rules.hpp"
#include "engines_internal.hpp"

namespace dosefind {

std::vector<double> pava(const std::vector<double>& values, const std::vector<double>& weights) {
  if (values.empty()) throw InputError("PAVA needs at least one value");
  if (values.size() != weights.size()) throw InputError("PAVA values and weights differ in length");
  struct Block {
    double mean, weight;
    std::size_t count;
  };
  std::vector<Block> st;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(weights[i] > 0.0)) throw InputError("PAVA weights must be positive");
    st.push_back({values[i], weights[i], 1});
    while (st.size() > 1 && st[st.size() - 2].mean > st.back().mean) {
      Block b = st.back();
      st.pop_back();
      Block& a = st.back();
      double w = a.weight + b.weight;
      a.mean = (a.mean * a.weight + b.mean * b.weight) / w;
      a.weight = w;
      a.count += b.count;
    }
  }
  std::vector<double> out;
  for (const auto& b : st) out.insert(out.end(), b.count, b.mean);
  return out;
}

void to_json(nlohmann::json& j, const MtdSelection& s) {
  j = nlohmann::json::object();
  j["mtd"] = s.dose ? nlohmann::json(*s.dose) : nlohmann::json(nullptr);
  auto est = nlohmann::json::array();
  for (double v : s.estimates) est.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  j["estimates"] = est;
  j["candidates"] = s.candidate;
}

namespace {

// Ties go to the higher dose below the target and to the lower dose above it.
std::optional<int> closest(const std::vector<double>& est, const std::vector<bool>& cand, double target) {
  std::optional<int> best;
  for (std::size_t z = 0; z < est.size(); ++z) {
    if (!cand[z]) continue;
    const double dz = std::fabs(est[z] - target);
    if (!best) {
      best = static_cast<int>(z);
      continue;
    }
    const double db = std::fabs(est[*best] - target);
    if (dz < db - 1e-12 || (dz <= db + 1e-12 && est[z] <= target)) best = static_cast<int>(z);
  }
  return best;
}

}  // namespace

MtdSelection select_mtd(const CompleteEngine& base, const std::vector<int>& n, const std::vector<int>& m, double nu,
                        bool terminated) {
  const auto& g = base.grid();
  const int J = g.J;
  if (static_cast<int>(n.size()) != J || static_cast<int>(m.size()) != J) throw InputError("counts must have J entries");
  MtdSelection sel;
  sel.estimates.assign(J, std::numeric_limits<double>::quiet_NaN());
  sel.candidate.assign(J, false);
  if (terminated) return sel;

  DoseTally t(J);
  for (int z = 0; z < J; ++z) {
    t[z].n = n[z];
    t[z].m = m[z];
    t[z].N = n[z] + m[z];
  }
  DoseStatus st = safety_check(t, g.target, nu);
  for (int z = 0; z < J; ++z) sel.candidate[z] = n[z] + m[z] > 0 && !st.excluded[z];

  std::optional<int> pick;
  switch (base.family()) {
    case Family::Crm: {
      sel.estimates = static_cast<const detail::CrmEngine&>(base).estimate(n, m);
      pick = closest(sel.estimates, sel.candidate, g.target);
      break;
    }
    case Family::Spm: {
      sel.estimates = static_cast<const detail::SpmEngine&>(base).posterior().gamma_probs(n, m);
      for (int z = 0; z < J; ++z)
        if (sel.candidate[z] && (!pick || sel.estimates[z] > sel.estimates[*pick] * (1.0 + 1e-12))) pick = z;
      break;
    }
    default: {
      std::vector<double> rate, w;
      std::vector<int> idx;
      for (int z = 0; z < J; ++z)
        if (n[z] + m[z] > 0) {
          idx.push_back(z);
          rate.push_back(static_cast<double>(n[z]) / (n[z] + m[z]));
          w.push_back(n[z] + m[z]);
        }
      if (idx.empty()) break;
      auto fit = pava(rate, w);
      for (std::size_t i = 0; i < idx.size(); ++i) sel.estimates[idx[i]] = fit[i];
      pick = closest(sel.estimates, sel.candidate, g.target);
      const bool capped = base.family() == Family::Mtpi2 || base.family() == Family::I3;
      if (pick && capped && sel.estimates[*pick] > g.target + g.eps2 + 1e-12) {
        pick.reset();
        for (int z = 0; z < J; ++z)
          if (sel.candidate[z] && sel.estimates[z] < g.target + g.eps2 - 1e-12) pick = z;
      }
    }
  }
  if (pick) sel.dose = *pick + 1;
  return sel;
}

}  // namespace dosefind
