#pragma once

#include <optional>
#include <vector>

#include "dosefind/engine.hpp"

namespace dosefind {

// Weighted least-squares projection onto non-decreasing sequences.
std::vector<double> pava(const std::vector<double>& values, const std::vector<double>& weights);

struct MtdSelection {
  std::optional<int> dose;       // 1-based
  std::vector<double> estimates; // per dose: isotonic rates, posterior means, or MTD posterior
  std::vector<bool> candidate;   // tried and not excluded
};

void to_json(nlohmann::json& j, const MtdSelection& s);

// End-of-trial selection from complete outcomes with the rule of the design family.
MtdSelection select_mtd(const CompleteEngine& base, const std::vector<int>& n, const std::vector<int>& m, double nu,
                        bool terminated);

}  // namespace dosefind
