#pragma once

#include <vector>

#include "dosefind/trial_core.hpp"

namespace testing {

// Assessed patients: (dose, dlt) pairs; pending: (dose, followup) pairs.
inline dosefind::Snapshot make_snapshot(const std::vector<std::pair<int, bool>>& assessed,
                                        const std::vector<std::pair<int, double>>& pending, double W = 28.0,
                                        double dlt_time = 10.0) {
  dosefind::Snapshot s;
  s.window = W;
  s.clock = 100.0;
  int id = 1;
  for (auto [d, y] : assessed) {
    dosefind::PatientState p;
    p.id = id++;
    p.dose = d;
    p.dlt = y;
    p.assessed = true;
    p.followup = y ? dlt_time : W;
    s.patients.push_back(p);
  }
  for (auto [d, v] : pending) {
    dosefind::PatientState p;
    p.id = id++;
    p.dose = d;
    p.followup = v;
    s.patients.push_back(p);
  }
  return s;
}

}  // namespace testing
