#include "dosefind/trial_core.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace dosefind {

void DoseGrid::validate() const {
  if (J < 1) throw InputError("J must be at least 1");
  if (!(target > 0.0 && target < 1.0)) throw InputError("target must lie in (0,1)");
  if (eps1 < 0.0 || eps2 < 0.0) throw InputError("eps1 and eps2 must be non-negative");
  if (!(target - eps1 > 0.0)) throw InputError("target - eps1 must be positive");
  if (!(target + eps2 < 1.0)) throw InputError("target + eps2 must be below 1");
  if (!(window > 0.0)) throw InputError("window must be positive");
}

int Snapshot::pending_count() const {
  int r = 0;
  for (const auto& p : patients) r += p.assessed ? 0 : 1;
  return r;
}

Snapshot snapshot(const std::vector<PatientRecord>& patients, double tau, double window) {
  if (tau < 0.0) throw InputError("snapshot time is negative");
  if (!(window > 0.0)) throw InputError("window must be positive");
  Snapshot s;
  s.clock = tau;
  s.window = window;
  s.patients.reserve(patients.size());
  for (const auto& p : patients) {
    if (p.enroll > tau) throw InputError("patient " + std::to_string(p.id) + " enrolls after the snapshot time");
    double u = std::min(std::max(tau - p.enroll, 0.0), window);
    PatientState st;
    st.id = p.id;
    st.dose = p.dose;
    if (p.dlt_time && *p.dlt_time <= u) {
      st.dlt = true;
      st.followup = *p.dlt_time;
      st.assessed = true;
    } else {
      st.followup = u;
      st.assessed = (u >= window);
    }
    s.patients.push_back(st);
  }
  return s;
}

DoseTally tally(const Snapshot& s, int J) {
  DoseTally t(static_cast<std::size_t>(std::max(J, 0)));
  for (const auto& p : s.patients) {
    if (p.dose < 1 || p.dose > J) throw InputError("dose index out of range");
    auto& c = t[p.dose - 1];
    ++c.N;
    if (!p.assessed) ++c.r;
    else if (p.dlt) ++c.n;
    else ++c.m;
  }
  return t;
}

DoseTally complete_tally(const std::vector<PatientRecord>& patients, int J, double window) {
  DoseTally t(static_cast<std::size_t>(J));
  for (const auto& p : patients) {
    if (p.dose < 1 || p.dose > J) throw InputError("dose index out of range");
    auto& c = t[p.dose - 1];
    ++c.N;
    if (p.dlt_time && *p.dlt_time <= window) ++c.n;
    else ++c.m;
  }
  return t;
}

Decision Decision::escalate(int d, int J) { return {Action::Escalate, std::min(d + 1, J)}; }
Decision Decision::stay(int d) { return {Action::Stay, d}; }
Decision Decision::deescalate(int d) { return {Action::DeEscalate, std::max(d - 1, 1)}; }
Decision Decision::assign(int level) { return {Action::Assign, level}; }
Decision Decision::suspend(int d) { return {Action::Suspend, d}; }
Decision Decision::terminate() { return {Action::Terminate, 0}; }

std::string to_string(Action a) {
  switch (a) {
    case Action::Escalate: return "escalate";
    case Action::Stay: return "stay";
    case Action::DeEscalate: return "de-escalate";
    case Action::Assign: return "assign";
    case Action::Suspend: return "suspend";
    case Action::Terminate: return "terminate";
  }
  return "?";
}

std::string to_string(const Decision& d) {
  if (d.action == Action::Terminate) return "terminate";
  return to_string(d.action) + " (dose " + std::to_string(d.level) + ")";
}

int direction(int level, int current) { return level > current ? 1 : (level < current ? -1 : 0); }

void to_json(nlohmann::json& j, const PatientRecord& p) {
  j = nlohmann::json{{"id", p.id}, {"dose", p.dose}, {"enroll", p.enroll}};
  if (p.dlt_time) j["dlt_time"] = *p.dlt_time;
}

void from_json(const nlohmann::json& j, PatientRecord& p) {
  p.id = j.at("id").get<int>();
  p.dose = j.at("dose").get<int>();
  p.enroll = j.value("enroll", 0.0);
  if (j.contains("dlt_time") && !j["dlt_time"].is_null()) {
    double t = j["dlt_time"].get<double>();
    if (!(t > 0.0)) throw InputError("dlt_time must be positive");
    p.dlt_time = t;
  } else {
    p.dlt_time.reset();
  }
}

void to_json(nlohmann::json& j, const PatientState& p) {
  j = nlohmann::json{{"id", p.id}, {"dose", p.dose}, {"followup", p.followup}, {"dlt", p.dlt}, {"assessed", p.assessed}};
}

void from_json(const nlohmann::json& j, PatientState& p) {
  p.id = j.at("id").get<int>();
  p.dose = j.at("dose").get<int>();
  p.followup = j.at("followup").get<double>();
  p.dlt = j.value("dlt", false);
  p.assessed = j.value("assessed", p.dlt);
}

void to_json(nlohmann::json& j, const Snapshot& s) {
  j = nlohmann::json{{"clock", s.clock}, {"window", s.window}, {"patients", s.patients}};
}

void from_json(const nlohmann::json& j, Snapshot& s) {
  s.clock = j.value("clock", 0.0);
  s.window = j.value("window", 28.0);
  s.patients = j.value("patients", std::vector<PatientState>{});
}

void to_json(nlohmann::json& j, const DoseGrid& g) {
  j = nlohmann::json{{"J", g.J}, {"target", g.target}, {"eps1", g.eps1}, {"eps2", g.eps2}, {"window", g.window}};
}

void from_json(const nlohmann::json& j, DoseGrid& g) {
  g.J = j.value("J", g.J);
  g.target = j.value("target", g.target);
  g.eps1 = j.value("eps1", g.eps1);
  g.eps2 = j.value("eps2", g.eps2);
  g.window = j.value("window", g.window);
}

void to_json(nlohmann::json& j, const Decision& d) {
  j = nlohmann::json{{"action", to_string(d.action)}, {"level", d.level}};
}

void write_records(std::ostream& os, const std::vector<PatientRecord>& patients) {
  for (const auto& p : patients) os << nlohmann::json(p).dump() << '\n';
}

std::vector<PatientRecord> read_records(std::istream& is) {
  std::vector<PatientRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(nlohmann::json::parse(line).get<PatientRecord>());
  }
  return out;
}

void write_snapshot(std::ostream& os, const Snapshot& s) {
  os << nlohmann::json{{"clock", s.clock}, {"window", s.window}}.dump() << '\n';
  for (const auto& p : s.patients) os << nlohmann::json(p).dump() << '\n';
}

Snapshot read_snapshot(std::istream& is) {
  Snapshot s;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line);
    if (!header && j.contains("clock") && !j.contains("id")) {
      s.clock = j.at("clock").get<double>();
      s.window = j.value("window", 28.0);
      header = true;
      continue;
    }
    s.patients.push_back(j.get<PatientState>());
  }
  return s;
}

}  // namespace dosefind
