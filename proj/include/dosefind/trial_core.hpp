#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace dosefind {

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UnsupportedError : std::logic_error {
  using std::logic_error::logic_error;
};

struct DoseGrid {
  int J = 7;
  double target = 0.3;
  double eps1 = 0.05;
  double eps2 = 0.05;
  double window = 28.0;

  void validate() const;
};

struct PatientRecord {
  int id = 0;
  int dose = 1;
  double enroll = 0.0;
  // Time from enrollment to DLT. Absent means no DLT ever.
  std::optional<double> dlt_time;
};

struct PatientState {
  int id = 0;
  int dose = 1;
  double followup = 0.0;
  bool dlt = false;
  bool assessed = false;
};

struct Snapshot {
  double clock = 0.0;
  double window = 28.0;
  std::vector<PatientState> patients;

  int pending_count() const;
};

Snapshot snapshot(const std::vector<PatientRecord>& patients, double tau, double window);

struct DoseCounts {
  int N = 0;
  int n = 0;  // DLTs among assessed
  int m = 0;  // non-DLTs among assessed
  int r = 0;  // pending
};

// Indexed by dose level minus one.
using DoseTally = std::vector<DoseCounts>;

DoseTally tally(const Snapshot& s, int J);
// Outcomes treated as fully resolved (ground truth Y = [T <= W]).
DoseTally complete_tally(const std::vector<PatientRecord>& patients, int J, double window);

enum class Action { Escalate, Stay, DeEscalate, Assign, Suspend, Terminate };

struct Decision {
  Action action = Action::Stay;
  int level = 1;  // resulting dose; 0 for Terminate

  static Decision escalate(int d, int J);
  static Decision stay(int d);
  static Decision deescalate(int d);
  static Decision assign(int level);
  static Decision suspend(int d);
  static Decision terminate();

  bool enrolls() const { return action != Action::Suspend && action != Action::Terminate; }
  bool operator==(const Decision&) const = default;
};

std::string to_string(Action a);
std::string to_string(const Decision& d);

// Direction of a resulting dose relative to the current dose: -1, 0, +1.
int direction(int level, int current);

void to_json(nlohmann::json& j, const PatientRecord& p);
void from_json(const nlohmann::json& j, PatientRecord& p);
void to_json(nlohmann::json& j, const PatientState& p);
void from_json(const nlohmann::json& j, PatientState& p);
void to_json(nlohmann::json& j, const Snapshot& s);
void from_json(const nlohmann::json& j, Snapshot& s);
void to_json(nlohmann::json& j, const DoseGrid& g);
void from_json(const nlohmann::json& j, DoseGrid& g);
void to_json(nlohmann::json& j, const Decision& d);

// One JSON object per line.
void write_records(std::ostream& os, const std::vector<PatientRecord>& patients);
std::vector<PatientRecord> read_records(std::istream& is);
void write_snapshot(std::ostream& os, const Snapshot& s);
Snapshot read_snapshot(std::istream& is);

}  // namespace dosefind
