#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "dosefind/engine.hpp"
#include "dosefind/mtd_select.hpp"
#include "dosefind/rules.hpp"

namespace dosefind {

struct ServiceError : std::runtime_error {
  ServiceError(std::string code, int status, const std::string& message)
      : std::runtime_error(message), code(std::move(code)), status(status) {}
  std::string code;  // machine-readable
  int status;        // HTTP status
};

// One line of a session log.
struct Event {
  long seq = 0;
  std::string type;  // create, enroll, outcome, complete
  double time = 0.0;
  nlohmann::json body;
};

void to_json(nlohmann::json& j, const Event& e);
void from_json(const nlohmann::json& j, Event& e);

struct ConductPatient {
  int id = 0;
  int dose = 1;
  double enroll = 0.0;
  std::optional<bool> dlt;      // absent while pending
  double dlt_time = 0.0;        // follow-up time of the DLT
  double resolved_at = 0.0;     // calendar time the outcome was reported
};

// Derived state: a pure fold of the event log.
struct SessionState {
  std::string id;
  DesignConfig design;
  RuleConfig rules;
  std::uint64_t seed = 0;
  int cohort = 1;       // patients per dose decision
  int cohort_left = 0;  // open slots in the current cohort
  std::vector<ConductPatient> patients;
  double last_time = 0.0;
  bool terminated = false;
  bool completed = false;
  DoseStatus status;
  std::vector<DecisionEvent> decisions;

  int current_dose() const { return patients.empty() ? 1 : patients.back().dose; }
  // Known outcomes at time tau; unreported outcomes stay pending.
  Snapshot snapshot_at(double tau) const;
  nlohmann::json to_json() const;
};

// Rebuilds the derived state from an event log.
SessionState replay(const std::vector<Event>& events);

class Session {
 public:
  Session(std::string id, const nlohmann::json& config, const std::string& log_path);
  static std::shared_ptr<Session> load(const std::string& log_path);

  const std::string& id() const { return id_; }
  nlohmann::json state() const;
  std::vector<Event> events() const;

  nlohmann::json enroll(const nlohmann::json& body);
  nlohmann::json outcome(const nlohmann::json& body);
  nlohmann::json recommendation(std::optional<double> at) const;
  nlohmann::json what_if(const nlohmann::json& body) const;
  nlohmann::json complete(const nlohmann::json& body);
  nlohmann::json audit() const;

 private:
  Session() = default;
  void append(Event e);
  nlohmann::json recommend_json(const SessionState& st, double at, Decision* decision = nullptr) const;

  std::string id_;
  std::string log_path_;
  std::vector<Event> events_;
  SessionState state_;
  std::shared_ptr<DesignEngine> engine_;
  mutable std::shared_mutex mu_;
};

class ConductService {
 public:
  // Logs go to `log_dir` when non-empty; existing logs there are replayed.
  explicit ConductService(std::string log_dir = "");

  std::string create_session(const nlohmann::json& config);
  std::shared_ptr<Session> get(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::string log_dir_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  long next_ = 1;
  mutable std::mutex mu_;
};

}  // namespace dosefind
