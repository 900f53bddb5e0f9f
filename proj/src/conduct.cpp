#include "dosefind/conduct.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dosefind/numeric.hpp"
#include "dosefind/sim.hpp"

namespace dosefind {

namespace {

ServiceError bad_request(const std::string& msg) { return ServiceError("invalid_request", 400, msg); }
ServiceError conflict(const std::string& code, const std::string& msg) { return ServiceError(code, 409, msg); }

nlohmann::json status_json(const DoseStatus& s) {
  return {{"excluded", s.excluded},
          {"highest_open", s.highest_open},
          {"lowest_toxic", s.lowest_toxic},
          {"terminated", s.terminated},
          {"suspended", s.suspended}};
}

template <class T>
T field(const nlohmann::json& body, const char* key) {
  if (!body.is_object() || !body.contains(key)) throw bad_request(std::string("missing field `") + key + "`");
  try {
    return body.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw bad_request(std::string("field `") + key + "` has the wrong type");
  }
}

template <class T>
std::optional<T> optional_field(const nlohmann::json& body, const char* key) {
  if (!body.is_object() || !body.contains(key) || body.at(key).is_null()) return std::nullopt;
  return field<T>(body, key);
}

void apply(SessionState& st, const Event& e) {
  const auto& b = e.body;
  if (e.type == "create") {
    st.id = b.at("id").get<std::string>();
    st.design = b.at("design").get<DesignConfig>();
    st.rules = b.at("rules").get<RuleConfig>();
    st.seed = b.at("seed").get<std::uint64_t>();
    st.cohort = b.value("cohort", 1);
    st.status.excluded.assign(st.design.grid.J, false);
    st.status.highest_open = st.design.grid.J;
    st.last_time = 0.0;
    return;
  }
  if (e.time < st.last_time) throw InputError("event log is not time ordered");
  st.last_time = e.time;
  if (e.type == "enroll") {
    ConductPatient p;
    p.id = b.at("patient").get<int>();
    p.dose = b.at("dose").get<int>();
    p.enroll = e.time;
    const bool start = b.value("cohort_start", true);
    if (start && !st.patients.empty())
      st.decisions.push_back({e.time, st.current_dose(), p.dose, static_cast<int>(st.patients.size())});
    st.cohort_left = start ? st.cohort - 1 : std::max(st.cohort_left - 1, 0);
    st.patients.push_back(p);
  } else if (e.type == "outcome") {
    int id = b.at("patient").get<int>();
    if (id < 1 || id > static_cast<int>(st.patients.size())) throw InputError("outcome for an unknown patient");
    auto& p = st.patients[id - 1];
    p.dlt = b.at("dlt").get<bool>();
    p.dlt_time = *p.dlt ? b.at("dlt_time").get<double>() : st.design.grid.window;
    p.resolved_at = e.time;
    st.status = reopen_on_resolution(st.status, tally(st.snapshot_at(e.time), st.design.grid.J), st.design.grid.target,
                                     st.rules.effective_nu(), st.rules.min_assessed);
    if (st.status.terminated) st.terminated = true;
  } else if (e.type == "complete") {
    st.completed = true;
  } else {
    throw InputError("unknown event type `" + e.type + "`");
  }
}

}  // namespace

void to_json(nlohmann::json& j, const Event& e) {
  j = nlohmann::json{{"seq", e.seq}, {"type", e.type}, {"time", e.time}, {"body", e.body}};
}

void from_json(const nlohmann::json& j, Event& e) {
  e.seq = j.at("seq").get<long>();
  e.type = j.at("type").get<std::string>();
  e.time = j.at("time").get<double>();
  e.body = j.at("body");
}

Snapshot SessionState::snapshot_at(double tau) const {
  Snapshot s;
  s.clock = tau;
  s.window = design.grid.window;
  for (const auto& p : patients) {
    if (p.enroll > tau) continue;
    PatientState ps;
    ps.id = p.id;
    ps.dose = p.dose;
    if (p.dlt && p.resolved_at <= tau) {
      ps.assessed = true;
      ps.dlt = *p.dlt;
      ps.followup = *p.dlt ? p.dlt_time : s.window;
    } else {
      ps.followup = std::min(tau - p.enroll, s.window);
    }
    s.patients.push_back(ps);
  }
  return s;
}

nlohmann::json SessionState::to_json() const {
  auto pts = nlohmann::json::array();
  for (const auto& p : patients) {
    nlohmann::json j = {{"id", p.id}, {"dose", p.dose}, {"enroll", p.enroll}};
    if (p.dlt) {
      j["dlt"] = *p.dlt;
      if (*p.dlt) j["dlt_time"] = p.dlt_time;
      j["resolved_at"] = p.resolved_at;
    } else {
      j["dlt"] = nullptr;
    }
    pts.push_back(j);
  }
  return {{"id", id},
          {"design", design},
          {"rules", rules},
          {"seed", seed},
          {"cohort", cohort},
          {"cohort_left", cohort_left},
          {"last_time", last_time},
          {"current_dose", current_dose()},
          {"terminated", terminated},
          {"completed", completed},
          {"status", status_json(status)},
          {"tally", tally_json(tally(snapshot_at(last_time), design.grid.J))},
          {"patients", pts}};
}

SessionState replay(const std::vector<Event>& events) {
  if (events.empty() || events.front().type != "create") throw InputError("session log must start with a create event");
  SessionState st;
  for (const auto& e : events) apply(st, e);
  return st;
}

Session::Session(std::string id, const nlohmann::json& config, const std::string& log_path)
    : id_(std::move(id)), log_path_(log_path) {
  if (!config.is_object()) throw ServiceError("invalid_config", 400, "session config must be an object");
  DesignConfig design;
  RuleConfig rules;
  std::uint64_t seed = 1;
  int cohort = 1;
  try {
    design = (config.contains("design") ? config.at("design") : config).get<DesignConfig>();
    nlohmann::json r = RuleConfig::defaults_for(design.engine);
    if (config.contains("rules")) r.merge_patch(config.at("rules"));
    rules = r.get<RuleConfig>();
    rules.validate();
    seed = config.value("seed", seed);
    cohort = config.value("cohort", default_cohort(design.engine));
    if (cohort < 1) throw InputError("cohort must be at least 1");
    engine_ = make_engine(design);
    if (rules.suspension == SuspensionKind::Probability && engine_->mode() != Mode::Pod)
      throw InputError("probability suspension needs a POD design");
  } catch (const ServiceError&) {
    throw;
  } catch (const std::exception& e) {
    throw ServiceError("invalid_config", 400, e.what());
  }
  Event e;
  e.type = "create";
  e.body = {{"id", id_}, {"design", design}, {"rules", rules}, {"seed", seed}, {"cohort", cohort}};
  append(std::move(e));
}

std::shared_ptr<Session> Session::load(const std::string& log_path) {
  std::ifstream in(log_path);
  if (!in) throw InputError("cannot open " + log_path);
  std::shared_ptr<Session> s(new Session());
  s->log_path_ = log_path;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    s->events_.push_back(nlohmann::json::parse(line).get<Event>());
  }
  s->state_ = replay(s->events_);
  s->id_ = s->state_.id;
  s->engine_ = make_engine(s->state_.design);
  return s;
}

void Session::append(Event e) {
  e.seq = static_cast<long>(events_.size());
  apply(state_, e);
  if (!log_path_.empty()) {
    std::ofstream out(log_path_, std::ios::app);
    if (!out) throw ServiceError("storage", 500, "cannot write " + log_path_);
    out << nlohmann::json(e).dump() << '\n';
  }
  events_.push_back(std::move(e));
}

nlohmann::json Session::state() const {
  std::shared_lock lock(mu_);
  return state_.to_json();
}

std::vector<Event> Session::events() const {
  std::shared_lock lock(mu_);
  return events_;
}

nlohmann::json Session::recommend_json(const SessionState& st, double at, Decision* decision) const {
  if (at < st.last_time) throw conflict("time_regression", "recommendation time precedes the last event");
  nlohmann::json out;
  out["at"] = at;
  out["current_dose"] = st.current_dose();
  Snapshot s = st.snapshot_at(at);
  const int J = st.design.grid.J;
  out["tally"] = tally_json(tally(s, J));
  auto overdue = nlohmann::json::array();
  for (const auto& p : st.patients)
    if (!p.dlt && at - p.enroll >= st.design.grid.window) overdue.push_back(p.id);
  out["overdue"] = overdue;
  if (decision) *decision = Decision::terminate();
  if (st.completed) {
    out["decision"] = Decision::terminate();
    out["completed"] = true;
    return out;
  }
  if (st.terminated) {
    out["decision"] = Decision::terminate();
    out["terminated"] = true;
    out["suspended"] = false;
    out["rule_firings"] = {"safety rule 2: lowest dose too toxic"};
    return out;
  }
  if (st.cohort_left > 0 && !st.patients.empty()) {
    // Later cohort members join at the cohort dose unless a safety rule intervenes.
    DoseStatus stt =
        safety_check(tally(s, J), st.design.grid.target, st.rules.effective_nu(), st.rules.min_assessed);
    const int cd = st.current_dose();
    if (!stt.terminated && !stt.suspended && cd <= stt.highest_open) {
      out["decision"] = Decision::assign(cd);
      out["suspended"] = false;
      out["terminated"] = false;
      out["cohort_continues"] = true;
      out["cohort_left"] = st.cohort_left;
      out["rule_firings"] = nlohmann::json::array();
      out["highest_open"] = stt.highest_open;
      if (decision) *decision = Decision::assign(cd);
      return out;
    }
  }
  const std::uint64_t seed = mix_seed(st.seed, events_.size());
  Recommendation rec = recommend(*engine_, s, st.current_dose(), st.rules, seed);
  if (decision) *decision = rec.decision;
  nlohmann::json r = rec;
  r.update(out);
  r["seed"] = seed;
  return r;
}

nlohmann::json Session::recommendation(std::optional<double> at) const {
  std::shared_lock lock(mu_);
  return recommend_json(state_, at.value_or(state_.last_time));
}

nlohmann::json Session::enroll(const nlohmann::json& body) {
  std::unique_lock lock(mu_);
  const double time = field<double>(body, "time");
  const auto dose = optional_field<int>(body, "dose");
  const bool override_rec = body.is_object() && body.value("override", false);
  if (state_.completed) throw conflict("completed", "trial already completed");
  if (time < state_.last_time) throw conflict("time_regression", "enrollment time precedes the last event");
  const int J = state_.design.grid.J;
  if (dose && (*dose < 1 || *dose > J)) throw bad_request("dose out of range");
  Decision dec;
  nlohmann::json rec = recommend_json(state_, time, &dec);
  std::optional<int> recommended;
  if (dec.enrolls()) recommended = dec.level;
  if (!recommended && !override_rec)
    throw conflict(rec.value("terminated", false) ? "terminated" : "suspended",
                   "enrollment is " + std::string(rec.value("terminated", false) ? "terminated" : "suspended") +
                       "; pass override to enroll anyway");
  if (!recommended && !dose) throw bad_request("an overriding enrollment needs an explicit dose");
  const int level = dose.value_or(*recommended);
  if (recommended && level != *recommended && !override_rec)
    throw conflict("dose_mismatch", "recommended dose is " + std::to_string(*recommended));
  Event e;
  e.type = "enroll";
  e.time = time;
  e.body = {{"patient", static_cast<int>(state_.patients.size()) + 1},
            {"dose", level},
            {"recommended", recommended ? nlohmann::json(*recommended) : nlohmann::json(nullptr)},
            {"override", override_rec && (!recommended || level != *recommended)},
            {"cohort_start", !rec.value("cohort_continues", false) || level != *recommended},
            {"seed", rec.value("seed", std::uint64_t{0})}};
  append(e);
  return {{"patient", e.body["patient"]}, {"dose", level}, {"override", e.body["override"]},
          {"recommended", e.body["recommended"]}, {"state", state_.to_json()}};
}

namespace {

// Validates one outcome report and returns (dlt, dlt_time, report time).
std::tuple<bool, double, double> check_outcome(const SessionState& st, const nlohmann::json& r, double floor) {
  const int id = field<int>(r, "patient");
  if (id < 1 || id > static_cast<int>(st.patients.size()))
    throw ServiceError("unknown_patient", 404, "no patient " + std::to_string(id));
  const auto& p = st.patients[id - 1];
  if (p.dlt) throw conflict("already_resolved", "patient " + std::to_string(id) + " already has an outcome");
  const bool dlt = field<bool>(r, "dlt");
  const double W = st.design.grid.window;
  double v = W;
  if (dlt) {
    v = field<double>(r, "dlt_time");
    if (!(v > 0.0) || v > W) throw bad_request("DLT time must lie in (0, W]");
  }
  const double natural = p.enroll + v;
  const double t = optional_field<double>(r, "time").value_or(std::max(natural, floor));
  if (t < natural - 1e-9)
    throw bad_request(dlt ? "outcome reported before the DLT occurred" : "no-DLT outcome reported before the window ends");
  if (t < floor) throw conflict("time_regression", "outcome time precedes the last event");
  return {dlt, v, t};
}

}  // namespace

nlohmann::json Session::outcome(const nlohmann::json& body) {
  std::unique_lock lock(mu_);
  if (state_.completed) throw conflict("completed", "trial already completed");
  auto [dlt, v, t] = check_outcome(state_, body, state_.last_time);
  Event e;
  e.type = "outcome";
  e.time = t;
  e.body = {{"patient", body.at("patient")}, {"dlt", dlt}};
  if (dlt) e.body["dlt_time"] = v;
  append(e);
  return {{"patient", e.body["patient"]}, {"time", t}, {"state", state_.to_json()}};
}

nlohmann::json Session::what_if(const nlohmann::json& body) const {
  std::shared_lock lock(mu_);
  if (!body.is_object()) throw bad_request("what-if body must be an object");
  SessionState st = state_;
  auto at = optional_field<double>(body, "at");
  const auto res = body.contains("resolutions") ? body.at("resolutions") : nlohmann::json::array();
  if (!res.is_array()) throw bad_request("`resolutions` must be a list");
  double t_max = at.value_or(st.last_time);
  std::vector<std::tuple<int, bool, double>> hyp;
  for (const auto& r : res) {
    auto [dlt, v, t] = check_outcome(st, r, st.last_time);
    (void)t;
    const int id = r.at("patient").get<int>();
    const double natural = st.patients[id - 1].enroll + v;
    if (!at) t_max = std::max(t_max, natural);
    hyp.emplace_back(id, dlt, v);
  }
  for (const auto& [id, dlt, v] : hyp) {
    auto& p = st.patients[id - 1];
    if (p.enroll + v > t_max + 1e-9) throw bad_request("hypothetical outcome lies after the what-if time");
    p.dlt = dlt;
    p.dlt_time = v;
    p.resolved_at = t_max;
  }
  st.status = reopen_on_resolution(st.status, tally(st.snapshot_at(t_max), st.design.grid.J), st.design.grid.target,
                                   st.rules.effective_nu(), st.rules.min_assessed);
  if (st.status.terminated) st.terminated = true;
  nlohmann::json out = recommend_json(st, t_max);
  out["hypothetical"] = true;
  return out;
}

nlohmann::json Session::complete(const nlohmann::json&) {
  std::unique_lock lock(mu_);
  if (state_.completed) throw conflict("completed", "trial already completed");
  const int J = state_.design.grid.J;
  std::vector<int> n(J, 0), m(J, 0);
  for (const auto& p : state_.patients) {
    if (!p.dlt) throw conflict("pending_outcomes", "patient " + std::to_string(p.id) + " is still pending");
    (*p.dlt ? n : m)[p.dose - 1]++;
  }
  auto cp = std::dynamic_pointer_cast<const CompleteEngine>(engine_->counterpart());
  MtdSelection sel = select_mtd(*cp, n, m, state_.rules.effective_nu(), state_.terminated);
  Event e;
  e.type = "complete";
  e.time = state_.last_time;
  e.body = {{"mtd", sel.dose ? nlohmann::json(*sel.dose) : nlohmann::json(nullptr)}};
  append(e);
  return {{"selection", sel}, {"terminated", state_.terminated}, {"state", state_.to_json()}};
}

nlohmann::json Session::audit() const {
  std::shared_lock lock(mu_);
  nlohmann::json out;
  out["events"] = events_;
  auto dec = nlohmann::json::array();
  int overrides = 0;
  for (const auto& e : events_)
    if (e.type == "enroll") {
      dec.push_back({{"time", e.time}, {"patient", e.body["patient"]}, {"dose", e.body["dose"]},
                     {"recommended", e.body["recommended"]}, {"override", e.body["override"]}, {"seed", e.body["seed"]}});
      if (e.body["override"].get<bool>()) ++overrides;
    }
  out["decisions"] = dec;
  out["overrides"] = overrides;
  bool resolved = true;
  std::vector<PatientRecord> recs;
  for (const auto& p : state_.patients) {
    if (!p.dlt) resolved = false;
    PatientRecord r;
    r.id = p.id;
    r.dose = p.dose;
    r.enroll = p.enroll;
    if (p.dlt && *p.dlt) r.dlt_time = p.dlt_time;
    recs.push_back(r);
  }
  // Replays every decision against complete data once all outcomes are known.
  if (resolved)
    out["incompatibility"] = incompatibility_audit(*engine_->counterpart(), state_.decisions, recs, state_.design.grid.window);
  else
    out["incompatibility"] = nullptr;
  return out;
}

ConductService::ConductService(std::string log_dir) : log_dir_(std::move(log_dir)) {
  if (log_dir_.empty()) return;
  namespace fs = std::filesystem;
  fs::create_directories(log_dir_);
  std::vector<fs::path> files;
  for (const auto& f : fs::directory_iterator(log_dir_))
    if (f.path().extension() == ".jsonl") files.push_back(f.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto s = Session::load(f.string());
    sessions_[s->id()] = s;
    if (s->id().size() > 1) next_ = std::max(next_, std::stol(s->id().substr(1)) + 1);
  }
}

std::string ConductService::create_session(const nlohmann::json& config) {
  std::lock_guard lock(mu_);
  std::ostringstream id;
  id << 's' << std::setw(6) << std::setfill('0') << next_;
  std::string path = log_dir_.empty() ? "" : (std::filesystem::path(log_dir_) / (id.str() + ".jsonl")).string();
  auto s = std::make_shared<Session>(id.str(), config, path);
  ++next_;
  sessions_[id.str()] = s;
  return id.str();
}

std::shared_ptr<Session> ConductService::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError("not_found", 404, "no session " + id);
  return it->second;
}

std::vector<std::string> ConductService::ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [k, v] : sessions_) out.push_back(k);
  return out;
}

}  // namespace dosefind
