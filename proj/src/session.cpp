#include "bridgedss/session.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <set>
#include <sstream>

#include "bridgedss/dataset.hpp"
#include "bridgedss/log.hpp"

namespace bdss {

namespace {

constexpr std::array<std::string_view, 3> kStatusNames{"paused", "running", "ended"};
constexpr std::array<std::string_view, 2> kModeNames{"manual", "auto"};
constexpr std::array<std::string_view, 5> kDispositionNames{"pending", "accepted", "overridden", "auto-applied",
                                                            "expired"};
const std::set<std::string> kKinds{"state", "recommendation", "decision", "injection"};

template <typename E, std::size_t N>
E parseName(std::string_view s, const std::array<std::string_view, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  throw ValidationError(fmt::format("unknown {} '{}'", what, s));
}

std::int64_t nowMicros() {
  return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::string_view toString(SessionStatus s) { return kStatusNames.at(static_cast<std::size_t>(s)); }
std::string_view toString(OperatorMode m) { return kModeNames.at(static_cast<std::size_t>(m)); }
std::string_view toString(Disposition d) { return kDispositionNames.at(static_cast<std::size_t>(d)); }
OperatorMode parseOperatorMode(std::string_view s) { return parseName<OperatorMode>(s, kModeNames, "operator mode"); }
Disposition parseDisposition(std::string_view s) { return parseName<Disposition>(s, kDispositionNames, "disposition"); }

nlohmann::json scenarioToJson(const Scenario& s) {
  return {{"weather", toString(s.weather)},   {"dayType", toString(s.dayType)},   {"interval", toString(s.interval)},
          {"season", toString(s.season)},     {"severity", toString(s.severity)}, {"location", s.location},
          {"demandLevel", s.demandLevel}};
}

Scenario scenarioFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("scenario must be a JSON object");
  Scenario s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "weather") {
        s.weather = parseWeather(value.get<std::string>());
      } else if (key == "dayType") {
        s.dayType = parseDayType(value.get<std::string>());
      } else if (key == "interval") {
        s.interval = parseInterval(value.get<std::string>());
      } else if (key == "season") {
        s.season = parseSeason(value.get<std::string>());
      } else if (key == "severity") {
        s.severity = parseSeverity(value.get<std::string>());
      } else if (key == "location") {
        s.location = value.get<int>();
      } else if (key == "demandLevel") {
        s.demandLevel = value.get<int>();
      } else {
        throw ValidationError(fmt::format("unknown scenario field '{}'", key));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed scenario: {}", e.what()));
  }
  validate(s);
  return s;
}

nlohmann::json trafficStateToJson(const TrafficState& s) {
  return {{"density", s.density},         {"rampQueue", s.rampQueue},         {"originQueue", s.originQueue},
          {"elapsed", s.elapsed},         {"detectorSpeed", s.detectorSpeed}, {"detectorOccupancy", s.detectorOccupancy}};
}

TrafficState trafficStateFromJson(const nlohmann::json& j) {
  TrafficState s;
  s.density = j.at("density").get<std::vector<double>>();
  s.rampQueue = j.at("rampQueue").get<double>();
  s.originQueue = j.at("originQueue").get<double>();
  s.elapsed = j.at("elapsed").get<double>();
  s.detectorSpeed = j.at("detectorSpeed").get<double>();
  s.detectorOccupancy = j.at("detectorOccupancy").get<double>();
  return s;
}

nlohmann::json actionToJson(ControlAction a) {
  const auto rate = a.meteringRate();
  return {{"id", a.id()},
          {"label", a.label()},
          {"meteringRate", rate ? nlohmann::json(*rate) : nlohmann::json()},
          {"rerouting", a.reroutingFraction()}};
}

ControlAction actionFromJson(const nlohmann::json& j) {
  try {
    if (j.is_number_integer()) return ControlAction::fromId(j.get<int>());
    if (j.contains("id")) return ControlAction::fromId(j.at("id").get<int>());
    const auto& rate = j.at("meteringRate");
    return ControlAction::fromValues(rate.is_null() ? std::nullopt : std::optional<double>(rate.get<double>()),
                                     j.at("rerouting").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed action: {}", e.what()));
  }
}

nlohmann::json toJson(const Recommendation& r) {
  return {{"id", r.id},
          {"tick", r.tick},
          {"features", r.features},
          {"action", actionToJson(r.action)},
          {"modelId", r.modelId},
          {"latencyMs", r.latencyMs},
          {"disposition", toString(r.disposition)},
          {"applied", r.applied ? actionToJson(*r.applied) : nlohmann::json()}};
}

Injection injectionFromJson(const nlohmann::json& j) {
  try {
    Injection e;
    const auto type = j.at("type").get<std::string>();
    if (type == "weather") {
      e.type = Injection::Type::Weather;
      e.weather = parseWeather(j.at("weather").get<std::string>());
    } else if (type == "incident") {
      e.type = Injection::Type::Incident;
      e.severity = parseSeverity(j.at("severity").get<std::string>());
      e.location = j.at("location").get<int>();
      if (e.severity == Severity::None) throw ValidationError("an incident needs a severity; use type 'clear'");
      if (e.location < 1 || e.location > kLocationCount) {
        throw ValidationError(fmt::format("incident location must be 1..{}", kLocationCount));
      }
    } else if (type == "clear") {
      e.type = Injection::Type::ClearIncident;
    } else {
      throw ValidationError(fmt::format("unknown injection type '{}'", type));
    }
    return e;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed injection: {}", e.what()));
  }
}

nlohmann::json toJson(const Injection& e) {
  switch (e.type) {
    case Injection::Type::Weather: return {{"type", "weather"}, {"weather", toString(e.weather)}};
    case Injection::Type::Incident:
      return {{"type", "incident"}, {"severity", toString(e.severity)}, {"location", e.location}};
    case Injection::Type::ClearIncident: return {{"type", "clear"}};
  }
  return {};
}

nlohmann::json toJson(const LogRecord& r) {
  return {{"timestamp", r.timestamp}, {"sessionId", r.sessionId}, {"kind", r.kind}, {"payload", r.payload}};
}

nlohmann::json toJson(const SessionSnapshot& s) {
  return {{"id", s.id},
          {"status", toString(s.status)},
          {"mode", toString(s.mode)},
          {"tick", s.tick},
          {"scenario", scenarioToJson(s.scenario)},
          {"state", trafficStateToJson(s.state)},
          {"activeAction", actionToJson(s.active)},
          {"modelId", s.modelId},
          {"tickPeriodMs", s.tickPeriodMs},
          {"recommendation", s.latest ? toJson(*s.latest) : nlohmann::json()}};
}

void advanceInterval(CorridorDynamics& dyn, const SimConfig& cfg) {
  const auto steps = std::lround(cfg.controlInterval / cfg.network.timeStep);
  const bool incident = dyn.scenario().severity != Severity::None;
  dyn.resetDetector();
  for (long i = 0; i < steps; ++i) dyn.step(incident);
}

Session::Session(std::string id, SimConfig cfg, std::shared_ptr<const TrainedModel> model, SessionOptions opt)
    : id_(std::move(id)),
      cfg_(std::move(cfg)),
      model_(std::move(model)),
      opt_(std::move(opt)),
      dyn_(cfg_, opt_.scenario, opt_.initialAction) {
  if (!model_) throw NotFoundError(fmt::format("unknown model '{}'", opt_.modelId));
  if (model_->filter.inputSchema() != scenarioSchema()) {
    throw SchemaError(fmt::format("model '{}' was not trained on scenario features", model_->id));
  }
  if (!(opt_.tickPeriodMs >= 0)) throw ValidationError("tickPeriodMs must be non-negative");
  opt_.modelId = model_->id;
  if (!opt_.logFile.empty()) {
    file_.open(opt_.logFile, std::ios::out | std::ios::trunc);
    if (!file_) throw ValidationError(fmt::format("cannot open session log {}", opt_.logFile.string()));
  }
  std::ostringstream ini;
  writeSimConfig(ini, cfg_);
  auto initial = statePayload();
  initial["config"] = ini.str();
  initial["modelId"] = opt_.modelId;
  initial["mode"] = toString(opt_.mode);
  initial["tickPeriodMs"] = opt_.tickPeriodMs;
  append("state", std::move(initial));
  publish();
  worker_ = std::jthread([this](std::stop_token st) { run(st); });
}

Session::~Session() {
  {
    std::lock_guard lock(queueMutex_);
    closed_ = true;
  }
  worker_.request_stop();
  cv_.notify_all();
}

void Session::run(std::stop_token st) {
  std::unique_lock lock(queueMutex_);
  while (!st.stop_requested()) {
    if (!queue_.empty()) {
      auto job = std::move(queue_.front());
      queue_.pop_front();
      lock.unlock();
      job();
      lock.lock();
      continue;
    }
    if (!paced()) {
      cv_.wait(lock, st, [&] { return !queue_.empty(); });
      continue;
    }
    if (cv_.wait_until(lock, st, nextTick_, [&] { return !queue_.empty(); })) continue;
    if (st.stop_requested() || !paced()) continue;
    lock.unlock();
    try {
      tickNow();
    } catch (const std::exception& e) {
      log::error("session {}: paced tick failed: {}", id_, e.what());
    }
    const auto period = std::chrono::duration_cast<Clock::duration>(
        std::chrono::duration<double, std::milli>(opt_.tickPeriodMs));
    nextTick_ += period;
    if (nextTick_ < Clock::now()) nextTick_ = Clock::now() + period;
    lock.lock();
  }
}

void Session::start() {
  submit([this] {
    if (status_ == SessionStatus::Ended) throw PreconditionError("session has ended");
    status_ = SessionStatus::Running;
    nextTick_ = Clock::now() +
                std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double, std::milli>(opt_.tickPeriodMs));
    publish();
  });
}

void Session::pause() {
  submit([this] {
    if (status_ == SessionStatus::Ended) throw PreconditionError("session has ended");
    status_ = SessionStatus::Paused;
    publish();
  });
}

void Session::end() {
  submit([this] {
    if (status_ == SessionStatus::Ended) return;
    expirePending();
    status_ = SessionStatus::Ended;
    publish();
  });
}

void Session::setMode(OperatorMode mode) {
  submit([this, mode] {
    if (status_ == SessionStatus::Ended) throw PreconditionError("session has ended");
    opt_.mode = mode;
    publish();
  });
}

TickResult Session::tick() {
  return submit([this] { return tickNow(); });
}

TickResult Session::tickNow() {
  if (status_ == SessionStatus::Ended) throw PreconditionError("session has ended");
  if (status_ != SessionStatus::Running) throw PreconditionError("session is paused; start it before ticking");
  expirePending();
  advanceInterval(dyn_, cfg_);
  ++tick_;
  append("state", statePayload());

  const TrafficState state = dyn_.state();
  const auto t0 = Clock::now();
  const Eigen::VectorXd features =
      scenarioFeatures(cfg_, dyn_.scenario(), {state.detectorSpeed, state.detectorOccupancy});
  const int predicted = model_->predict(features);
  const double latency = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

  Recommendation r;
  r.id = static_cast<int>(recs_.size()) + 1;
  r.tick = tick_;
  r.features.assign(features.data(), features.data() + features.size());
  r.action = ControlAction::fromId(predicted);
  r.modelId = model_->id;
  r.latencyMs = latency;
  append("recommendation", toJson(r));
  if (opt_.mode == OperatorMode::Auto) {
    r.disposition = Disposition::AutoApplied;
    r.applied = r.action;
    dyn_.setAction(r.action);
    append("decision", {{"recommendationId", r.id},
                        {"verdict", "auto"},
                        {"disposition", toString(r.disposition)},
                        {"applied", r.action.id()}});
    recs_.push_back(r);
  } else {
    recs_.push_back(r);
    pending_ = recs_.size() - 1;
  }
  publish();
  return {tick_, state, r};
}

void Session::expirePending() {
  if (!pending_) return;
  auto& r = recs_[*pending_];
  r.disposition = Disposition::Expired;
  append("decision", {{"recommendationId", r.id}, {"verdict", "expire"}, {"disposition", toString(r.disposition)}});
  pending_.reset();
}

ControlAction Session::decide(int recommendationId, std::optional<ControlAction> override) {
  return submit([this, recommendationId, override] {
    if (status_ == SessionStatus::Ended) throw PreconditionError("session has ended");
    if (recommendationId < 1 || recommendationId > static_cast<int>(recs_.size())) {
      throw NotFoundError(fmt::format("unknown recommendation {}", recommendationId));
    }
    auto& r = recs_[static_cast<std::size_t>(recommendationId - 1)];
    if (r.disposition != Disposition::Pending) {
      throw PreconditionError(
          fmt::format("recommendation {} is already {}", recommendationId, toString(r.disposition)));
    }
    const ControlAction applied = override.value_or(r.action);
    r.disposition = override ? Disposition::Overridden : Disposition::Accepted;
    r.applied = applied;
    pending_.reset();
    dyn_.setAction(applied);
    append("decision", {{"recommendationId", r.id},
                        {"verdict", override ? "override" : "accept"},
                        {"disposition", toString(r.disposition)},
                        {"applied", applied.id()}});
    publish();
    return applied;
  });
}

int Session::inject(const Injection& e) {
  return submit([this, e] {
    if (status_ == SessionStatus::Ended) throw PreconditionError("session has ended");
    Scenario s = dyn_.scenario();
    switch (e.type) {
      case Injection::Type::Weather: s.weather = e.weather; break;
      case Injection::Type::Incident:
        s.severity = e.severity;
        s.location = e.location;
        break;
      case Injection::Type::ClearIncident: s.severity = Severity::None; break;
    }
    dyn_.setScenario(s);
    append("injection", {{"event", toJson(e)}, {"scenario", scenarioToJson(s)}, {"effectiveTick", tick_ + 1}});
    publish();
    return tick_ + 1;
  });
}

SessionSnapshot Session::snapshot() const {
  std::lock_guard lock(snapMutex_);
  return snap_;
}

std::vector<Recommendation> Session::recommendations() {
  return submit([this] { return recs_; });
}

std::vector<LogRecord> Session::log(std::size_t from) const {
  std::lock_guard lock(logMutex_);
  if (from >= log_.size()) return {};
  return {log_.begin() + static_cast<std::ptrdiff_t>(from), log_.end()};
}

int Session::subscribe(Listener f) {
  std::lock_guard lock(logMutex_);
  listeners_[nextListener_] = std::move(f);
  return nextListener_++;
}

void Session::unsubscribe(int token) {
  std::lock_guard lock(logMutex_);
  listeners_.erase(token);
}

void Session::append(const char* kind, nlohmann::json payload) {
  std::lock_guard lock(logMutex_);
  LogRecord r;
  r.timestamp = nowMicros();
  if (!log_.empty() && r.timestamp <= log_.back().timestamp) r.timestamp = log_.back().timestamp + 1;
  r.sessionId = id_;
  r.kind = kind;
  r.payload = std::move(payload);
  if (file_.is_open()) {
    file_ << toJson(r).dump() << '\n';
    file_.flush();
  }
  log_.push_back(r);
  for (const auto& [token, f] : listeners_) f(log_.back());
}

nlohmann::json Session::statePayload() const {
  return {{"tick", tick_},
          {"scenario", scenarioToJson(dyn_.scenario())},
          {"action", dyn_.action().id()},
          {"state", trafficStateToJson(dyn_.state())}};
}

void Session::publish() {
  SessionSnapshot s;
  s.id = id_;
  s.status = status_;
  s.mode = opt_.mode;
  s.tick = tick_;
  s.scenario = dyn_.scenario();
  s.state = dyn_.state();
  s.active = dyn_.action();
  s.modelId = opt_.modelId;
  s.tickPeriodMs = opt_.tickPeriodMs;
  if (!recs_.empty()) s.latest = recs_.back();
  std::lock_guard lock(snapMutex_);
  snap_ = std::move(s);
}

ParsedLog parseSessionLog(std::istream& in) {
  ParsedLog out;
  std::string line;
  std::size_t lineNo = 0;
  auto fail = [&](std::string message) {
    out.error = std::move(message);
    out.errorLine = lineNo;
    return out;
  };
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    LogRecord r;
    try {
      const auto j = nlohmann::json::parse(line);
      r.timestamp = j.at("timestamp").get<std::int64_t>();
      r.sessionId = j.at("sessionId").get<std::string>();
      r.kind = j.at("kind").get<std::string>();
      r.payload = j.at("payload");
    } catch (const nlohmann::json::exception& e) {
      return fail(fmt::format("line {}: malformed record: {}", lineNo, e.what()));
    }
    if (!kKinds.contains(r.kind)) return fail(fmt::format("line {}: unknown record kind '{}'", lineNo, r.kind));
    if (!r.payload.is_object()) return fail(fmt::format("line {}: payload must be an object", lineNo));
    if (!out.records.empty()) {
      if (r.sessionId != out.records.front().sessionId) {
        return fail(fmt::format("line {}: record of session '{}' in the log of '{}'", lineNo, r.sessionId,
                                out.records.front().sessionId));
      }
      if (r.timestamp <= out.records.back().timestamp) {
        return fail(fmt::format("line {}: timestamp {} does not increase", lineNo, r.timestamp));
      }
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

ReplayTimeline replaySession(const std::vector<LogRecord>& records) {
  ReplayTimeline t;
  if (records.empty()) return t;
  const auto& first = records.front();
  if (first.kind != "state" || !first.payload.contains("config")) {
    throw ValidationError("the log does not start with the session's initial state");
  }
  t.sessionId = first.sessionId;
  try {
    std::istringstream ini(first.payload.at("config").get<std::string>());
    const SimConfig cfg = readSimConfig(ini);
    CorridorDynamics dyn(cfg, scenarioFromJson(first.payload.at("scenario")),
                         ControlAction::fromId(first.payload.at("action").get<int>()));
    t.logged.push_back(trafficStateFromJson(first.payload.at("state")));
    t.replayed.push_back(dyn.state());
    if (t.replayed.back() != t.logged.back()) t.firstMismatch = 0;

    int tick = 0;
    for (std::size_t i = 1; i < records.size(); ++i) {
      const auto& r = records[i];
      const auto& p = r.payload;
      if (r.kind == "state") {
        const int k = p.at("tick").get<int>();
        if (k != tick + 1) throw ValidationError(fmt::format("record {}: tick {} follows tick {}", i + 1, k, tick));
        t.activeActions.push_back(dyn.action().id());
        advanceInterval(dyn, cfg);
        tick = k;
        t.logged.push_back(trafficStateFromJson(p.at("state")));
        t.replayed.push_back(dyn.state());
        const bool same = t.replayed.back() == t.logged.back() && p.at("action").get<int>() == dyn.action().id() &&
                          scenarioFromJson(p.at("scenario")) == dyn.scenario();
        if (!same && !t.firstMismatch) t.firstMismatch = k;
      } else if (r.kind == "recommendation") {
        Recommendation rec;
        rec.id = p.at("id").get<int>();
        rec.tick = p.at("tick").get<int>();
        rec.features = p.at("features").get<std::vector<double>>();
        rec.action = actionFromJson(p.at("action"));
        rec.modelId = p.at("modelId").get<std::string>();
        rec.latencyMs = p.at("latencyMs").get<double>();
        if (rec.id != static_cast<int>(t.recommendations.size()) + 1) {
          throw ValidationError(fmt::format("record {}: recommendation ids are not consecutive", i + 1));
        }
        t.recommendations.push_back(rec);
      } else if (r.kind == "decision") {
        const int id = p.at("recommendationId").get<int>();
        if (id < 1 || id > static_cast<int>(t.recommendations.size())) {
          throw ValidationError(fmt::format("record {}: decision on unknown recommendation {}", i + 1, id));
        }
        auto& rec = t.recommendations[static_cast<std::size_t>(id - 1)];
        if (rec.disposition != Disposition::Pending) {
          throw ValidationError(fmt::format("record {}: recommendation {} dispositioned twice", i + 1, id));
        }
        rec.disposition = parseDisposition(p.at("disposition").get<std::string>());
        if (p.contains("applied")) {
          rec.applied = ControlAction::fromId(p.at("applied").get<int>());
          dyn.setAction(*rec.applied);
        }
        ++t.decisions;
      } else if (r.kind == "injection") {
        dyn.setScenario(scenarioFromJson(p.at("scenario")));
        ++t.injections;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed log payload: {}", e.what()));
  }
  return t;
}

}  // namespace bdss
