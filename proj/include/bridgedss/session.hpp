#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "bridgedss/corridor.hpp"
#include "bridgedss/errors.hpp"
#include "bridgedss/modelstore.hpp"
#include "json.hpp"

namespace bdss {

enum class SessionStatus : std::uint8_t { Paused, Running, Ended };
enum class OperatorMode : std::uint8_t { Manual, Auto };
/// pending -> accepted | overridden by the operator, pending -> auto-applied in auto mode,
/// pending -> expired when the next tick or the session end arrives without a verdict.
enum class Disposition : std::uint8_t { Pending, Accepted, Overridden, AutoApplied, Expired };

std::string_view toString(SessionStatus s);
std::string_view toString(OperatorMode m);
std::string_view toString(Disposition d);
OperatorMode parseOperatorMode(std::string_view s);
Disposition parseDisposition(std::string_view s);

nlohmann::json scenarioToJson(const Scenario& s);
Scenario scenarioFromJson(const nlohmann::json& j);
nlohmann::json trafficStateToJson(const TrafficState& s);
TrafficState trafficStateFromJson(const nlohmann::json& j);
nlohmann::json actionToJson(ControlAction a);
/// Accepts {"id": n} or {"meteringRate": null | 900 | 600 | 300, "rerouting": 0 | 0.2 | 0.4}.
ControlAction actionFromJson(const nlohmann::json& j);

struct Recommendation {
  int id = 0;
  int tick = 0;
  std::vector<double> features;
  ControlAction action;
  std::string modelId;
  double latencyMs = 0.0;
  Disposition disposition = Disposition::Pending;
  std::optional<ControlAction> applied;
};
nlohmann::json toJson(const Recommendation& r);

struct Injection {
  enum class Type : std::uint8_t { Weather, Incident, ClearIncident };
  Type type = Type::Weather;
  Weather weather = Weather::Wet;
  Severity severity = Severity::None;
  int location = 1;
};
/// {"type": "weather", "weather": "snowing"} | {"type": "incident", "severity": "severe", "location": 3}
/// | {"type": "clear"}
Injection injectionFromJson(const nlohmann::json& j);
nlohmann::json toJson(const Injection& e);

/// One line of the session documentation log. `timestamp` is microseconds since the epoch.
struct LogRecord {
  std::int64_t timestamp = 0;
  std::string sessionId;
  std::string kind;  // state, recommendation, decision, injection
  nlohmann::json payload;
};
nlohmann::json toJson(const LogRecord& r);

/// One control interval of a live corridor: detector window reset, then
/// controlInterval / timeStep steps, incident active whenever one is set.
void advanceInterval(CorridorDynamics& dyn, const SimConfig& cfg);

struct SessionOptions {
  Scenario scenario;
  std::string modelId;
  double tickPeriodMs = 1000.0;  // wall-clock pacing while running; 0 ticks only on request
  OperatorMode mode = OperatorMode::Manual;
  ControlAction initialAction;
  std::filesystem::path logFile;  // empty keeps the log in memory only
};

struct TickResult {
  int tick = 0;
  TrafficState state;
  Recommendation recommendation;
};

struct SessionSnapshot {
  std::string id;
  SessionStatus status = SessionStatus::Paused;
  OperatorMode mode = OperatorMode::Manual;
  int tick = 0;
  Scenario scenario;
  TrafficState state;
  ControlAction active;
  std::string modelId;
  double tickPeriodMs = 0.0;
  std::optional<Recommendation> latest;
};
nlohmann::json toJson(const SessionSnapshot& s);

/// A live corridor classified every tick. All mutations run in submission order on the
/// session's own worker thread, which also performs paced ticks; snapshot reads never
/// wait for a tick in progress.
class Session {
 public:
  using Listener = std::function<void(const LogRecord&)>;

  Session(std::string id, SimConfig cfg, std::shared_ptr<const TrainedModel> model, SessionOptions opt);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }

  void start();
  void pause();
  /// Expires a pending recommendation; later commands other than reads fail.
  void end();
  void setMode(OperatorMode mode);
  TickResult tick();
  /// Accept (no override) or override the pending recommendation; returns the applied action.
  ControlAction decide(int recommendationId, std::optional<ControlAction> override);
  /// Returns the first tick simulated under the new scenario.
  int inject(const Injection& e);

  SessionSnapshot snapshot() const;
  std::vector<Recommendation> recommendations();
  std::vector<LogRecord> log(std::size_t from = 0) const;
  /// Listeners run on the worker thread right after each record is appended.
  int subscribe(Listener f);
  void unsubscribe(int token);

 private:
  using Clock = std::chrono::steady_clock;

  template <typename F>
  auto submit(F&& f) -> decltype(f());
  void run(std::stop_token st);
  bool paced() const { return status_ == SessionStatus::Running && opt_.tickPeriodMs > 0; }
  TickResult tickNow();
  void expirePending();
  void append(const char* kind, nlohmann::json payload);
  nlohmann::json statePayload() const;
  void publish();

  const std::string id_;
  const SimConfig cfg_;
  const std::shared_ptr<const TrainedModel> model_;
  SessionOptions opt_;

  // worker-owned
  CorridorDynamics dyn_;
  SessionStatus status_ = SessionStatus::Paused;
  int tick_ = 0;
  std::vector<Recommendation> recs_;
  std::optional<std::size_t> pending_;
  Clock::time_point nextTick_;

  mutable std::mutex snapMutex_;
  SessionSnapshot snap_;

  mutable std::mutex logMutex_;
  std::vector<LogRecord> log_;
  std::ofstream file_;
  std::map<int, Listener> listeners_;
  int nextListener_ = 1;

  std::mutex queueMutex_;
  std::condition_variable_any cv_;
  std::deque<std::function<void()>> queue_;
  bool closed_ = false;
  std::jthread worker_;
};

template <typename F>
auto Session::submit(F&& f) -> decltype(f()) {
  using R = decltype(f());
  auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(f));
  auto result = task->get_future();
  {
    std::lock_guard lock(queueMutex_);
    if (closed_) throw PreconditionError("session is shut down");
    queue_.emplace_back([task] { (*task)(); });
  }
  cv_.notify_all();
  return result.get();
}

struct ParsedLog {
  std::vector<LogRecord> records;
  std::optional<std::string> error;  // first bad record; earlier ones are kept
  std::size_t errorLine = 0;         // 1-based
};
/// Reads JSONL records, stopping at the first malformed, foreign or out-of-order one.
ParsedLog parseSessionLog(std::istream& in);

struct ReplayTimeline {
  std::string sessionId;
  std::vector<TrafficState> logged;    // tick 0 first
  std::vector<TrafficState> replayed;  // re-simulated from the logged inputs
  std::vector<int> activeActions;      // action id in force during each tick
  std::vector<Recommendation> recommendations;
  std::size_t decisions = 0;
  std::size_t injections = 0;
  std::optional<int> firstMismatch;  // tick index

  bool identical() const { return !firstMismatch && logged.size() == replayed.size(); }
};
/// Re-simulates a logged session from its initial record, applying injections and
/// decisions where they were logged. An empty log gives an empty timeline.
ReplayTimeline replaySession(const std::vector<LogRecord>& records);

}  // namespace bdss
