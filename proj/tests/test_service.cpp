#include "doctest.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "bridgedss/errors.hpp"
#include "bridgedss/service.hpp"
#include "httplib.h"

using namespace bdss;
using namespace std::chrono_literals;

namespace {

// every stride-th grid scenario labeled by the simulator; singleton classes dropped so
// that stratified splits stay possible
Dataset gridSample(const SimConfig& cfg, int stride) {
  std::vector<ScenarioRecord> recs;
  for (int i = 0; i < kScenarioCount; i += stride) {
    const Scenario s = scenarioAt(i);
    recs.push_back({s, baselineFeatures(cfg, s), bestAction(cfg, s).action.id()});
  }
  std::map<int, int> counts;
  for (const auto& r : recs) ++counts[r.actionId];
  std::erase_if(recs, [&](const ScenarioRecord& r) { return counts[r.actionId] < 2; });
  return toLabeledDataset(cfg, recs);
}

const Dataset& sample() {
  static const Dataset d = gridSample(SimConfig{}, 7);
  return d;
}

std::shared_ptr<const TrainedModel> cartModel() {
  static const auto m = [] {
    auto t = trainModel(sample(), {"cart", FilterKind::Normal, 0.8, 42, nlohmann::json::object()});
    t.id = "cart-test";
    return std::make_shared<const TrainedModel>(std::move(t));
  }();
  return m;
}

Scenario busyScenario() {
  Scenario s;
  s.weather = Weather::Raining;
  s.interval = Interval::Morning;
  s.demandLevel = 5;
  return s;
}

std::unique_ptr<Session> makeSession(SessionOptions opt = {}, SimConfig cfg = {}) {
  if (opt.scenario == Scenario{}) opt.scenario = busyScenario();
  opt.tickPeriodMs = 0;
  return std::make_unique<Session>("t1", cfg, cartModel(), opt);
}

std::filesystem::path tempDir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("bridgedss-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("trained models round-trip through the store directory") {
  const auto dir = tempDir("models");
  ModelStore store(dir);
  TrainedModel m = trainModel(sample(), {"c45", FilterKind::Discrete, 0.7, 3, nlohmann::json::object()});
  CHECK(m.testAccuracy > 0.5);
  CHECK(m.trainRows + m.testRows == sample().rows());
  const auto id = store.add(std::move(m));
  CHECK(id == "c45-discrete-1");

  ModelStore reopened(dir);
  CHECK(reopened.loadDirectory() == 1);
  const auto a = store.get(id);
  const auto b = reopened.get(id);
  for (Eigen::Index i = 0; i < sample().rows(); ++i) CHECK(a->predict(sample().x.row(i).transpose()) == b->predict(sample().x.row(i).transpose()));
  CHECK(b->summary() == a->summary());
  CHECK_THROWS_AS(store.get("nope"), NotFoundError);
  CHECK_THROWS_AS(trainModel(sample(), {"hnb", FilterKind::Normal, 0.7, 3, nlohmann::json::object()}), PreconditionError);
}

TEST_CASE("sessions start paused with distinct ids and require a known model") {
  DssService service({SimConfig{}, {}, [] { return sample(); }});
  const auto model = service.train({"cart", FilterKind::Normal, 0.8, 42, nlohmann::json::object()});
  SessionOptions opt;
  opt.modelId = model->id;
  const auto a = service.createSession(opt);
  const auto b = service.createSession(opt);
  CHECK(a != b);
  CHECK((service.session(a)->snapshot().status == SessionStatus::Paused));
  opt.modelId = "missing";
  CHECK_THROWS_AS(service.createSession(opt), NotFoundError);
  CHECK_THROWS_AS(service.session("s99"), NotFoundError);
}

TEST_CASE("ticks need a running session and advance one control interval") {
  auto s = makeSession();
  CHECK_THROWS_AS(s->tick(), PreconditionError);
  s->start();
  const auto r = s->tick();
  CHECK(r.tick == 1);
  CHECK(r.state.elapsed == doctest::Approx(60.0));
  CHECK((r.recommendation.disposition == Disposition::Pending));
  CHECK(r.recommendation.latencyMs >= 0.0);
  CHECK(r.recommendation.features.size() == 9);
  s->pause();
  CHECK_THROWS_AS(s->tick(), PreconditionError);
  s->start();
  CHECK(s->tick().state.elapsed == doctest::Approx(120.0));
  s->end();
  CHECK_THROWS_AS(s->tick(), PreconditionError);
  CHECK_THROWS_AS(s->start(), PreconditionError);
}

TEST_CASE("accept and override set the active action; a second verdict is refused") {
  auto s = makeSession();
  s->start();
  auto r = s->tick().recommendation;
  CHECK(s->decide(r.id, std::nullopt) == r.action);
  CHECK(s->snapshot().active == r.action);
  CHECK_THROWS_AS(s->decide(r.id, std::nullopt), PreconditionError);
  CHECK_THROWS_AS(s->decide(r.id + 5, std::nullopt), NotFoundError);

  r = s->tick().recommendation;
  const auto forced = ControlAction::fromValues(300.0, 0.4);
  CHECK(s->decide(r.id, forced) == forced);
  CHECK(s->snapshot().active == forced);
  CHECK_THROWS_AS(s->decide(r.id, ControlAction()), PreconditionError);
  // the override is what the next interval runs under
  CHECK(s->tick().recommendation.tick == 3);
  const auto log = s->log();
  const auto state3 = std::find_if(log.begin(), log.end(), [](const LogRecord& l) {
    return l.kind == "state" && l.payload["tick"] == 3;
  });
  REQUIRE(state3 != log.end());
  CHECK(state3->payload["action"] == forced.id());
}

TEST_CASE("undecided recommendations expire; auto mode applies immediately") {
  auto s = makeSession();
  s->start();
  s->tick();
  s->tick();
  s->setMode(OperatorMode::Auto);
  const auto r = s->tick().recommendation;
  CHECK((r.disposition == Disposition::AutoApplied));
  CHECK(s->snapshot().active == r.action);
  s->setMode(OperatorMode::Manual);
  s->tick();
  s->end();
  const auto recs = s->recommendations();
  REQUIRE(recs.size() == 4);
  CHECK((recs[0].disposition == Disposition::Expired));
  CHECK((recs[1].disposition == Disposition::Expired));
  CHECK((recs[2].disposition == Disposition::AutoApplied));
  CHECK((recs[3].disposition == Disposition::Expired));
}

TEST_CASE("a severe incident raises detector occupancy within five ticks") {
  Scenario sc = busyScenario();
  SessionOptions opt;
  opt.scenario = sc;
  opt.mode = OperatorMode::Manual;
  auto s = makeSession(opt);
  s->start();
  for (int i = 0; i < 3; ++i) s->tick();
  const double before = s->snapshot().state.detectorOccupancy;
  s->inject({Injection::Type::Incident, Weather::Wet, Severity::Severe, 3});
  bool rose = false;
  for (int i = 0; i < 5; ++i) rose |= s->tick().state.detectorOccupancy > before;
  CHECK(rose);

  // the injection is logged ahead of the first state it affects
  const auto log = s->log();
  const auto inj = std::find_if(log.begin(), log.end(), [](const LogRecord& l) { return l.kind == "injection"; });
  REQUIRE(inj != log.end());
  const auto next = std::find_if(inj, log.end(), [](const LogRecord& l) { return l.kind == "state"; });
  REQUIRE(next != log.end());
  CHECK(next->payload["tick"] == 4);
  CHECK(next->payload["scenario"]["severity"] == "severe");
  CHECK(inj->payload["effectiveTick"] == 4);
}

TEST_CASE("snowfall applies the snowing capacity factor from the next tick") {
  auto s = makeSession();
  s->start();
  s->tick();
  s->inject({Injection::Type::Weather, Weather::Snowing, Severity::None, 1});
  CHECK((s->snapshot().scenario.weather == Weather::Snowing));
  s->tick();
  // the same corridor driven directly with the switch at the same boundary
  const SimConfig cfg;
  CorridorDynamics d(cfg, busyScenario(), ControlAction());
  advanceInterval(d, cfg);
  Scenario snow = busyScenario();
  snow.weather = Weather::Snowing;
  d.setScenario(snow);
  advanceInterval(d, cfg);
  CHECK(s->snapshot().state == d.state());
}

TEST_CASE("a zero-demand session is told to leave the corridor unrestricted") {
  SimConfig empty;
  empty.demand.scale = 0.0;
  for (const auto& id : classifierIds()) {
    CAPTURE(id);
    const auto filter = id == "hnb" ? FilterKind::Discrete : FilterKind::Normal;
    nlohmann::json params = id == "ffnn" ? nlohmann::json{{"epochs", 100}} : nlohmann::json::object();
    auto m = std::make_shared<TrainedModel>(trainModel(sample(), {id, filter, 0.8, 42, params}));
    m->id = id;
    SessionOptions opt;
    opt.scenario = busyScenario();
    opt.tickPeriodMs = 0;
    Session s("z", empty, m, opt);
    s.start();
    for (int i = 0; i < 3; ++i) CHECK(s.tick().recommendation.action == ControlAction(0, 0));
  }
}

TEST_CASE("session log: increasing timestamps, file mirror and exact replay") {
  const auto dir = tempDir("log");
  SessionOptions opt;
  opt.logFile = dir / "t1.jsonl";
  auto s = makeSession(opt);
  s->start();
  for (int i = 0; i < 30; ++i) {
    const auto r = s->tick().recommendation;
    if (i % 3 == 0) s->decide(r.id, std::nullopt);
    if (i % 3 == 1) s->decide(r.id, ControlAction::fromId((i * 5) % 12));
    if (i == 10) s->inject({Injection::Type::Incident, Weather::Wet, Severity::Moderate, 2});
    if (i == 20) s->inject({Injection::Type::ClearIncident, Weather::Wet, Severity::None, 1});
    if (i == 15) s->inject({Injection::Type::Weather, Weather::Foggy, Severity::None, 1});
  }
  s->end();
  const auto mem = s->log();
  for (std::size_t i = 1; i < mem.size(); ++i) CHECK(mem[i].timestamp > mem[i - 1].timestamp);

  std::ifstream in(opt.logFile);
  const auto parsed = parseSessionLog(in);
  CHECK_FALSE(parsed.error);
  REQUIRE(parsed.records.size() == mem.size());
  for (std::size_t i = 0; i < mem.size(); ++i) CHECK(toJson(parsed.records[i]) == toJson(mem[i]));

  const auto t = replaySession(parsed.records);
  CHECK(t.identical());
  CHECK(t.logged.size() == 31);
  CHECK(t.injections == 3);
  CHECK(t.recommendations.size() == 30);
  for (const auto& r : t.recommendations) CHECK((r.disposition != Disposition::Pending));
  const auto live = s->recommendations();
  for (std::size_t i = 0; i < live.size(); ++i) CHECK((live[i].disposition == t.recommendations[i].disposition));

  // a tampered state is detected at its tick
  auto tampered = parsed.records;
  for (auto& r : tampered) {
    if (r.kind == "state" && r.payload["tick"] == 12) r.payload["state"]["rampQueue"] = 1e6;
  }
  CHECK(replaySession(tampered).firstMismatch == 12);
}

TEST_CASE("log parsing stops at the first bad record") {
  auto s = makeSession();
  s->start();
  for (int i = 0; i < 3; ++i) s->tick();
  std::ostringstream good;
  for (const auto& r : s->log()) good << toJson(r).dump() << '\n';
  const std::string text = good.str();

  std::istringstream truncated(text.substr(0, text.size() - 40));
  auto p = parseSessionLog(truncated);
  REQUIRE(p.error);
  CHECK(p.errorLine == s->log().size());
  CHECK(p.records.size() == s->log().size() - 1);

  std::istringstream empty("");
  p = parseSessionLog(empty);
  CHECK_FALSE(p.error);
  CHECK(p.records.empty());
  CHECK(replaySession(p.records).logged.empty());

  auto recs = s->log();
  std::swap(recs[1].timestamp, recs[2].timestamp);
  std::ostringstream swapped;
  for (const auto& r : recs) swapped << toJson(r).dump() << '\n';
  std::istringstream in(swapped.str());
  p = parseSessionLog(in);
  REQUIRE(p.error);
  CHECK(p.errorLine == 3);
  CHECK(p.records.size() == 2);

  std::istringstream foreign(R"({"timestamp":1,"sessionId":"x","kind":"gossip","payload":{}})");
  CHECK(parseSessionLog(foreign).error);
}

TEST_CASE("1,000 ticks: every latency under 100 ms and one disposition per recommendation") {
  auto s = makeSession();
  s->start();
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto r = s->tick().recommendation;
    worst = std::max(worst, r.latencyMs);
    const bool pending = r.disposition == Disposition::Pending;
    if (pending && i % 4 == 0) s->decide(r.id, std::nullopt);
    if (pending && i % 4 == 1) s->decide(r.id, ControlAction::fromId(i % 12));
    if (i % 8 == 2) s->setMode(OperatorMode::Auto);
    if (i % 8 == 6) s->setMode(OperatorMode::Manual);
  }
  s->end();
  CHECK(worst < 100.0);
  std::map<int, int> verdicts;
  for (const auto& l : s->log()) {
    if (l.kind == "decision") ++verdicts[l.payload["recommendationId"].get<int>()];
  }
  CHECK(verdicts.size() == 1000);
  for (const auto& [id, n] : verdicts) CHECK(n == 1);
  CHECK(replaySession(s->log()).identical());
}

TEST_CASE("concurrent commands on one session are serialized") {
  auto s = makeSession();
  s->start();
  std::atomic<int> reads{0};
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&] {
        for (int i = 0; i < 25; ++i) {
          const auto r = s->tick().recommendation;
          try {
            s->decide(r.id, std::nullopt);
          } catch (const PreconditionError&) {
            // another thread's tick expired it first
          }
        }
      });
    }
    threads.emplace_back([&] {
      for (int i = 0; i < 200; ++i) {
        const auto snap = s->snapshot();
        if (snap.state.elapsed == 60.0 * snap.tick) ++reads;
      }
    });
  }
  CHECK(reads == 200);
  CHECK(s->snapshot().tick == 100);
  int expected = 1;
  for (const auto& l : s->log()) {
    if (l.kind == "state" && l.payload["tick"] != 0) CHECK(l.payload["tick"] == expected++);
  }
  CHECK(replaySession(s->log()).identical());
}

TEST_CASE("a running session paces its own ticks") {
  SessionOptions opt;
  opt.scenario = busyScenario();
  opt.tickPeriodMs = 10;
  opt.mode = OperatorMode::Auto;
  Session s("paced", SimConfig{}, cartModel(), opt);
  s.start();
  std::this_thread::sleep_for(300ms);
  s.pause();
  const int ticks = s.snapshot().tick;
  CHECK(ticks >= 5);
  std::this_thread::sleep_for(50ms);
  CHECK(s.snapshot().tick == ticks);
}

TEST_CASE("HTTP API and event stream") {
  DssService service({SimConfig{}, tempDir("http"), [] { return sample(); }});
  httplib::Server server;
  mountRoutes(server, service);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::jthread serving([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(30, 0);
  auto post = [&](const std::string& path, const nlohmann::json& j) { return cli.Post(path, j.dump(), "application/json"); };

  auto res = post("/models/train", {{"algorithm", "cart"}, {"filter", "normal"}, {"split", "80/20"}});
  REQUIRE(res);
  REQUIRE(res->status == 201);
  const auto modelId = nlohmann::json::parse(res->body)["id"].get<std::string>();
  CHECK(nlohmann::json::parse(res->body)["spec"]["trainFraction"] == 0.8);
  CHECK(post("/models/train", {{"algorithm", "cart"}, {"splits", 0.8}})->status == 400);
  CHECK(post("/models/train", {{"algorithm", "hnb"}, {"filter", "normal"}})->status == 409);
  res = cli.Get("/models");
  CHECK(nlohmann::json::parse(res->body).size() == 1);

  CHECK(post("/sessions", {{"modelId", "nope"}})->status == 404);
  res = post("/sessions", {{"modelId", modelId}, {"scenario", {{"weather", "raining"}, {"demandLevel", 5}}}, {"tickPeriodMs", 0}});
  REQUIRE(res->status == 201);
  const auto sid = nlohmann::json::parse(res->body)["id"].get<std::string>();
  CHECK(nlohmann::json::parse(res->body)["status"] == "paused");
  CHECK(post("/sessions/" + sid + "/tick", {})->status == 409);
  CHECK(post("/sessions/" + sid + "/start", {})->status == 200);

  // event stream: collect records while ticks are driven over plain requests
  std::vector<std::string> events;
  std::mutex eventsMutex;
  std::atomic<bool> enough{false};
  std::jthread listener([&] {
    httplib::Client sse("127.0.0.1", port);
    sse.Get("/sessions/" + sid + "/events", [&](const char* data, std::size_t len) {
      std::lock_guard lock(eventsMutex);
      std::string chunk(data, len);
      std::istringstream lines(chunk);
      std::string line;
      while (std::getline(lines, line)) {
        if (line.starts_with("event: ")) events.push_back(line.substr(7));
      }
      return !enough;
    });
  });
  std::this_thread::sleep_for(200ms);
  int lastRec = 0;
  for (int i = 0; i < 3; ++i) {
    res = post("/sessions/" + sid + "/tick", {});
    REQUIRE(res->status == 200);
    lastRec = nlohmann::json::parse(res->body)["recommendation"]["id"].get<int>();
  }
  res = post("/sessions/" + sid + "/decision", {{"recommendationId", lastRec}, {"verdict", "override"}, {"action", {{"meteringRate", 300}, {"rerouting", 0.4}}}});
  REQUIRE(res->status == 200);
  CHECK(nlohmann::json::parse(res->body)["applied"]["id"] == ControlAction::fromValues(300.0, 0.4).id());
  CHECK(post("/sessions/" + sid + "/decision", {{"recommendationId", lastRec}, {"verdict", "accept"}})->status == 409);
  res = post("/sessions/" + sid + "/inject", {{"type", "incident"}, {"severity", "severe"}, {"location", 3}});
  CHECK(res->status == 200);
  CHECK(nlohmann::json::parse(res->body)["effectiveTick"] == 4);
  CHECK(post("/sessions/" + sid + "/inject", {{"type", "meteor"}})->status == 400);
  post("/sessions/" + sid + "/tick", {});
  std::this_thread::sleep_for(300ms);
  enough = true;
  post("/sessions/" + sid + "/tick", {});
  listener.join();
  {
    std::lock_guard lock(eventsMutex);
    REQUIRE_FALSE(events.empty());
    CHECK(events.front() == "snapshot");
    CHECK(std::count(events.begin(), events.end(), "state") >= 4);
    CHECK(std::count(events.begin(), events.end(), "recommendation") >= 4);
    CHECK(std::count(events.begin(), events.end(), "injection") == 1);
  }

  res = cli.Get("/sessions/" + sid + "/state");
  const auto state = nlohmann::json::parse(res->body);
  CHECK(state["scenario"]["severity"] == "severe");
  CHECK(state["tick"] >= 5);
  res = cli.Get("/sessions/" + sid + "/log");
  const auto log = nlohmann::json::parse(res->body);
  CHECK(log.front()["kind"] == "state");
  CHECK(log.front()["payload"].contains("config"));
  CHECK(cli.Get("/sessions/zzz/state")->status == 404);

  // the on-disk log replays exactly
  std::ifstream file(tempDir("http").parent_path() / "bridgedss-test-http" / "sessions" / (sid + ".jsonl"));
  const auto parsed = parseSessionLog(file);
  CHECK_FALSE(parsed.error);
  CHECK(replaySession(parsed.records).identical());

  res = post("/benchmarks", {{"supervised", {"cart", "naivebayes"}}, {"unsupervised", {"kmeans", "farthestfirst"}},
                             {"fractions", {0.65}}, {"recordTiming", false}});
  REQUIRE(res->status == 202);
  const auto bid = nlohmann::json::parse(res->body)["id"].get<std::string>();
  nlohmann::json bench;
  for (int i = 0; i < 600; ++i) {
    bench = nlohmann::json::parse(cli.Get("/benchmarks/" + bid)->body);
    if (bench["status"] != "running") break;
    std::this_thread::sleep_for(50ms);
  }
  REQUIRE(bench["status"] == "done");
  CHECK(bench["report"]["rows"].size() == 4 * 2);
  CHECK(bench["report"]["charts"].contains("supervisedAccuracy"));
  res = cli.Get("/benchmarks/" + bid + "/csv");
  CHECK(res->body.starts_with("algorithm,filter,trainFraction"));
  CHECK(post("/benchmarks", {{"supervised", {"c5"}}})->status == 400);
  CHECK(cli.Get("/benchmarks/b77")->status == 404);

  server.stop();
}
