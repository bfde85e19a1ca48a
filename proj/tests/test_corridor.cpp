#include "doctest.h"

#include <cmath>
#include <set>

#include "bridgedss/corridor.hpp"
#include "bridgedss/errors.hpp"

using namespace bdss;

namespace {

Scenario peakMorning() {
  Scenario s;
  s.weather = Weather::Wet;
  s.dayType = DayType::Weekday;
  s.interval = Interval::Morning;
  s.season = Season::Spring;
  s.demandLevel = 5;
  return s;
}

SimConfig zeroDemand() {
  SimConfig cfg;
  cfg.demand.scale = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("default network is valid and the CFL bound is enforced") {
  CHECK_NOTHROW(buildNetwork(CorridorNetwork{}));
  CorridorNetwork bad;
  bad.timeStep = 10.0;  // 80 km/h * 10 s = 222 m > 100 m cells
  CHECK_THROWS_AS(buildNetwork(bad), ConfigError);
  bad = CorridorNetwork{};
  bad.numCells = 2;
  CHECK_THROWS_AS(buildNetwork(bad), ConfigError);
  bad = CorridorNetwork{};
  bad.lanes = 0;
  CHECK_THROWS_WITH_AS(buildNetwork(bad), doctest::Contains("lanes"), ConfigError);
}

TEST_CASE("scenario grid has 11,520 distinct cells and indexes round-trip") {
  auto all = enumerateScenarios();
  REQUIRE(all.size() == 11520);
  std::set<int> seen;
  for (const auto& s : all) {
    int idx = gridIndex(s);
    CHECK(scenarioAt(idx) == s);
    seen.insert(idx);
  }
  CHECK(seen.size() == 11520);
}

TEST_CASE("twelve actions in the stated total order") {
  auto acts = allActions();
  REQUIRE(acts.size() == 12);
  CHECK_FALSE(acts[0].meteringRate().has_value());
  CHECK(acts[0].reroutingFraction() == 0.0);
  CHECK(*acts[3].meteringRate() == 900.0);
  CHECK(*acts[11].meteringRate() == 300.0);
  CHECK(acts[11].reroutingFraction() == doctest::Approx(0.4));
  for (int i = 0; i < 12; ++i) CHECK(ControlAction::fromId(i).id() == i);
  CHECK(ControlAction::fromValues(600.0, 0.2).id() == 7);
  CHECK(ControlAction::fromValues(std::nullopt, 0.4).id() == 2);
}

TEST_CASE("zero demand gives free-flow travel time and no delay") {
  auto cfg = zeroDemand();
  for (auto w : {Weather::Snowing, Weather::Wet}) {
    auto s = peakMorning();
    s.weather = w;
    auto r = simulate(cfg, s, ControlAction{});
    const auto f = cfg.weather[static_cast<int>(w)];
    const double expected = cfg.network.bridgeLength / 1000.0 / (cfg.network.freeFlowSpeed * f.freeFlowSpeed) * 3600.0;
    CHECK(r.meanDelay == 0.0);
    CHECK(r.meanTravelTime == expected);
    CHECK(r.objective == r.meanTravelTime + r.meanDelay);
    auto d = baselineFeatures(cfg, s);
    CHECK(d.speed == cfg.network.freeFlowSpeed * f.freeFlowSpeed);
    CHECK(d.occupancy == 0.0);
    CHECK(bestAction(cfg, s).action.id() == 0);
  }
}

TEST_CASE("conservation and density bounds hold across a sample of the grid") {
  SimConfig cfg;
  for (int idx = 0; idx < 11520; idx += 97) {
    auto s = scenarioAt(idx);
    for (int a : {0, 5, 11}) {
      auto t = simulateTrace(cfg, s, ControlAction::fromId(a));
      CHECK(std::abs(t.ledger.residual()) <= 1e-9);
      CHECK(t.maxDensityRatio <= 1.0 + 1e-12);
      CHECK(t.minDensity >= 0.0);
      CHECK(t.result.meanDelay >= 0.0);
      CHECK(t.result.throughput <= t.ledger.arrived + 1e-9);
    }
  }
}

TEST_CASE("harsher weather and worse incidents never help") {
  SimConfig cfg;
  auto s = peakMorning();
  s.location = 3;
  for (int a = 0; a < 12; ++a) {
    auto act = ControlAction::fromId(a);
    auto wet = s, snow = s;
    snow.weather = Weather::Snowing;
    CHECK(simulate(cfg, snow, act).objective >= simulate(cfg, wet, act).objective);
    double prev = -1.0;
    for (auto sev : {Severity::None, Severity::Minor, Severity::Moderate, Severity::Severe}) {
      auto v = s;
      v.severity = sev;
      double obj = simulate(cfg, v, act).objective;
      CHECK(obj >= prev - 1e-9);
      prev = obj;
    }
  }
  auto none = s, severe = s;
  severe.severity = Severity::Severe;
  CHECK(baselineFeatures(cfg, severe).occupancy >= baselineFeatures(cfg, none).occupancy);
}

TEST_CASE("bestAction is the brute-force argmin with the tie band") {
  SimConfig cfg;
  auto s = peakMorning();
  s.severity = Severity::Severe;
  s.location = 3;
  double best = 1e300;
  std::vector<double> obj;
  for (int a = 0; a < 12; ++a) {
    obj.push_back(simulate(cfg, s, ControlAction::fromId(a)).objective);
    best = std::min(best, obj.back());
  }
  int expected = 0;
  while (obj[expected] > best * (1.0 + cfg.tieTolerance) + 1e-9) ++expected;
  auto choice = bestAction(cfg, s);
  CHECK(choice.action.id() == expected);
  CHECK(choice.action.reroutingFraction() > 0.0);
  auto again = bestAction(cfg, s);
  CHECK(again.action == choice.action);
  CHECK(again.result == choice.result);
}

TEST_CASE("config file round-trips and the shipped config equals the defaults") {
  SimConfig cfg;
  cfg.tieTolerance = 0.02;
  cfg.weather[0].capacity = 0.7;
  const std::string path = "test_corridor_roundtrip.ini";
  saveSimConfig(cfg, path);
  auto back = loadSimConfig(path);
  CHECK(back.tieTolerance == 0.02);
  CHECK(back.weather[0].capacity == 0.7);
  CHECK(simulate(back, peakMorning(), ControlAction{}) == simulate(cfg, peakMorning(), ControlAction{}));
  std::remove(path.c_str());

  auto shipped = loadSimConfig(BRIDGEDSS_SOURCE_DIR "/config/corridor.ini");
  SimConfig defaults;
  for (int idx : {0, 4321, 11519}) {
    CHECK(simulate(shipped, scenarioAt(idx), ControlAction{}) == simulate(defaults, scenarioAt(idx), ControlAction{}));
  }
}
