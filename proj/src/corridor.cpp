#include "bridgedss/corridor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fmt/format.h>
#include <string>

#include "bridgedss/errors.hpp"

namespace bdss {

namespace {

constexpr std::array<std::string_view, kWeatherCount> kWeatherNames{"snowing", "raining", "foggy", "wet"};
constexpr std::array<std::string_view, kDayTypeCount> kDayTypeNames{"weekday", "holiday"};
constexpr std::array<std::string_view, kIntervalCount> kIntervalNames{"morning", "noon", "night"};
constexpr std::array<std::string_view, kSeasonCount> kSeasonNames{"spring", "summer", "autumn", "winter"};
constexpr std::array<std::string_view, kSeverityCount> kSeverityNames{"none", "minor", "moderate", "severe"};
constexpr std::array<double, kSeverityCount> kSeverityLevels{0.0, 0.25, 0.5, 0.9};

template <typename E, std::size_t N>
E parseEnum(std::string_view s, const std::array<std::string_view, N>& names, std::string_view what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  throw ValidationError(std::string("unknown ") + std::string(what) + " '" + std::string(s) + "'");
}

double median3(double a, double b, double c) { return std::max(std::min(a, b), std::min(std::max(a, b), c)); }

}  // namespace

std::string_view toString(Weather w) { return kWeatherNames.at(static_cast<int>(w)); }
std::string_view toString(DayType d) { return kDayTypeNames.at(static_cast<int>(d)); }
std::string_view toString(Interval i) { return kIntervalNames.at(static_cast<int>(i)); }
std::string_view toString(Season s) { return kSeasonNames.at(static_cast<int>(s)); }
std::string_view toString(Severity s) { return kSeverityNames.at(static_cast<int>(s)); }

Weather parseWeather(std::string_view s) { return parseEnum<Weather>(s, kWeatherNames, "weather"); }
DayType parseDayType(std::string_view s) { return parseEnum<DayType>(s, kDayTypeNames, "day type"); }
Interval parseInterval(std::string_view s) { return parseEnum<Interval>(s, kIntervalNames, "interval"); }
Season parseSeason(std::string_view s) { return parseEnum<Season>(s, kSeasonNames, "season"); }
Severity parseSeverity(std::string_view s) { return parseEnum<Severity>(s, kSeverityNames, "severity"); }

double severityLevel(Severity s) { return kSeverityLevels.at(static_cast<int>(s)); }

void validate(const Scenario& s) {
  auto inRange = [](auto e, int n) { return static_cast<int>(e) >= 0 && static_cast<int>(e) < n; };
  if (!inRange(s.weather, kWeatherCount) || !inRange(s.dayType, kDayTypeCount) ||
      !inRange(s.interval, kIntervalCount) || !inRange(s.season, kSeasonCount) ||
      !inRange(s.severity, kSeverityCount)) {
    throw PreconditionError("scenario enum field out of range");
  }
  if (s.location < 1 || s.location > kLocationCount) {
    throw PreconditionError(fmt::format("scenario location {} outside 1..{}", s.location, kLocationCount));
  }
  if (s.demandLevel < 0 || s.demandLevel >= kDemandLevelCount) {
    throw PreconditionError(fmt::format("scenario demand level {} outside 0..{}", s.demandLevel, kDemandLevelCount - 1));
  }
}

int gridIndex(const Scenario& s) {
  validate(s);
  int base = ((static_cast<int>(s.weather) * kDayTypeCount + static_cast<int>(s.dayType)) * kIntervalCount +
              static_cast<int>(s.interval)) * kSeasonCount + static_cast<int>(s.season);
  int variant = (static_cast<int>(s.severity) * kLocationCount + (s.location - 1)) * kDemandLevelCount + s.demandLevel;
  return base * kVariantCount + variant;
}

Scenario scenarioAt(int index) {
  if (index < 0 || index >= kScenarioCount) throw PreconditionError(fmt::format("grid index {} out of range", index));
  int base = index / kVariantCount;
  int variant = index % kVariantCount;
  Scenario s;
  s.demandLevel = variant % kDemandLevelCount;
  variant /= kDemandLevelCount;
  s.location = variant % kLocationCount + 1;
  s.severity = static_cast<Severity>(variant / kLocationCount);
  s.season = static_cast<Season>(base % kSeasonCount);
  base /= kSeasonCount;
  s.interval = static_cast<Interval>(base % kIntervalCount);
  base /= kIntervalCount;
  s.dayType = static_cast<DayType>(base % kDayTypeCount);
  s.weather = static_cast<Weather>(base / kDayTypeCount);
  return s;
}

std::vector<Scenario> enumerateScenarios() {
  std::vector<Scenario> out;
  out.reserve(kScenarioCount);
  for (int i = 0; i < kScenarioCount; ++i) out.push_back(scenarioAt(i));
  return out;
}

ControlAction ControlAction::fromId(int id) {
  if (id < 0 || id >= kCount) throw PreconditionError(fmt::format("action id {} outside 0..{}", id, kCount - 1));
  return ControlAction(id / kReroutingLevels, id % kReroutingLevels);
}

ControlAction ControlAction::fromValues(std::optional<double> rate, double reroutingFraction) {
  int m = -1;
  if (!rate) {
    m = 0;
  } else if (*rate == 900.0) {
    m = 1;
  } else if (*rate == 600.0) {
    m = 2;
  } else if (*rate == 300.0) {
    m = 3;
  }
  int r = -1;
  if (reroutingFraction == 0.0) {
    r = 0;
  } else if (std::abs(reroutingFraction - 0.2) < 1e-12) {
    r = 1;
  } else if (std::abs(reroutingFraction - 0.4) < 1e-12) {
    r = 2;
  }
  if (m < 0 || r < 0) throw ValidationError("action outside the 12-action set");
  return ControlAction(m, r);
}

std::optional<double> ControlAction::meteringRate() const {
  static constexpr std::array<double, kMeteringLevels> kRates{0.0, 900.0, 600.0, 300.0};
  if (metering_ == 0) return std::nullopt;
  return kRates.at(metering_);
}

double ControlAction::reroutingFraction() const {
  static constexpr std::array<double, kReroutingLevels> kFractions{0.0, 0.2, 0.4};
  return kFractions.at(rerouting_);
}

std::string ControlAction::label() const {
  auto rate = meteringRate();
  return fmt::format("{}/{:.1f}", rate ? fmt::format("{:.0f}", *rate) : std::string("unrestricted"),
                     reroutingFraction());
}

std::array<ControlAction, ControlAction::kCount> allActions() {
  std::array<ControlAction, ControlAction::kCount> out;
  for (int i = 0; i < ControlAction::kCount; ++i) out[i] = ControlAction::fromId(i);
  return out;
}

CorridorNetwork buildNetwork(const CorridorNetwork& p) {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(fmt::format("network.{} must be positive (got {})", field, v));
  };
  positive(p.bridgeLength, "bridgeLength");
  positive(p.lanes, "lanes");
  positive(p.laneCapacity, "laneCapacity");
  positive(p.freeFlowSpeed, "freeFlowSpeed");
  positive(p.jamDensity, "jamDensity");
  positive(p.rampMaxFlow, "rampMaxFlow");
  positive(p.detourTravelTime, "detourTravelTime");
  positive(p.timeStep, "timeStep");
  positive(p.horizon, "horizon");
  if (p.numCells < 3) throw ConfigError(fmt::format("network.numCells must be >= 3 (got {})", p.numCells));
  double reach = p.freeFlowSpeed / 3.6 * p.timeStep;
  if (reach > p.cellLength() * (1.0 + 1e-12)) {
    throw ConfigError(fmt::format("network.timeStep violates CFL: freeFlowSpeed*timeStep = {:.3f} m > cell length {:.3f} m",
                                  reach, p.cellLength()));
  }
  double critical = p.laneCapacity / p.freeFlowSpeed;
  if (critical >= p.jamDensity) {
    throw ConfigError("network.jamDensity must exceed the critical density laneCapacity/freeFlowSpeed");
  }
  return p;
}

double SimConfig::demandMultiplier(const Scenario& s) const {
  return demand.dayInterval.at(static_cast<int>(s.dayType)).at(static_cast<int>(s.interval)) *
         demand.season.at(static_cast<int>(s.season)) * demand.levels.at(s.demandLevel) * demand.scale;
}

void validate(const SimConfig& cfg) {
  buildNetwork(cfg.network);
  for (const auto& w : cfg.weather) {
    if (!(w.capacity > 0.0 && w.capacity <= 1.0) || !(w.freeFlowSpeed > 0.0 && w.freeFlowSpeed <= 1.0)) {
      throw ConfigError("weather factors must lie in (0, 1]");
    }
    double critical = cfg.network.laneCapacity * w.capacity / (cfg.network.freeFlowSpeed * w.freeFlowSpeed);
    if (critical >= cfg.network.jamDensity) throw ConfigError("weather factors push critical density past jam density");
  }
  if (cfg.demand.mainlinePeak < 0.0 || cfg.demand.rampPeak < 0.0 || cfg.demand.scale < 0.0) {
    throw ConfigError("demand values must be non-negative");
  }
  for (const auto& row : cfg.demand.dayInterval) {
    for (double v : row) {
      if (v < 0.0) throw ConfigError("demand.dayInterval entries must be non-negative");
    }
  }
  for (double v : cfg.demand.season) {
    if (v < 0.0) throw ConfigError("demand.season entries must be non-negative");
  }
  for (double v : cfg.demand.levels) {
    if (v < 0.0) throw ConfigError("demand.levels entries must be non-negative");
  }
  for (double r : cfg.incident.capacityReduction) {
    if (r < 0.0 || r >= 1.0) throw ConfigError("incident.reduction entries must lie in [0, 1)");
  }
  if (!(cfg.incident.start >= 0.0 && cfg.incident.end > cfg.incident.start)) {
    throw ConfigError("incident window must satisfy 0 <= start < end");
  }
  if (cfg.rampCell < 0 || cfg.rampCell >= cfg.network.numCells - 1) throw ConfigError("rampCell out of range");
  for (int c : cfg.incident.cells) {
    if (c <= cfg.rampCell || c >= cfg.network.numCells - 1) {
      throw ConfigError(fmt::format("incident cell {} must be interior and downstream of the ramp", c));
    }
  }
  if (!(cfg.rampPriority > 0.0 && cfg.rampPriority < 1.0)) throw ConfigError("rampPriority must lie in (0, 1)");
  if (!(cfg.capacityDrop >= 0.0 && cfg.capacityDrop < 1.0)) throw ConfigError("capacityDrop must lie in [0, 1)");
  if (!(cfg.controlInterval >= cfg.network.timeStep)) throw ConfigError("controlInterval must be at least one time step");
  if (!(cfg.tieTolerance >= 0.0)) throw ConfigError("decision.tieTolerance must be non-negative");
}

CorridorDynamics::CorridorDynamics(const SimConfig& cfg, const Scenario& scenario, ControlAction action)
    : cfg_(&cfg), action_(action), vehicles_(cfg.network.numCells, 0.0) {
  setScenario(scenario);
}

void CorridorDynamics::setScenario(const Scenario& s) {
  validate(s);
  scenario_ = s;
  const auto& net = cfg_->network;
  const auto& wf = cfg_->weather.at(static_cast<int>(s.weather));
  vFree_ = net.freeFlowSpeed * wf.freeFlowSpeed;
  capacity_ = net.laneCapacity * wf.capacity * net.lanes;
  cellKm_ = net.cellLength() / 1000.0;
  cellStorage_ = net.jamDensity * net.lanes * cellKm_;
  double criticalDensity = capacity_ / vFree_;  // veh/km across lanes
  criticalVeh_ = criticalDensity * cellKm_;
  wave_ = capacity_ / (net.jamDensity * net.lanes - criticalDensity);
}

double CorridorDynamics::receiving(int cell, double capacityPerStep) const {
  double dt = cfg_->network.timeStep;
  double space = std::max(0.0, cellStorage_ - vehicles_[cell]);
  return std::min(capacityPerStep, wave_ * dt / 3600.0 / cellKm_ * space);
}

void CorridorDynamics::step(bool incidentActive) {
  const auto& net = cfg_->network;
  const double dt = net.timeStep;
  const int n = net.numCells;
  const double hours = dt / 3600.0;

  // arrivals
  double mainline = cfg_->mainlineDemand(scenario_) * hours;
  double ramp = cfg_->rampDemand(scenario_) * hours;
  double diverted = mainline * action_.reroutingFraction();
  originQueue_ += mainline - diverted;
  rampQueue_ += ramp;
  ledger_.arrived += mainline + ramp;
  ledger_.rerouted += diverted;

  // per-cell capacity this step
  std::vector<double> cap(n, capacity_ * hours);
  int incidentCell = -1;
  if (incidentActive && scenario_.severity != Severity::None) {
    incidentCell = cfg_->incidentCell(scenario_.location);
    cap[incidentCell] *= 1.0 - cfg_->incident.capacityReduction.at(static_cast<int>(scenario_.severity));
  }

  const double advance = vFree_ * hours / cellKm_;
  std::vector<double> sending(n);
  for (int i = 0; i < n; ++i) {
    double c = cap[i];
    if (i == cfg_->rampCell && vehicles_[i] > criticalVeh_) c *= 1.0 - cfg_->capacityDrop;
    sending[i] = std::min(vehicles_[i] * advance, c);
  }

  // flows: inflow[i] enters cell i, outflow[i] leaves cell i
  std::vector<double> inflow(n, 0.0), outflow(n, 0.0);
  double originFlow = 0.0, rampFlow = 0.0;
  for (int i = 0; i < n; ++i) {
    double supply = receiving(i, cap[i]);
    double upstream = i == 0 ? originQueue_ : sending[i - 1];
    if (i == cfg_->rampCell) {
      double rampSend = std::min(rampQueue_, net.rampMaxFlow * hours);
      if (auto rate = action_.meteringRate()) rampSend = std::min(rampSend, *rate * hours);
      double mainFlow = upstream;
      double rFlow = rampSend;
      if (upstream + rampSend > supply) {
        double p = cfg_->rampPriority;
        rFlow = median3(rampSend, supply - upstream, p * supply);
        mainFlow = median3(upstream, supply - rampSend, (1.0 - p) * supply);
      }
      rampFlow = rFlow;
      inflow[i] = mainFlow + rFlow;
      if (i == 0) {
        originFlow = mainFlow;
      } else {
        outflow[i - 1] = mainFlow;
      }
    } else {
      double f = std::min(upstream, supply);
      inflow[i] = f;
      if (i == 0) {
        originFlow = f;
      } else {
        outflow[i - 1] = f;
      }
    }
  }
  outflow[n - 1] = sending[n - 1];

  // accounting uses the state at the start of the step
  double inCells = 0.0;
  for (int i = 0; i < n; ++i) {
    inCells += vehicles_[i];
    vkt_ += outflow[i] * cellKm_;
  }
  cellTime_ += inCells * dt;

  int det = cfg_->detectorCell(scenario_.location);
  double detVeh = vehicles_[det];
  double detSpeed = detVeh > 1e-12 ? outflow[det] * cellKm_ / (detVeh * hours) : vFree_;
  detSpeedSum_ += std::min(detSpeed, vFree_);
  detOccSum_ += std::clamp(detVeh / cellStorage_, 0.0, 1.0);
  ++detSamples_;

  for (int i = 0; i < n; ++i) vehicles_[i] = std::clamp(vehicles_[i] + inflow[i] - outflow[i], 0.0, cellStorage_);
  originQueue_ -= originFlow;
  rampQueue_ -= rampFlow;
  if (originQueue_ < 0.0) originQueue_ = 0.0;
  if (rampQueue_ < 0.0) rampQueue_ = 0.0;
  queueTime_ += (originQueue_ + rampQueue_) * dt;
  ledger_.exited += outflow[n - 1];
  elapsed_ += dt;
}

void CorridorDynamics::resetDetector() {
  detSpeedSum_ = 0.0;
  detOccSum_ = 0.0;
  detSamples_ = 0;
}

double CorridorDynamics::detectorSpeed() const { return detSamples_ ? detSpeedSum_ / detSamples_ : vFree_; }
double CorridorDynamics::detectorOccupancy() const { return detSamples_ ? detOccSum_ / detSamples_ : 0.0; }

TrafficState CorridorDynamics::state() const {
  TrafficState s;
  s.density.resize(vehicles_.size());
  const double laneKm = cfg_->network.lanes * cellKm_;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) s.density[i] = vehicles_[i] / laneKm;
  s.rampQueue = rampQueue_;
  s.originQueue = originQueue_;
  s.elapsed = elapsed_;
  s.detectorSpeed = detectorSpeed();
  s.detectorOccupancy = detectorOccupancy();
  return s;
}

VehicleLedger CorridorDynamics::ledger() const {
  VehicleLedger l = ledger_;
  l.remaining = originQueue_ + rampQueue_;
  for (double v : vehicles_) l.remaining += v;
  return l;
}

SimResult CorridorDynamics::result() const {
  const double lengthKm = cfg_->network.bridgeLength / 1000.0;
  const double freeFlowTime = lengthKm / vFree_ * 3600.0;
  SimResult r;
  r.throughput = ledger_.exited + ledger_.rerouted;
  double trips = vkt_ / lengthKm + ledger_.rerouted;
  if (trips <= 0.0) {
    r.meanTravelTime = freeFlowTime;
    r.meanDelay = 0.0;
  } else {
    double total = cellTime_ + queueTime_ + ledger_.rerouted * cfg_->network.detourTravelTime;
    r.meanTravelTime = total / trips;
    r.meanDelay = std::max(0.0, r.meanTravelTime - freeFlowTime);
  }
  r.objective = r.meanTravelTime + r.meanDelay;
  return r;
}

SimTrace simulateTrace(const SimConfig& cfg, const Scenario& scenario, ControlAction action) {
  validate(scenario);
  CorridorDynamics dyn(cfg, scenario, action);
  const auto& net = cfg.network;
  const int steps = static_cast<int>(std::llround(net.horizon / net.timeStep));
  SimTrace trace;
  trace.minDensity = 0.0;
  const double jamVeh = net.jamDensity;
  for (int k = 0; k < steps; ++k) {
    double t = k * net.timeStep;
    bool active = t >= cfg.incident.start && t < cfg.incident.end;
    dyn.step(active);
    auto st = dyn.state();
    for (double d : st.density) {
      trace.maxDensityRatio = std::max(trace.maxDensityRatio, d / jamVeh);
      trace.minDensity = std::min(trace.minDensity, d);
    }
  }
  trace.result = dyn.result();
  trace.ledger = dyn.ledger();
  trace.detectorSpeed = dyn.detectorSpeed();
  trace.detectorOccupancy = dyn.detectorOccupancy();
  return trace;
}

SimResult simulate(const SimConfig& cfg, const Scenario& scenario, ControlAction action) {
  validate(scenario);
  CorridorDynamics dyn(cfg, scenario, action);
  const auto& net = cfg.network;
  const int steps = static_cast<int>(std::llround(net.horizon / net.timeStep));
  for (int k = 0; k < steps; ++k) {
    double t = k * net.timeStep;
    dyn.step(t >= cfg.incident.start && t < cfg.incident.end);
  }
  return dyn.result();
}

ActionChoice bestAction(const SimConfig& cfg, const Scenario& scenario) {
  std::array<SimResult, ControlAction::kCount> results;
  double best = std::numeric_limits<double>::infinity();
  for (int id = 0; id < ControlAction::kCount; ++id) {
    results[id] = simulate(cfg, scenario, ControlAction::fromId(id));
    best = std::min(best, results[id].objective);
  }
  // least restrictive action within the indifference band around the minimum
  const double limit = best * (1.0 + cfg.tieTolerance) + 1e-9;
  for (int id = 0; id < ControlAction::kCount; ++id) {
    if (results[id].objective <= limit) return {ControlAction::fromId(id), results[id]};
  }
  return {ControlAction::fromId(0), results[0]};
}

DetectorReading baselineFeatures(const SimConfig& cfg, const Scenario& scenario) {
  auto t = simulateTrace(cfg, scenario, ControlAction::fromId(0));
  return {t.detectorSpeed, t.detectorOccupancy};
}

}  // namespace bdss
