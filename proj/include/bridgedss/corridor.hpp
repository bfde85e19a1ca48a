#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bdss {

enum class Weather : std::uint8_t { Snowing, Raining, Foggy, Wet };
enum class DayType : std::uint8_t { Weekday, Holiday };
enum class Interval : std::uint8_t { Morning, Noon, Night };
enum class Season : std::uint8_t { Spring, Summer, Autumn, Winter };
enum class Severity : std::uint8_t { None, Minor, Moderate, Severe };

inline constexpr int kWeatherCount = 4;
inline constexpr int kDayTypeCount = 2;
inline constexpr int kIntervalCount = 3;
inline constexpr int kSeasonCount = 4;
inline constexpr int kSeverityCount = 4;
inline constexpr int kLocationCount = 5;
inline constexpr int kDemandLevelCount = 6;
inline constexpr int kBaseScenarioCount = kWeatherCount * kDayTypeCount * kIntervalCount * kSeasonCount;
inline constexpr int kVariantCount = kSeverityCount * kLocationCount * kDemandLevelCount;
inline constexpr int kScenarioCount = kBaseScenarioCount * kVariantCount;

std::string_view toString(Weather w);
std::string_view toString(DayType d);
std::string_view toString(Interval i);
std::string_view toString(Season s);
std::string_view toString(Severity s);

Weather parseWeather(std::string_view s);
DayType parseDayType(std::string_view s);
Interval parseInterval(std::string_view s);
Season parseSeason(std::string_view s);
Severity parseSeverity(std::string_view s);

/// Numeric severity level used as a learner feature: the fraction of capacity lost.
double severityLevel(Severity s);

struct Scenario {
  Weather weather = Weather::Wet;
  DayType dayType = DayType::Weekday;
  Interval interval = Interval::Morning;
  Season season = Season::Spring;
  Severity severity = Severity::None;
  int location = 1;     // 1..5, meaningful only when severity != None
  int demandLevel = 2;  // 0..5

  bool operator==(const Scenario&) const = default;
};

/// Throws PreconditionError when a field is outside the grid.
void validate(const Scenario& s);

/// Position of `s` in the full grid: base scenario major, then severity, location, demand level.
int gridIndex(const Scenario& s);
Scenario scenarioAt(int gridIndex);
std::vector<Scenario> enumerateScenarios();

/// One (ramp metering, rerouting) pair. Ids follow the tie-break order:
/// metering unrestricted < 900 < 600 < 300, then rerouting 0.0 < 0.2 < 0.4.
class ControlAction {
 public:
  static constexpr int kMeteringLevels = 4;
  static constexpr int kReroutingLevels = 3;
  static constexpr int kCount = kMeteringLevels * kReroutingLevels;

  constexpr ControlAction() = default;
  constexpr ControlAction(int meteringIndex, int reroutingIndex)
      : metering_(meteringIndex), rerouting_(reroutingIndex) {}

  static ControlAction fromId(int id);
  /// `rate` is nullopt for unrestricted; otherwise one of 900, 600, 300 veh/h.
  static ControlAction fromValues(std::optional<double> rate, double reroutingFraction);

  int id() const { return metering_ * kReroutingLevels + rerouting_; }
  int meteringIndex() const { return metering_; }
  int reroutingIndex() const { return rerouting_; }
  std::optional<double> meteringRate() const;
  double reroutingFraction() const;
  std::string label() const;

  auto operator<=>(const ControlAction& o) const { return id() <=> o.id(); }
  bool operator==(const ControlAction& o) const { return id() == o.id(); }

 private:
  int metering_ = 0;
  int rerouting_ = 0;
};

std::array<ControlAction, ControlAction::kCount> allActions();

struct CorridorNetwork {
  double bridgeLength = 1000.0;      // m
  int numCells = 10;
  int lanes = 3;
  double laneCapacity = 2000.0;      // veh/h/lane
  double freeFlowSpeed = 80.0;       // km/h
  double jamDensity = 150.0;         // veh/km/lane
  double rampMaxFlow = 1500.0;       // veh/h
  double detourTravelTime = 300.0;   // s
  double timeStep = 4.0;             // s
  double horizon = 3600.0;           // s

  double cellLength() const { return bridgeLength / numCells; }  // m
};

/// Validates the network invariants (positivity, numCells >= 3, CFL).
/// Throws ConfigError naming the offending field.
CorridorNetwork buildNetwork(const CorridorNetwork& params);

struct WeatherFactors {
  double capacity = 1.0;
  double freeFlowSpeed = 1.0;
};

struct DemandModel {
  double mainlinePeak = 4800.0;  // veh/h upstream of the bridge at multiplier 1
  double rampPeak = 900.0;       // veh/h on the on-ramp at multiplier 1
  std::array<std::array<double, kIntervalCount>, kDayTypeCount> dayInterval{
      {{1.00, 0.80, 0.45}, {0.60, 0.85, 0.55}}};
  std::array<double, kSeasonCount> season{1.00, 0.95, 1.00, 0.90};
  std::array<double, kDemandLevelCount> levels{0.85, 0.94, 1.00, 1.06, 1.12, 1.20};
  double scale = 1.0;
};

struct IncidentModel {
  std::array<double, kSeverityCount> capacityReduction{0.0, 0.25, 0.50, 0.90};
  double start = 600.0;  // s
  double end = 1800.0;   // s
  std::array<int, kLocationCount> cells{3, 4, 5, 6, 7};
};

/// Everything the simulator reads. Stored in one versioned INI file.
struct SimConfig {
  int version = 1;
  CorridorNetwork network;
  std::array<WeatherFactors, kWeatherCount> weather{
      {{0.75, 0.70}, {0.90, 0.90}, {0.85, 0.80}, {0.95, 0.95}}};
  DemandModel demand;
  IncidentModel incident;
  int rampCell = 1;
  double rampPriority = 0.25;   // ramp share of merge supply when both sides queue
  double capacityDrop = 0.10;   // discharge loss of the merge cell once it is congested
  double controlInterval = 60.0;  // s of simulated time per live tick
  double tieTolerance = 0.01;     // relative objective gap treated as a tie in bestAction

  /// Demand multiplier relative to the peak tables (dayType x interval x season x level x scale).
  double demandMultiplier(const Scenario& s) const;
  double mainlineDemand(const Scenario& s) const { return demand.mainlinePeak * demandMultiplier(s); }
  double rampDemand(const Scenario& s) const { return demand.rampPeak * demandMultiplier(s); }
  int incidentCell(int location) const { return incident.cells.at(location - 1); }
  int detectorCell(int location) const { return incidentCell(location) - 1; }
};

/// Validates the full configuration (network plus tables). Throws ConfigError.
void validate(const SimConfig& cfg);

SimConfig loadSimConfig(const std::string& path);
void saveSimConfig(const SimConfig& cfg, const std::string& path);
/// Same INI text as the file form; doubles round-trip exactly.
SimConfig readSimConfig(std::istream& in);
void writeSimConfig(std::ostream& out, const SimConfig& cfg);

struct SimResult {
  double meanTravelTime = 0.0;  // s/veh
  double meanDelay = 0.0;       // s/veh
  double throughput = 0.0;      // veh
  double objective = 0.0;       // s/veh

  bool operator==(const SimResult&) const = default;
};

struct TrafficState {
  std::vector<double> density;  // veh/km/lane per cell
  double rampQueue = 0.0;       // veh
  double originQueue = 0.0;     // veh waiting upstream of cell 0
  double elapsed = 0.0;         // s
  double detectorSpeed = 0.0;   // km/h, mean over the last reporting window
  double detectorOccupancy = 0.0;

  bool operator==(const TrafficState&) const = default;
};

/// Cumulative vehicle bookkeeping of one run.
struct VehicleLedger {
  double arrived = 0.0;
  double exited = 0.0;
  double rerouted = 0.0;
  double remaining = 0.0;

  double residual() const { return arrived - exited - rerouted - remaining; }
};

/// Cell-transmission dynamics of the corridor. Scenario and action may be changed between
/// steps (the live session does this); `simulate` runs it over a fixed horizon.
class CorridorDynamics {
 public:
  CorridorDynamics(const SimConfig& cfg, const Scenario& scenario, ControlAction action);

  void setScenario(const Scenario& s);
  void setAction(ControlAction a) { action_ = a; }
  const Scenario& scenario() const { return scenario_; }
  ControlAction action() const { return action_; }

  /// Advances one time step. `incidentActive` selects whether the incident capacity loss applies.
  void step(bool incidentActive);

  /// Detector window: means since the last reset.
  void resetDetector();
  double detectorSpeed() const;
  double detectorOccupancy() const;

  TrafficState state() const;
  VehicleLedger ledger() const;
  SimResult result() const;
  double elapsed() const { return elapsed_; }
  double totalDemand() const { return ledger_.arrived; }

 private:
  double receiving(int cell, double capacityPerStep) const;

  const SimConfig* cfg_;
  Scenario scenario_;
  ControlAction action_;

  // derived from scenario
  double vFree_ = 0.0;       // km/h
  double capacity_ = 0.0;    // veh/h across lanes
  double wave_ = 0.0;        // km/h
  double cellKm_ = 0.0;
  double cellStorage_ = 0.0; // veh at jam density
  double criticalVeh_ = 0.0; // veh at critical density

  std::vector<double> vehicles_;
  double rampQueue_ = 0.0;
  double originQueue_ = 0.0;
  double elapsed_ = 0.0;

  VehicleLedger ledger_;
  double cellTime_ = 0.0;   // veh*s spent in cells
  double queueTime_ = 0.0;  // veh*s spent in origin/ramp queues
  double vkt_ = 0.0;        // veh*km on the bridge

  double detSpeedSum_ = 0.0;
  double detOccSum_ = 0.0;
  int detSamples_ = 0;
};

/// Runs the corridor for the configured horizon with the incident active over its window.
SimResult simulate(const SimConfig& cfg, const Scenario& scenario, ControlAction action);

struct SimTrace {
  SimResult result;
  VehicleLedger ledger;
  double detectorSpeed = 0.0;
  double detectorOccupancy = 0.0;
  double maxDensityRatio = 0.0;  // max over cells and steps of density / jamDensity
  double minDensity = 0.0;
};

SimTrace simulateTrace(const SimConfig& cfg, const Scenario& scenario, ControlAction action);

struct ActionChoice {
  ControlAction action;
  SimResult result;
};

/// Objective-minimizing action over all 12; ties go to the least restrictive action.
ActionChoice bestAction(const SimConfig& cfg, const Scenario& scenario);

struct DetectorReading {
  double speed = 0.0;
  double occupancy = 0.0;
};

/// Time-mean detector readings under (unrestricted, 0.0).
DetectorReading baselineFeatures(const SimConfig& cfg, const Scenario& scenario);

}  // namespace bdss
