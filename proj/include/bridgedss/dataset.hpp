#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bridgedss/corridor.hpp"
#include "json.hpp"

namespace bdss {

enum class AttributeKind : std::uint8_t { Nominal, Numeric };

struct Attribute {
  std::string name;
  AttributeKind kind = AttributeKind::Numeric;
  std::vector<std::string> values;  // nominal only

  bool nominal() const { return kind == AttributeKind::Nominal; }
  int cardinality() const { return static_cast<int>(values.size()); }
  bool operator==(const Attribute&) const = default;
};

struct Schema {
  std::vector<Attribute> attributes;
  std::vector<std::string> classNames;

  int numAttributes() const { return static_cast<int>(attributes.size()); }
  int numClasses() const { return static_cast<int>(classNames.size()); }
  bool allNominal() const;
  int indexOf(const std::string& name) const;  // -1 when absent
  bool operator==(const Schema&) const = default;
};

/// Rows are instances; nominal cells hold the category index as a double.
struct Dataset {
  Schema schema;
  Eigen::MatrixXd x;
  Eigen::VectorXi y;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
  Dataset subset(std::span<const Eigen::Index> rows) const;
  /// Per-class instance counts.
  std::vector<int> classCounts() const;
  /// Throws SchemaError when shapes, nominal codes or labels are inconsistent.
  void check() const;
};

/// Drops the class information: one-hot nominal attributes, numeric copied.
Eigen::MatrixXd encodeOneHot(const Schema& schema, const Eigen::MatrixXd& x);
int oneHotWidth(const Schema& schema);

/// The simulator output for one grid cell: scenario, baseline detector readings, best action.
struct ScenarioRecord {
  Scenario scenario;
  DetectorReading detector;
  int actionId = 0;
};

/// Runs bestAction and baselineFeatures over the full grid. `threads` = 0 uses hardware concurrency.
std::vector<ScenarioRecord> generateScenarioRecords(const SimConfig& cfg, unsigned threads = 0);

/// Learner schema: weather, dayType, interval, season (nominal); severityLevel, locationIndex,
/// demandMultiplier, detectorSpeed, detectorOccupancy (numeric); 12 action classes.
Schema scenarioSchema();
Dataset toLabeledDataset(const SimConfig& cfg, std::span<const ScenarioRecord> records);

/// Feature row for one scenario and detector reading, in scenarioSchema() order.
Eigen::VectorXd scenarioFeatures(const SimConfig& cfg, const Scenario& s, const DetectorReading& d);

// Column order: weather, dayType, interval, season, severity, location, demandLevel,
// detectorSpeed, detectorOccupancy, class.
void writeScenarioCsv(std::ostream& out, std::span<const ScenarioRecord> records);
void writeScenarioJsonl(std::ostream& out, std::span<const ScenarioRecord> records);
std::vector<ScenarioRecord> readScenarioCsv(std::istream& in);
std::vector<ScenarioRecord> readScenarioJsonl(std::istream& in);

nlohmann::json schemaToJson(const Schema& s);
Schema schemaFromJson(const nlohmann::json& j);

/// FNV-1a over the raw bytes; used as the dataset fingerprint in reports.
std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t datasetHash(const Dataset& d);

}  // namespace bdss
