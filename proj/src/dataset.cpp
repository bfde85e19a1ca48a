#include "bridgedss/dataset.hpp"

#include <fmt/format.h>
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "bridgedss/errors.hpp"

namespace bdss {

using Eigen::Index;

bool Schema::allNominal() const {
  return std::all_of(attributes.begin(), attributes.end(), [](const Attribute& a) { return a.nominal(); });
}

int Schema::indexOf(const std::string& name) const {
  for (int i = 0; i < numAttributes(); ++i) {
    if (attributes[i].name == name) return i;
  }
  return -1;
}

Dataset Dataset::subset(std::span<const Index> rowsToKeep) const {
  Dataset out;
  out.schema = schema;
  out.x.resize(static_cast<Index>(rowsToKeep.size()), x.cols());
  out.y.resize(static_cast<Index>(rowsToKeep.size()));
  for (std::size_t i = 0; i < rowsToKeep.size(); ++i) {
    out.x.row(static_cast<Index>(i)) = x.row(rowsToKeep[i]);
    out.y(static_cast<Index>(i)) = y(rowsToKeep[i]);
  }
  return out;
}

std::vector<int> Dataset::classCounts() const {
  std::vector<int> counts(schema.numClasses(), 0);
  for (Index i = 0; i < y.size(); ++i) ++counts.at(y(i));
  return counts;
}

void Dataset::check() const {
  if (x.cols() != schema.numAttributes()) {
    throw SchemaError(fmt::format("dataset has {} columns but schema has {} attributes", x.cols(), schema.numAttributes()));
  }
  if (x.rows() != y.size()) throw SchemaError("feature rows and labels differ in length");
  for (Index i = 0; i < x.rows(); ++i) {
    if (y(i) < 0 || y(i) >= schema.numClasses()) throw SchemaError(fmt::format("row {}: class {} out of range", i, y(i)));
    for (int j = 0; j < schema.numAttributes(); ++j) {
      double v = x(i, j);
      if (!std::isfinite(v)) throw SchemaError(fmt::format("row {}: attribute {} is not finite", i, schema.attributes[j].name));
      const auto& a = schema.attributes[j];
      if (a.nominal() && (v != std::floor(v) || v < 0 || v >= a.cardinality())) {
        throw SchemaError(fmt::format("row {}: invalid code {} for nominal attribute {}", i, v, a.name));
      }
    }
  }
}

int oneHotWidth(const Schema& schema) {
  int w = 0;
  for (const auto& a : schema.attributes) w += a.nominal() ? a.cardinality() : 1;
  return w;
}

Eigen::MatrixXd encodeOneHot(const Schema& schema, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), oneHotWidth(schema));
  Index col = 0;
  for (int j = 0; j < schema.numAttributes(); ++j) {
    const auto& a = schema.attributes[j];
    if (a.nominal()) {
      for (Index i = 0; i < x.rows(); ++i) out(i, col + static_cast<Index>(x(i, j))) = 1.0;
      col += a.cardinality();
    } else {
      out.col(col) = x.col(j);
      ++col;
    }
  }
  return out;
}

std::vector<ScenarioRecord> generateScenarioRecords(const SimConfig& cfg, unsigned threads) {
  validate(cfg);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<ScenarioRecord> out(kScenarioCount);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < kScenarioCount; i = next++) {
      Scenario s = scenarioAt(i);
      auto choice = bestAction(cfg, s);
      out[i] = {s, baselineFeatures(cfg, s), choice.action.id()};
    }
  };
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  return out;
}

Schema scenarioSchema() {
  auto names = [](auto count, auto toStr) {
    std::vector<std::string> v;
    for (int i = 0; i < count; ++i) v.emplace_back(toStr(i));
    return v;
  };
  Schema s;
  s.attributes.push_back({"weather", AttributeKind::Nominal,
                          names(kWeatherCount, [](int i) { return toString(static_cast<Weather>(i)); })});
  s.attributes.push_back({"dayType", AttributeKind::Nominal,
                          names(kDayTypeCount, [](int i) { return toString(static_cast<DayType>(i)); })});
  s.attributes.push_back({"interval", AttributeKind::Nominal,
                          names(kIntervalCount, [](int i) { return toString(static_cast<Interval>(i)); })});
  s.attributes.push_back({"season", AttributeKind::Nominal,
                          names(kSeasonCount, [](int i) { return toString(static_cast<Season>(i)); })});
  for (const char* n : {"severityLevel", "locationIndex", "demandMultiplier", "detectorSpeed", "detectorOccupancy"}) {
    s.attributes.push_back({n, AttributeKind::Numeric, {}});
  }
  for (int a = 0; a < ControlAction::kCount; ++a) {
    auto act = ControlAction::fromId(a);
    auto rate = act.meteringRate();
    s.classNames.push_back(fmt::format("{}-{:.1f}", rate ? fmt::format("{:.0f}", *rate) : "unrestricted",
                                       act.reroutingFraction()));
  }
  return s;
}

Eigen::VectorXd scenarioFeatures(const SimConfig& cfg, const Scenario& s, const DetectorReading& d) {
  Eigen::VectorXd row(9);
  row << static_cast<double>(s.weather), static_cast<double>(s.dayType), static_cast<double>(s.interval),
      static_cast<double>(s.season), severityLevel(s.severity), static_cast<double>(s.location),
      cfg.demandMultiplier(s), d.speed, d.occupancy;
  return row;
}

Dataset toLabeledDataset(const SimConfig& cfg, std::span<const ScenarioRecord> records) {
  Dataset d;
  d.schema = scenarioSchema();
  d.x.resize(static_cast<Index>(records.size()), d.schema.numAttributes());
  d.y.resize(static_cast<Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    d.x.row(static_cast<Index>(i)) = scenarioFeatures(cfg, records[i].scenario, records[i].detector).transpose();
    d.y(static_cast<Index>(i)) = records[i].actionId;
  }
  return d;
}

namespace {

constexpr std::string_view kCsvHeader =
    "weather,dayType,interval,season,severity,location,demandLevel,detectorSpeed,detectorOccupancy,class";

std::vector<std::string> splitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int parseInt(const std::string& s, const char* what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValidationError(fmt::format("{}: '{}' is not an integer", what, s));
  return v;
}

double parseDouble(const std::string& s, const char* what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValidationError(fmt::format("{}: '{}' is not a number", what, s));
  return v;
}

void checkRecord(const ScenarioRecord& r) {
  validate(r.scenario);
  if (r.actionId < 0 || r.actionId >= ControlAction::kCount) {
    throw ValidationError(fmt::format("class {} outside the action set", r.actionId));
  }
}

}  // namespace

void writeScenarioCsv(std::ostream& out, std::span<const ScenarioRecord> records) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    const auto& s = r.scenario;
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", toString(s.weather), toString(s.dayType),
                       toString(s.interval), toString(s.season), toString(s.severity), s.location, s.demandLevel,
                       r.detector.speed, r.detector.occupancy, r.actionId);
  }
}

void writeScenarioJsonl(std::ostream& out, std::span<const ScenarioRecord> records) {
  for (const auto& r : records) {
    const auto& s = r.scenario;
    // ordered_json keeps the column order identical to the CSV
    nlohmann::ordered_json j;
    j["weather"] = toString(s.weather);
    j["dayType"] = toString(s.dayType);
    j["interval"] = toString(s.interval);
    j["season"] = toString(s.season);
    j["severity"] = toString(s.severity);
    j["location"] = s.location;
    j["demandLevel"] = s.demandLevel;
    j["detectorSpeed"] = r.detector.speed;
    j["detectorOccupancy"] = r.detector.occupancy;
    j["class"] = r.actionId;
    out << j.dump() << '\n';
  }
}

std::vector<ScenarioRecord> readScenarioCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ValidationError("scenario CSV: unexpected header");
  std::vector<ScenarioRecord> out;
  int lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    auto cells = splitCsv(line);
    if (cells.size() != 10) throw ValidationError(fmt::format("scenario CSV line {}: expected 10 fields", lineNo));
    try {
      ScenarioRecord r;
      r.scenario.weather = parseWeather(cells[0]);
      r.scenario.dayType = parseDayType(cells[1]);
      r.scenario.interval = parseInterval(cells[2]);
      r.scenario.season = parseSeason(cells[3]);
      r.scenario.severity = parseSeverity(cells[4]);
      r.scenario.location = parseInt(cells[5], "location");
      r.scenario.demandLevel = parseInt(cells[6], "demandLevel");
      r.detector.speed = parseDouble(cells[7], "detectorSpeed");
      r.detector.occupancy = parseDouble(cells[8], "detectorOccupancy");
      r.actionId = parseInt(cells[9], "class");
      checkRecord(r);
      out.push_back(r);
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("scenario CSV line {}: {}", lineNo, e.what()));
    }
  }
  return out;
}

std::vector<ScenarioRecord> readScenarioJsonl(std::istream& in) {
  std::vector<ScenarioRecord> out;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ScenarioRecord r;
      r.scenario.weather = parseWeather(j.at("weather").get<std::string>());
      r.scenario.dayType = parseDayType(j.at("dayType").get<std::string>());
      r.scenario.interval = parseInterval(j.at("interval").get<std::string>());
      r.scenario.season = parseSeason(j.at("season").get<std::string>());
      r.scenario.severity = parseSeverity(j.at("severity").get<std::string>());
      r.scenario.location = j.at("location").get<int>();
      r.scenario.demandLevel = j.at("demandLevel").get<int>();
      r.detector.speed = j.at("detectorSpeed").get<double>();
      r.detector.occupancy = j.at("detectorOccupancy").get<double>();
      r.actionId = j.at("class").get<int>();
      checkRecord(r);
      out.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("scenario JSONL line {}: {}", lineNo, e.what()));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("scenario JSONL line {}: {}", lineNo, e.what()));
    }
  }
  return out;
}

nlohmann::json schemaToJson(const Schema& s) {
  nlohmann::json attrs = nlohmann::json::array();
  for (const auto& a : s.attributes) {
    nlohmann::json j{{"name", a.name}, {"kind", a.nominal() ? "nominal" : "numeric"}};
    if (a.nominal()) j["values"] = a.values;
    attrs.push_back(j);
  }
  return {{"attributes", attrs}, {"classes", s.classNames}};
}

Schema schemaFromJson(const nlohmann::json& j) {
  Schema s;
  for (const auto& a : j.at("attributes")) {
    Attribute attr;
    attr.name = a.at("name").get<std::string>();
    attr.kind = a.at("kind").get<std::string>() == "nominal" ? AttributeKind::Nominal : AttributeKind::Numeric;
    if (attr.nominal()) attr.values = a.at("values").get<std::vector<std::string>>();
    s.attributes.push_back(std::move(attr));
  }
  s.classNames = j.at("classes").get<std::vector<std::string>>();
  return s;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t datasetHash(const Dataset& d) {
  std::string buf;
  for (const auto& a : d.schema.attributes) buf += a.name + ';';
  buf.append(reinterpret_cast<const char*>(d.x.data()), static_cast<std::size_t>(d.x.size()) * sizeof(double));
  buf.append(reinterpret_cast<const char*>(d.y.data()), static_cast<std::size_t>(d.y.size()) * sizeof(int));
  return fnv1a(buf);
}

}  // namespace bdss
