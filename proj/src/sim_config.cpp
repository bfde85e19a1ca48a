#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "bridgedss/corridor.hpp"
#include "bridgedss/errors.hpp"

namespace bdss {

namespace pt = boost::property_tree;

namespace {

std::vector<double> parseList(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("{}: '{}' is not a number", key, item));
    }
  }
  return out;
}

template <std::size_t N>
void readArray(const pt::ptree& tree, const std::string& key, std::array<double, N>& dst) {
  auto text = tree.get_optional<std::string>(key);
  if (!text) return;
  auto values = parseList(key, *text);
  if (values.size() != N) throw ConfigError(fmt::format("{}: expected {} values, got {}", key, N, values.size()));
  std::copy(values.begin(), values.end(), dst.begin());
}

template <typename T>
void readScalar(const pt::ptree& tree, const std::string& key, T& dst) {
  try {
    if (auto v = tree.get_optional<T>(key)) dst = *v;
  } catch (const pt::ptree_error& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()));
  }
}

template <typename Range>
std::string joinList(const Range& r) {
  std::string out;
  for (auto v : r) {
    if (!out.empty()) out += ", ";
    out += fmt::format("{}", v);
  }
  return out;
}

}  // namespace

namespace {

SimConfig fromTree(const pt::ptree& tree) {
  SimConfig cfg;
  readScalar(tree, "meta.version", cfg.version);
  if (cfg.version != 1) throw ConfigError(fmt::format("unsupported config version {}", cfg.version));

  auto& net = cfg.network;
  readScalar(tree, "network.bridgeLength", net.bridgeLength);
  readScalar(tree, "network.numCells", net.numCells);
  readScalar(tree, "network.lanes", net.lanes);
  readScalar(tree, "network.laneCapacity", net.laneCapacity);
  readScalar(tree, "network.freeFlowSpeed", net.freeFlowSpeed);
  readScalar(tree, "network.jamDensity", net.jamDensity);
  readScalar(tree, "network.rampMaxFlow", net.rampMaxFlow);
  readScalar(tree, "network.detourTravelTime", net.detourTravelTime);
  readScalar(tree, "network.timeStep", net.timeStep);
  readScalar(tree, "network.horizon", net.horizon);
  readScalar(tree, "network.rampCell", cfg.rampCell);
  readScalar(tree, "network.rampPriority", cfg.rampPriority);
  readScalar(tree, "network.capacityDrop", cfg.capacityDrop);
  readScalar(tree, "network.controlInterval", cfg.controlInterval);
  readScalar(tree, "decision.tieTolerance", cfg.tieTolerance);

  for (int w = 0; w < kWeatherCount; ++w) {
    std::array<double, 2> f{cfg.weather[w].capacity, cfg.weather[w].freeFlowSpeed};
    readArray(tree, "weather." + std::string(toString(static_cast<Weather>(w))), f);
    cfg.weather[w] = {f[0], f[1]};
  }

  auto& d = cfg.demand;
  readScalar(tree, "demand.mainlinePeak", d.mainlinePeak);
  readScalar(tree, "demand.rampPeak", d.rampPeak);
  readArray(tree, "demand.weekday", d.dayInterval[0]);
  readArray(tree, "demand.holiday", d.dayInterval[1]);
  readArray(tree, "demand.season", d.season);
  readArray(tree, "demand.levels", d.levels);
  readScalar(tree, "demand.scale", d.scale);

  readArray(tree, "incident.reduction", cfg.incident.capacityReduction);
  readScalar(tree, "incident.start", cfg.incident.start);
  readScalar(tree, "incident.end", cfg.incident.end);
  std::array<double, kLocationCount> cells{};
  std::transform(cfg.incident.cells.begin(), cfg.incident.cells.end(), cells.begin(),
                 [](int c) { return static_cast<double>(c); });
  readArray(tree, "incident.cells", cells);
  std::transform(cells.begin(), cells.end(), cfg.incident.cells.begin(), [](double c) { return static_cast<int>(c); });

  validate(cfg);
  return cfg;
}

// scalars go through fmt so that doubles round-trip exactly
template <typename T>
void putScalar(pt::ptree& tree, const std::string& key, T v) {
  tree.put(key, fmt::format("{}", v));
}

pt::ptree toTree(const SimConfig& cfg) {
  pt::ptree tree;
  putScalar(tree, "meta.version", cfg.version);
  const auto& net = cfg.network;
  putScalar(tree, "network.bridgeLength", net.bridgeLength);
  putScalar(tree, "network.numCells", net.numCells);
  putScalar(tree, "network.lanes", net.lanes);
  putScalar(tree, "network.laneCapacity", net.laneCapacity);
  putScalar(tree, "network.freeFlowSpeed", net.freeFlowSpeed);
  putScalar(tree, "network.jamDensity", net.jamDensity);
  putScalar(tree, "network.rampMaxFlow", net.rampMaxFlow);
  putScalar(tree, "network.detourTravelTime", net.detourTravelTime);
  putScalar(tree, "network.timeStep", net.timeStep);
  putScalar(tree, "network.horizon", net.horizon);
  putScalar(tree, "network.rampCell", cfg.rampCell);
  putScalar(tree, "network.rampPriority", cfg.rampPriority);
  putScalar(tree, "network.capacityDrop", cfg.capacityDrop);
  putScalar(tree, "network.controlInterval", cfg.controlInterval);
  putScalar(tree, "decision.tieTolerance", cfg.tieTolerance);
  for (int w = 0; w < kWeatherCount; ++w) {
    tree.put("weather." + std::string(toString(static_cast<Weather>(w))),
             joinList(std::array<double, 2>{cfg.weather[w].capacity, cfg.weather[w].freeFlowSpeed}));
  }
  putScalar(tree, "demand.mainlinePeak", cfg.demand.mainlinePeak);
  putScalar(tree, "demand.rampPeak", cfg.demand.rampPeak);
  tree.put("demand.weekday", joinList(cfg.demand.dayInterval[0]));
  tree.put("demand.holiday", joinList(cfg.demand.dayInterval[1]));
  tree.put("demand.season", joinList(cfg.demand.season));
  tree.put("demand.levels", joinList(cfg.demand.levels));
  putScalar(tree, "demand.scale", cfg.demand.scale);
  tree.put("incident.reduction", joinList(cfg.incident.capacityReduction));
  putScalar(tree, "incident.start", cfg.incident.start);
  putScalar(tree, "incident.end", cfg.incident.end);
  tree.put("incident.cells", joinList(cfg.incident.cells));
  return tree;
}

}  // namespace

SimConfig loadSimConfig(const std::string& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ptree_error& e) {
    throw ConfigError(fmt::format("cannot read config {}: {}", path, e.what()));
  }
  return fromTree(tree);
}

SimConfig readSimConfig(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ptree_error& e) {
    throw ConfigError(fmt::format("cannot read config: {}", e.what()));
  }
  return fromTree(tree);
}

void writeSimConfig(std::ostream& out, const SimConfig& cfg) {
  pt::write_ini(out, toTree(cfg));
}

void saveSimConfig(const SimConfig& cfg, const std::string& path) {
  const pt::ptree tree = toTree(cfg);
  try {
    pt::write_ini(path, tree);
  } catch (const pt::ptree_error& e) {
    throw ConfigError(fmt::format("cannot write config {}: {}", path, e.what()));
  }
}

}  // namespace bdss
