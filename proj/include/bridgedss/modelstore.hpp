#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "bridgedss/classifier.hpp"
#include "bridgedss/dataset.hpp"
#include "bridgedss/filters.hpp"
#include "json.hpp"

namespace bdss {

struct TrainSpec {
  std::string algorithm = "cart";
  FilterKind filter = FilterKind::Normal;
  double trainFraction = 0.8;
  std::uint64_t splitSeed = 42;
  nlohmann::json params = nlohmann::json::object();
};

/// A classifier together with the filter it was trained behind. Live rows are raw
/// scenario features; the frozen filter maps them into the classifier's schema.
struct TrainedModel {
  std::string id;
  TrainSpec spec;
  Filter filter;
  std::shared_ptr<const Classifier> classifier;
  std::string datasetHash;
  Eigen::Index trainRows = 0;
  Eigen::Index testRows = 0;
  double testAccuracy = 0.0;
  double trainTimeMs = 0.0;

  int predict(const Eigen::Ref<const Eigen::VectorXd>& raw) const;
  /// Everything except the fitted state.
  nlohmann::json summary() const;
};

/// Stratified split, filter fitted on train, classifier fitted on the filtered train rows
/// and scored on the test rows.
TrainedModel trainModel(const Dataset& data, const TrainSpec& spec);

nlohmann::json modelToJson(const TrainedModel& m);
TrainedModel modelFromJson(const nlohmann::json& j);
void saveModel(const TrainedModel& m, const std::filesystem::path& path);
TrainedModel loadModel(const std::filesystem::path& path);

/// Thread-safe registry of trained models, optionally mirrored to a directory of
/// `<id>.json` files.
class ModelStore {
 public:
  explicit ModelStore(std::filesystem::path dir = {});

  /// Assigns `<algorithm>-<filter>-<n>` when the model has no id; returns the id.
  std::string add(TrainedModel m);
  std::shared_ptr<const TrainedModel> get(const std::string& id) const;
  bool contains(const std::string& id) const;
  std::vector<std::shared_ptr<const TrainedModel>> list() const;
  /// Loads every model file in the directory; returns how many were added.
  int loadDirectory();

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const TrainedModel>> models_;
  int next_ = 1;
};

}  // namespace bdss
