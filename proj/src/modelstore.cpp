#include "bridgedss/modelstore.hpp"

#include <fmt/format.h>

#include <chrono>
#include <fstream>
#include <mutex>

#include "bridgedss/errors.hpp"
#include "bridgedss/evalbench.hpp"
#include "bridgedss/version.hpp"

namespace bdss {

namespace {

constexpr int kBundleVersion = 1;

nlohmann::json specToJson(const TrainSpec& s) {
  return {{"algorithm", s.algorithm},
          {"filter", toString(s.filter)},
          {"trainFraction", s.trainFraction},
          {"splitSeed", s.splitSeed},
          {"params", s.params.is_null() ? nlohmann::json::object() : s.params}};
}

TrainSpec specFromJson(const nlohmann::json& j) {
  TrainSpec s;
  s.algorithm = j.at("algorithm").get<std::string>();
  s.filter = parseFilterKind(j.at("filter").get<std::string>());
  s.trainFraction = j.at("trainFraction").get<double>();
  s.splitSeed = j.at("splitSeed").get<std::uint64_t>();
  s.params = j.at("params");
  return s;
}

}  // namespace

int TrainedModel::predict(const Eigen::Ref<const Eigen::VectorXd>& raw) const {
  return classifier->predict(filter.applyRow(raw));
}

nlohmann::json TrainedModel::summary() const {
  return {{"id", id},
          {"spec", specToJson(spec)},
          {"datasetHash", datasetHash},
          {"trainRows", trainRows},
          {"testRows", testRows},
          {"testAccuracy", testAccuracy},
          {"trainTimeMs", trainTimeMs}};
}

TrainedModel trainModel(const Dataset& data, const TrainSpec& spec) {
  if (spec.filter == FilterKind::None) throw ValidationError("models are trained behind the normal or discrete filter");
  auto model = makeClassifier(spec.algorithm, spec.params);
  const PreparedSplit split = prepareSplit(data, spec.filter, {spec.trainFraction, spec.splitSeed});
  if (spec.algorithm == "hnb" && !split.train.schema.allNominal()) {
    throw PreconditionError("hnb needs nominal attributes; use the discrete filter");
  }
  const auto t0 = std::chrono::steady_clock::now();
  model->fit(split.train);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  TrainedModel m;
  m.spec = spec;
  m.filter = split.filter;
  m.datasetHash = fmt::format("{:016x}", datasetHash(data));
  m.trainRows = split.train.rows();
  m.testRows = split.test.rows();
  m.testAccuracy = accuracy(model->predict(split.test), split.test.y);
  m.trainTimeMs = ms;
  m.classifier = std::move(model);
  return m;
}

nlohmann::json modelToJson(const TrainedModel& m) {
  nlohmann::json j = m.summary();
  j["format"] = "bridgedss-trained-model";
  j["version"] = kBundleVersion;
  j["artifactVersion"] = kVersion;
  j["filter"] = m.filter.toJson();
  j["classifier"] = m.classifier->toJson();
  return j;
}

TrainedModel modelFromJson(const nlohmann::json& j) {
  try {
    if (j.at("format") != "bridgedss-trained-model") throw SchemaError("not a trained model bundle");
    if (j.at("version").get<int>() != kBundleVersion) {
      throw SchemaError(fmt::format("unsupported model bundle version {}", j.at("version").dump()));
    }
    TrainedModel m;
    m.id = j.at("id").get<std::string>();
    m.spec = specFromJson(j.at("spec"));
    m.filter = Filter::fromJson(j.at("filter"));
    m.classifier = loadClassifier(j.at("classifier"));
    m.datasetHash = j.at("datasetHash").get<std::string>();
    m.trainRows = j.at("trainRows").get<Eigen::Index>();
    m.testRows = j.at("testRows").get<Eigen::Index>();
    m.testAccuracy = j.at("testAccuracy").get<double>();
    m.trainTimeMs = j.at("trainTimeMs").get<double>();
    if (m.filter.outputSchema() != m.classifier->schema()) {
      throw SchemaError("model bundle filter does not produce the classifier's schema");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("malformed model bundle: {}", e.what()));
  }
}

void saveModel(const TrainedModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write {}", path.string()));
  out << modelToJson(m).dump(1) << '\n';
}

TrainedModel loadModel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError(fmt::format("cannot read {}", path.string()));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("{} is not JSON: {}", path.string(), e.what()));
  }
  return modelFromJson(j);
}

ModelStore::ModelStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::string ModelStore::add(TrainedModel m) {
  std::unique_lock lock(mutex_);
  if (m.id.empty()) {
    do {
      m.id = fmt::format("{}-{}-{}", m.spec.algorithm, toString(m.spec.filter), next_++);
    } while (models_.contains(m.id));
  }
  if (!dir_.empty()) saveModel(m, dir_ / (m.id + ".json"));
  auto id = m.id;
  models_[id] = std::make_shared<const TrainedModel>(std::move(m));
  return id;
}

std::shared_ptr<const TrainedModel> ModelStore::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = models_.find(id);
  if (it == models_.end()) throw NotFoundError(fmt::format("unknown model '{}'", id));
  return it->second;
}

bool ModelStore::contains(const std::string& id) const {
  std::shared_lock lock(mutex_);
  return models_.contains(id);
}

std::vector<std::shared_ptr<const TrainedModel>> ModelStore::list() const {
  std::shared_lock lock(mutex_);
  std::vector<std::shared_ptr<const TrainedModel>> out;
  for (const auto& [id, m] : models_) out.push_back(m);
  return out;
}

int ModelStore::loadDirectory() {
  if (dir_.empty()) return 0;
  int added = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() != ".json") continue;
    auto m = loadModel(entry.path());
    std::unique_lock lock(mutex_);
    if (models_.contains(m.id)) continue;
    const auto id = m.id;
    models_[id] = std::make_shared<const TrainedModel>(std::move(m));
    ++added;
  }
  return added;
}

}  // namespace bdss
