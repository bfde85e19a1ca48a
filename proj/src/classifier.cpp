#include "bridgedss/classifier.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "bridgedss/bayes.hpp"
#include "bridgedss/errors.hpp"
#include "bridgedss/ffnn.hpp"
#include "bridgedss/svm.hpp"
#include "bridgedss/trees.hpp"

namespace bdss {

namespace {
constexpr int kModelVersion = 1;
}

void Classifier::fit(const Dataset& data) {
  if (fitted_) throw PreconditionError(fmt::format("{} model is already fitted", algorithm()));
  if (data.rows() == 0) throw PreconditionError("cannot fit on an empty dataset");
  data.check();
  schema_ = data.schema;
  fitImpl(data);
  fitted_ = true;
}

void Classifier::checkRow(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  if (!fitted_) throw PreconditionError(fmt::format("{} model is not fitted", algorithm()));
  if (row.size() != schema_.numAttributes()) {
    throw SchemaError(fmt::format("instance has {} values, model expects {}", row.size(), schema_.numAttributes()));
  }
  for (int j = 0; j < schema_.numAttributes(); ++j) {
    const auto& a = schema_.attributes[j];
    const double v = row(j);
    if (!std::isfinite(v)) throw SchemaError(fmt::format("attribute {} is not finite", a.name));
    if (a.nominal() && (v != std::floor(v) || v < 0 || v >= a.cardinality())) {
      throw SchemaError(fmt::format("attribute {} expects a category code below {}, got {}", a.name, a.cardinality(), v));
    }
  }
}

int Classifier::predict(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  checkRow(row);
  return predictImpl(row);
}

Eigen::VectorXi Classifier::predict(const Dataset& data) const {
  if (!fitted_) throw PreconditionError(fmt::format("{} model is not fitted", algorithm()));
  if (data.schema != schema_) throw SchemaError("dataset schema differs from the training schema");
  Eigen::VectorXi out(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) out(i) = predict(data.x.row(i).transpose());
  return out;
}

nlohmann::json Classifier::toJson() const {
  if (!fitted_) throw PreconditionError("only fitted models can be serialized");
  return {{"format", "bridgedss-model"},
          {"version", kModelVersion},
          {"algorithm", algorithm()},
          {"params", params()},
          {"schema", schemaToJson(schema_)},
          {"state", state()}};
}

const std::vector<std::string>& classifierIds() {
  static const std::vector<std::string> ids{"ffnn", "c45", "nbtree", "cart", "naivebayes", "smo", "hnb", "svm"};
  return ids;
}

std::unique_ptr<Classifier> makeClassifier(std::string_view algorithm, const nlohmann::json& params) {
  const auto& p = params.is_null() ? nlohmann::json::object() : params;
  if (!p.is_object()) throw ValidationError("hyperparameters must be a JSON object");
  if (algorithm == "cart") return std::make_unique<CartClassifier>(p);
  if (algorithm == "c45") return std::make_unique<C45Classifier>(p);
  if (algorithm == "nbtree") return std::make_unique<NbTreeClassifier>(p);
  if (algorithm == "naivebayes") return std::make_unique<NaiveBayesClassifier>(p);
  if (algorithm == "hnb") return std::make_unique<HnbClassifier>(p);
  if (algorithm == "smo") return std::make_unique<SmoClassifier>(SmoClassifier::smoDefaults(p));
  if (algorithm == "svm") return std::make_unique<SmoClassifier>(SmoClassifier::svmDefaults(p));
  if (algorithm == "ffnn") return std::make_unique<FfnnClassifier>(p);
  throw ValidationError(fmt::format("unknown algorithm '{}'", algorithm));
}

std::unique_ptr<Classifier> loadClassifier(const nlohmann::json& j) {
  try {
    if (j.at("format") != "bridgedss-model") throw SchemaError("not a bridgedss model document");
    const int version = j.at("version").get<int>();
    if (version != kModelVersion) throw SchemaError(fmt::format("unsupported model version {}", version));
    auto model = makeClassifier(j.at("algorithm").get<std::string>(), j.at("params"));
    model->schema_ = schemaFromJson(j.at("schema"));
    model->loadState(j.at("state"));
    model->fitted_ = true;
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("malformed model document: {}", e.what()));
  }
}

int argmaxLowest(const Eigen::Ref<const Eigen::VectorXd>& scores) {
  int best = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k) {
    if (scores(k) > scores(best)) best = static_cast<int>(k);
  }
  return best;
}

double accuracy(const Eigen::VectorXi& predicted, const Eigen::VectorXi& truth) {
  if (predicted.size() != truth.size()) throw ValidationError("prediction and label counts differ");
  if (truth.size() == 0) return 0.0;
  return static_cast<double>((predicted.array() == truth.array()).count()) / static_cast<double>(truth.size());
}

ParamReader::ParamReader(std::string_view algorithm, const nlohmann::json& params)
    : algorithm_(algorithm), params_(params.is_null() ? nlohmann::json::object() : params) {}

double ParamReader::real(const char* key, double fallback) {
  used_.emplace_back(key);
  if (!params_.contains(key)) return fallback;
  if (!params_[key].is_number()) throw ValidationError(fmt::format("{}: '{}' must be a number", algorithm_, key));
  return params_[key].get<double>();
}

int ParamReader::integer(const char* key, int fallback) {
  used_.emplace_back(key);
  if (!params_.contains(key)) return fallback;
  const auto& v = params_[key];
  if (!v.is_number_integer()) throw ValidationError(fmt::format("{}: '{}' must be an integer", algorithm_, key));
  return v.get<int>();
}

bool ParamReader::flag(const char* key, bool fallback) {
  used_.emplace_back(key);
  if (!params_.contains(key)) return fallback;
  if (!params_[key].is_boolean()) throw ValidationError(fmt::format("{}: '{}' must be true or false", algorithm_, key));
  return params_[key].get<bool>();
}

std::string ParamReader::text(const char* key, const std::string& fallback) {
  used_.emplace_back(key);
  if (!params_.contains(key)) return fallback;
  if (!params_[key].is_string()) throw ValidationError(fmt::format("{}: '{}' must be a string", algorithm_, key));
  return params_[key].get<std::string>();
}

void ParamReader::finish() const {
  for (const auto& [key, value] : params_.items()) {
    if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
      throw ValidationError(fmt::format("{}: unknown hyperparameter '{}'", algorithm_, key));
    }
  }
}

}  // namespace bdss
