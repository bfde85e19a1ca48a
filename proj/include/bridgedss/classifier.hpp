#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "bridgedss/dataset.hpp"
#include "json.hpp"

namespace bdss {

/// Fit once, then predict. Fitted state is never touched by predict, so one model can
/// serve concurrent callers.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string_view algorithm() const = 0;
  /// Effective hyperparameters, defaults filled in.
  virtual nlohmann::json params() const = 0;

  void fit(const Dataset& data);
  bool fitted() const { return fitted_; }
  const Schema& schema() const { return schema_; }

  /// `row` is in the training schema's attribute order (nominal cells hold category codes).
  int predict(const Eigen::Ref<const Eigen::VectorXd>& row) const;
  Eigen::VectorXi predict(const Dataset& data) const;

  nlohmann::json toJson() const;

 protected:
  virtual void fitImpl(const Dataset& data) = 0;
  virtual int predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const = 0;
  virtual nlohmann::json state() const = 0;
  virtual void loadState(const nlohmann::json& state) = 0;

 private:
  void checkRow(const Eigen::Ref<const Eigen::VectorXd>& row) const;

  Schema schema_;
  bool fitted_ = false;

  friend std::unique_ptr<Classifier> loadClassifier(const nlohmann::json& j);
};

/// Algorithm ids in the order used by reports: ffnn, c45, nbtree, cart, naivebayes, smo, hnb, svm.
const std::vector<std::string>& classifierIds();
/// Unknown ids and unknown hyperparameter keys are validation errors.
std::unique_ptr<Classifier> makeClassifier(std::string_view algorithm, const nlohmann::json& params = {});
std::unique_ptr<Classifier> loadClassifier(const nlohmann::json& j);

/// Majority class of per-class counts; ties go to the lower class id.
int argmaxLowest(const Eigen::Ref<const Eigen::VectorXd>& scores);
double accuracy(const Eigen::VectorXi& predicted, const Eigen::VectorXi& truth);

/// Reads typed hyperparameters from a JSON object and rejects keys nobody asked for.
class ParamReader {
 public:
  ParamReader(std::string_view algorithm, const nlohmann::json& params);
  double real(const char* key, double fallback);
  int integer(const char* key, int fallback);
  bool flag(const char* key, bool fallback);
  std::string text(const char* key, const std::string& fallback);
  void finish() const;

 private:
  std::string algorithm_;
  nlohmann::json params_;
  std::vector<std::string> used_;
};

}  // namespace bdss
