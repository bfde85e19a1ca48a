#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "bridgedss/classifier.hpp"

namespace bdss {

/// Naive Bayes over a schema: Laplace tables for nominal attributes, per-class Gaussians
/// for numeric ones. Classes absent from the training rows are never predicted.
class NaiveBayesModel {
 public:
  NaiveBayesModel() = default;
  explicit NaiveBayesModel(double varianceFloor) : varianceFloor_(varianceFloor) {}

  void fit(const Dataset& data);
  void fit(const Dataset& data, std::span<const Eigen::Index> rows);

  /// log P(c) + sum_j log P(x_j | c); -inf for classes never seen in training.
  Eigen::VectorXd logJoint(const Eigen::Ref<const Eigen::VectorXd>& row) const;
  Eigen::VectorXd posterior(const Eigen::Ref<const Eigen::VectorXd>& row) const;
  int predict(const Eigen::Ref<const Eigen::VectorXd>& row) const;

  const Eigen::VectorXd& logPrior() const { return logPrior_; }
  /// P(value | class) for a nominal attribute, classes by rows.
  Eigen::MatrixXd table(int attribute) const { return tables_.at(attribute).array().exp(); }
  double mean(int cls, int attribute) const { return mean_(cls, attribute); }
  double variance(int cls, int attribute) const { return var_(cls, attribute); }

  nlohmann::json toJson() const;
  static NaiveBayesModel fromJson(const nlohmann::json& j);

 private:
  double varianceFloor_ = 1e-6;
  std::vector<int> cardinality_;  // 0 for numeric attributes
  Eigen::VectorXd logPrior_;
  Eigen::VectorXi seen_;
  std::vector<Eigen::MatrixXd> tables_;  // log P(v | c), classes x values; empty for numeric
  Eigen::MatrixXd mean_;
  Eigen::MatrixXd var_;
};

class NaiveBayesClassifier : public Classifier {
 public:
  explicit NaiveBayesClassifier(const nlohmann::json& params = {});
  std::string_view algorithm() const override { return "naivebayes"; }
  nlohmann::json params() const override { return {{"varianceFloor", varianceFloor_}}; }
  const NaiveBayesModel& model() const { return model_; }

 protected:
  void fitImpl(const Dataset& data) override;
  int predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const override { return model_.predict(row); }
  nlohmann::json state() const override { return model_.toJson(); }
  void loadState(const nlohmann::json& s) override { model_ = NaiveBayesModel::fromJson(s); }

 private:
  double varianceFloor_ = 1e-6;
  NaiveBayesModel model_;
};

/// Hidden Naive Bayes over nominal attributes: each attribute's hidden parent mixes
/// P(a_i | a_j, c) over all other attributes, weighted by I(A_i; A_j | C).
class HnbClassifier : public Classifier {
 public:
  explicit HnbClassifier(const nlohmann::json& params = {});
  std::string_view algorithm() const override { return "hnb"; }
  nlohmann::json params() const override { return nlohmann::json::object(); }

  /// Conditional mutual information matrix (zero diagonal) from empirical frequencies.
  const Eigen::MatrixXd& cmi() const { return cmi_; }
  /// Row-normalized CMI; a row with no information is uniform over the other attributes.
  const Eigen::MatrixXd& weights() const { return weights_; }
  Eigen::VectorXd logJoint(const Eigen::Ref<const Eigen::VectorXd>& row) const;

 protected:
  void fitImpl(const Dataset& data) override;
  int predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const override;
  nlohmann::json state() const override;
  void loadState(const nlohmann::json& s) override;

 private:
  // P(a_i = u | a_j = v, c) at pair(i, j)(c, u * card_j + v)
  const Eigen::MatrixXd& pair(int i, int j) const { return pairs_[static_cast<std::size_t>(i * m_ + j)]; }

  int m_ = 0;
  std::vector<int> card_;
  Eigen::VectorXd logPrior_;
  Eigen::VectorXi seen_;
  Eigen::MatrixXd cmi_;
  Eigen::MatrixXd weights_;
  std::vector<Eigen::MatrixXd> pairs_;
  std::vector<Eigen::MatrixXd> singles_;  // P(a_i = u | c), used when there is one attribute
};

}  // namespace bdss
