#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>

#include "bridgedss/classifier.hpp"

namespace bdss {

/// One hidden sigmoid layer, softmax output.
struct FfnnWeights {
  Eigen::MatrixXd w1;  // hidden x inputs
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // classes x hidden
  Eigen::VectorXd b2;

  static FfnnWeights zerosLike(const FfnnWeights& o);
};

/// Mean cross-entropy of `x` (rows are instances) against labels `y`.
double ffnnLoss(const FfnnWeights& w, const Eigen::MatrixXd& x, const Eigen::VectorXi& y);
/// Gradient of ffnnLoss by backpropagation.
FfnnWeights ffnnGradient(const FfnnWeights& w, const Eigen::MatrixXd& x, const Eigen::VectorXi& y);
/// Class probabilities, one row per instance.
Eigen::MatrixXd ffnnForward(const FfnnWeights& w, const Eigen::MatrixXd& x);

class FfnnClassifier : public Classifier {
 public:
  explicit FfnnClassifier(const nlohmann::json& params = {});
  std::string_view algorithm() const override { return "ffnn"; }
  nlohmann::json params() const override;

  /// Called after every epoch with the mean training loss of that epoch's final weights.
  void setEpochObserver(std::function<void(int epoch, double loss)> f) { onEpoch_ = std::move(f); }
  const FfnnWeights& weights() const { return weights_; }
  int hiddenUnits() const { return static_cast<int>(weights_.b1.size()); }

 protected:
  void fitImpl(const Dataset& data) override;
  int predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const override;
  nlohmann::json state() const override;
  void loadState(const nlohmann::json& s) override;

 private:
  int hidden_ = 0;  // 0: (inputs + classes) / 2
  int epochs_ = 100;
  double lr_ = 0.3;
  double momentum_ = 0.2;
  int batchSize_ = 32;  // 0: full batch
  std::uint64_t seed_ = 1;
  std::function<void(int, double)> onEpoch_;
  FfnnWeights weights_;
};

}  // namespace bdss
