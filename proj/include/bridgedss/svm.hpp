#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "bridgedss/classifier.hpp"

namespace bdss {

struct Kernel {
  enum class Type : std::uint8_t { Linear, Rbf };
  Type type = Type::Linear;
  double gamma = 0.01;

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) const;
  /// k(x_i, q) for every row x_i of `x`.
  Eigen::VectorXd row(const Eigen::MatrixXd& x, const Eigen::VectorXd& sqNorms,
                      const Eigen::Ref<const Eigen::VectorXd>& q) const;
  /// The same row from precomputed inner products x_i . q.
  Eigen::VectorXd fromDots(Eigen::VectorXd dots, const Eigen::VectorXd& sqNorms, double qq) const;
};

struct SmoOptions {
  double c = 1.0;
  double tol = 1e-3;
  double eps = 1e-12;  // smallest alpha change treated as progress
  Kernel kernel;
  /// Called after every accepted two-multiplier step with the current alphas.
  std::function<void(const Eigen::VectorXd& alpha)> onStep;
};

/// One binary machine, f(x) = sum_i alpha_i y_i k(x_i, x) + b with y in {+1, -1}.
struct BinaryMachine {
  int positive = 0;  // class id mapped to +1 (the lower id of the pair)
  int negative = 0;
  Eigen::VectorXd alpha;  // one per training instance of the pair
  Eigen::VectorXd y;
  double b = 0.0;
  Eigen::MatrixXd supportVectors;
  Eigen::VectorXd coef;  // alpha_i y_i for the support vectors
  Eigen::VectorXd w;     // linear kernel only
  int steps = 0;

  double decision(const Kernel& k, const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// Platt's SMO on one binary problem; labels are +1/-1.
BinaryMachine solveSmo(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SmoOptions& opt);

/// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j k(x_i, x_j).
double dualObjective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& alpha, const Kernel& k);
/// Largest KKT violation of a solution, measured on y_i f(x_i) against the margin.
double maxKktViolation(const Eigen::MatrixXd& x, const BinaryMachine& m, double c, const Kernel& k);

/// One-vs-one SVM over one-hot encoded features, trained by SMO; votes break toward the
/// lower class id. "smo" uses a linear kernel, "svm" an RBF kernel.
class SmoClassifier : public Classifier {
 public:
  struct Config {
    std::string algorithm = "smo";
    SmoOptions options;
  };

  static Config smoDefaults(const nlohmann::json& params);
  static Config svmDefaults(const nlohmann::json& params);

  explicit SmoClassifier(Config cfg) : cfg_(std::move(cfg)) {}
  std::string_view algorithm() const override { return cfg_.algorithm; }
  nlohmann::json params() const override;

  void setObserver(std::function<void(const Eigen::VectorXd&)> f) { cfg_.options.onStep = std::move(f); }
  const std::vector<BinaryMachine>& machines() const { return machines_; }
  const Kernel& kernel() const { return cfg_.options.kernel; }
  double c() const { return cfg_.options.c; }
  /// Encoded training rows of one machine, in the order of its alphas.
  Eigen::MatrixXd machineInputs(const Dataset& data, std::size_t machine) const;

 protected:
  void fitImpl(const Dataset& data) override;
  int predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const override;
  nlohmann::json state() const override;
  void loadState(const nlohmann::json& s) override;

 private:
  static Config parse(std::string algorithm, Kernel::Type kernel, const nlohmann::json& params);

  Config cfg_;
  std::vector<BinaryMachine> machines_;
  int constant_ = -1;  // single-class training data
};

}  // namespace bdss
