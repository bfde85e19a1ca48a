#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace bdss {

/// Fit on an unlabeled feature matrix (rows are instances), then assign any row to a
/// cluster in [0, k).
class Clusterer {
 public:
  virtual ~Clusterer() = default;

  virtual std::string_view algorithm() const = 0;
  virtual nlohmann::json params() const = 0;

  void fit(const Eigen::MatrixXd& x);
  bool fitted() const { return dims_ >= 0; }
  int k() const { return k_; }

  int assign(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXi assignAll(const Eigen::MatrixXd& x) const;
  /// Cluster of every training row as produced by the fit itself.
  const Eigen::VectorXi& trainingAssignment() const { return trainAssign_; }

  nlohmann::json toJson() const;

 protected:
  explicit Clusterer(int k) : k_(k) {}
  virtual Eigen::VectorXi fitImpl(const Eigen::MatrixXd& x) = 0;
  virtual int assignImpl(const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;
  virtual nlohmann::json state() const = 0;
  virtual void loadState(const nlohmann::json& s) = 0;

  int k_;

 private:
  int dims_ = -1;
  Eigen::VectorXi trainAssign_;

  friend std::unique_ptr<Clusterer> loadClusterer(const nlohmann::json& j);
};

/// Index of the nearest center (squared Euclidean); ties go to the lower index.
int nearestCenter(const Eigen::MatrixXd& centers, const Eigen::Ref<const Eigen::VectorXd>& x);
/// Sum of squared distances of each row to its assigned center.
double sumSquaredError(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centers, const Eigen::VectorXi& assignment);

class KMeans : public Clusterer {
 public:
  KMeans(int k, std::uint64_t seed, int restarts = 10, int maxIterations = 100);
  std::string_view algorithm() const override { return "kmeans"; }
  nlohmann::json params() const override;
  const Eigen::MatrixXd& centers() const { return centers_; }
  double sse() const { return sse_; }
  /// (restart, iteration, SSE after that iteration's assignment step)
  void setObserver(std::function<void(int, int, double)> f) { observer_ = std::move(f); }

 protected:
  Eigen::VectorXi fitImpl(const Eigen::MatrixXd& x) override;
  int assignImpl(const Eigen::Ref<const Eigen::VectorXd>& x) const override { return nearestCenter(centers_, x); }
  nlohmann::json state() const override;
  void loadState(const nlohmann::json& s) override;

 private:
  std::uint64_t seed_;
  int restarts_;
  int maxIterations_;
  Eigen::MatrixXd centers_;
  double sse_ = 0.0;
  std::function<void(int, int, double)> observer_;
};

/// Diagonal-covariance Gaussian mixture fitted by EM from a k-means start.
class GaussianMixture : public Clusterer {
 public:
  GaussianMixture(int k, std::uint64_t seed, double varianceFloor = 1e-6, int maxIterations = 100, double minGain = 1e-6);
  std::string_view algorithm() const override { return "em"; }
  nlohmann::json params() const override;
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::MatrixXd& means() const { return means_; }
  const Eigen::MatrixXd& variances() const { return vars_; }
  /// Posterior component probabilities of one row.
  Eigen::VectorXd responsibilities(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Mean log-likelihood per instance of `x`.
  double logLikelihood(const Eigen::MatrixXd& x) const;
  void setObserver(std::function<void(int iteration, double meanLogLikelihood)> f) { observer_ = std::move(f); }

 protected:
  Eigen::VectorXi fitImpl(const Eigen::MatrixXd& x) override;
  int assignImpl(const Eigen::Ref<const Eigen::VectorXd>& x) const override;
  nlohmann::json state() const override;
  void loadState(const nlohmann::json& s) override;

 private:
  Eigen::VectorXd logDensities(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  std::uint64_t seed_;
  double floor_;
  int maxIterations_;
  double minGain_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd means_;
  Eigen::MatrixXd vars_;
  std::function<void(int, double)> observer_;
};

/// Farthest-first traversal: one pass, n * k distance evaluations.
class FarthestFirst : public Clusterer {
 public:
  FarthestFirst(int k, std::uint64_t seed);
  std::string_view algorithm() const override { return "farthestfirst"; }
  nlohmann::json params() const override;
  /// Use `first` as the initial center instead of a seeded random pick.
  void setFirstCenter(Eigen::Index first) { first_ = first; }
  const Eigen::MatrixXd& centers() const { return centers_; }
  const std::vector<Eigen::Index>& centerRows() const { return centerRows_; }
  long long distanceCount() const { return distances_; }

 protected:
  Eigen::VectorXi fitImpl(const Eigen::MatrixXd& x) override;
  int assignImpl(const Eigen::Ref<const Eigen::VectorXd>& x) const override { return nearestCenter(centers_, x); }
  nlohmann::json state() const override;
  void loadState(const nlohmann::json& s) override;

 private:
  std::uint64_t seed_;
  std::optional<Eigen::Index> first_;
  Eigen::MatrixXd centers_;
  std::vector<Eigen::Index> centerRows_;
  long long distances_ = 0;
};

/// Unsupervised LVQ: the nearest prototype moves toward each sample with a linearly
/// decaying rate.
class Lvq : public Clusterer {
 public:
  Lvq(int k, std::uint64_t seed, double learningRate = 0.3, int epochs = 100);
  std::string_view algorithm() const override { return "lvq"; }
  nlohmann::json params() const override;
  const Eigen::MatrixXd& prototypes() const { return protos_; }
  const Eigen::MatrixXd& initialPrototypes() const { return initial_; }

 protected:
  Eigen::VectorXi fitImpl(const Eigen::MatrixXd& x) override;
  int assignImpl(const Eigen::Ref<const Eigen::VectorXd>& x) const override { return nearestCenter(protos_, x); }
  nlohmann::json state() const override;
  void loadState(const nlohmann::json& s) override;

 private:
  std::uint64_t seed_;
  double lr_;
  int epochs_;
  Eigen::MatrixXd protos_;
  Eigen::MatrixXd initial_;
};

/// Agglomerative average-linkage clustering cut at k clusters; unseen rows go to the
/// nearest cluster centroid.
class Hierarchical : public Clusterer {
 public:
  explicit Hierarchical(int k);
  std::string_view algorithm() const override { return "hierarchical"; }
  nlohmann::json params() const override { return {{"k", k_}}; }
  const Eigen::MatrixXd& centroids() const { return centroids_; }
  /// Merges in order, as pairs of the lowest original row index of each merged cluster.
  const std::vector<std::pair<Eigen::Index, Eigen::Index>>& merges() const { return merges_; }

 protected:
  Eigen::VectorXi fitImpl(const Eigen::MatrixXd& x) override;
  int assignImpl(const Eigen::Ref<const Eigen::VectorXd>& x) const override { return nearestCenter(centroids_, x); }
  nlohmann::json state() const override;
  void loadState(const nlohmann::json& s) override;

 private:
  Eigen::MatrixXd centroids_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> merges_;
};

/// Min-max scaling of every column, then k-means.
class FilteredClusterer : public Clusterer {
 public:
  FilteredClusterer(int k, std::uint64_t seed, int restarts = 10);
  std::string_view algorithm() const override { return "filtered"; }
  nlohmann::json params() const override;
  const KMeans& inner() const { return inner_; }
  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;

 protected:
  Eigen::VectorXi fitImpl(const Eigen::MatrixXd& x) override;
  int assignImpl(const Eigen::Ref<const Eigen::VectorXd>& x) const override;
  nlohmann::json state() const override;
  void loadState(const nlohmann::json& s) override;

 private:
  KMeans inner_;
  Eigen::VectorXd lo_;
  Eigen::VectorXd span_;
};

/// Self-organizing map on a rows x cols grid with a Gaussian neighbourhood; learning
/// rate and radius decay linearly to zero.
class Som : public Clusterer {
 public:
  Som(int rows, int cols, std::uint64_t seed, int epochs = 200, double learningRate = 0.5, double radius = -1.0);
  std::string_view algorithm() const override { return "som"; }
  nlohmann::json params() const override;
  const Eigen::MatrixXd& units() const { return units_; }
  /// Neighbourhood weight between two units at the given radius; radius 0 keeps only the BMU.
  double neighbourhood(int a, int b, double radius) const;
  double quantizationError(const Eigen::MatrixXd& x) const;
  /// Weights before training, for before/after comparisons.
  const Eigen::MatrixXd& initialUnits() const { return initial_; }

 protected:
  Eigen::VectorXi fitImpl(const Eigen::MatrixXd& x) override;
  int assignImpl(const Eigen::Ref<const Eigen::VectorXd>& x) const override { return nearestCenter(units_, x); }
  nlohmann::json state() const override;
  void loadState(const nlohmann::json& s) override;

 private:
  int rows_, cols_;
  std::uint64_t seed_;
  int epochs_;
  double lr_;
  double radius_;
  Eigen::MatrixXd units_;
  Eigen::MatrixXd initial_;
};

/// Clusterer ids in report order: em, kmeans, farthestfirst, lvq, hierarchical, filtered, som.
const std::vector<std::string>& clustererIds();
/// `params` may override k, seed and per-algorithm settings; unknown keys are rejected.
std::unique_ptr<Clusterer> makeClusterer(std::string_view algorithm, int k, std::uint64_t seed,
                                         const nlohmann::json& params = {});
std::unique_ptr<Clusterer> loadClusterer(const nlohmann::json& j);

struct ClusterEvaluation {
  std::vector<int> clusterToClass;
  double accuracy = 0.0;
  int emptyClusters = 0;
};

/// Majority training class per cluster (ties to the lower class id; clusters without
/// training rows take the global training majority), scored on the test assignment.
ClusterEvaluation classesToClustersAccuracy(const Eigen::VectorXi& trainClusters, const Eigen::VectorXi& trainLabels,
                                            const Eigen::VectorXi& testClusters, const Eigen::VectorXi& testLabels,
                                            int k, int numClasses);

}  // namespace bdss
