#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

#include "bridgedss/bayes.hpp"
#include "bridgedss/classifier.hpp"

namespace bdss {

/// Gini impurity 1 - sum p_i^2. Throws PreconditionError when all counts are zero.
double giniImpurity(const Eigen::Ref<const Eigen::VectorXd>& counts);
/// Shannon entropy in bits of a count vector (0 for an empty vector).
double entropy(const Eigen::Ref<const Eigen::VectorXd>& counts);

enum class SplitKind : std::uint8_t { Threshold, Category, Multiway };

struct TreeNode {
  int feature = -1;  // -1 at leaves
  SplitKind kind = SplitKind::Threshold;
  double threshold = 0.0;  // Threshold: x <= threshold goes to children[0]
  int category = -1;       // Category: x == category goes to children[0]
  std::vector<int> children;  // Multiway: one child per category code
  Eigen::VectorXd counts;     // training class distribution reaching the node
  int label = 0;
  int model = -1;  // NBTree leaves: index of the leaf's Naive Bayes model

  bool leaf() const { return children.empty(); }
};

/// Flat node storage, root at index 0.
struct Tree {
  std::vector<TreeNode> nodes;

  int leafFor(const Eigen::Ref<const Eigen::VectorXd>& row) const;
  int depth() const;
  int leaves() const;
  nlohmann::json toJson() const;
  static Tree fromJson(const nlohmann::json& j);
};

struct CartSplit {
  int feature = -1;
  bool categorical = false;
  double threshold = 0.0;  // midpoint, or the category code sent left
  double decrease = 0.0;
};

/// Best Gini split over `rows`: numeric midpoints between consecutive distinct values,
/// nominal one-vs-rest. Ties go to the lower feature, then the lower threshold.
/// Empty when the node is pure or no attribute separates its instances.
std::optional<CartSplit> cartBestSplit(const Dataset& data, std::span<const Eigen::Index> rows);

class CartClassifier : public Classifier {
 public:
  explicit CartClassifier(const nlohmann::json& params = {});
  std::string_view algorithm() const override { return "cart"; }
  nlohmann::json params() const override { return {{"minLeaf", minLeaf_}, {"ccpAlpha", ccpAlpha_}}; }
  const Tree& tree() const { return tree_; }

 protected:
  void fitImpl(const Dataset& data) override;
  int predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const override;
  nlohmann::json state() const override { return tree_.toJson(); }
  void loadState(const nlohmann::json& s) override { tree_ = Tree::fromJson(s); }

 private:
  int grow(const Dataset& data, std::vector<Eigen::Index>& rows);
  void prune(int node, double total);

  int minLeaf_ = 2;
  double ccpAlpha_ = 0.0;
  Tree tree_;
};

struct C45Split {
  int feature = -1;
  bool multiway = false;
  double threshold = 0.0;
  double gain = 0.0;
  double gainRatio = 0.0;
};

/// Gain-ratio choice among attributes whose information gain is at least the average
/// over all candidate attributes. Nominal attributes split multiway; numeric ones use
/// their highest-gain midpoint. Ties go to the lower feature (and lower threshold).
std::optional<C45Split> c45BestSplit(const Dataset& data, std::span<const Eigen::Index> rows);

/// Pessimistic error bound of a leaf with n instances and e errors at confidence cf,
/// as extra errors on top of e.
double pessimisticExtraErrors(double n, double e, double cf);

class C45Classifier : public Classifier {
 public:
  explicit C45Classifier(const nlohmann::json& params = {});
  std::string_view algorithm() const override { return "c45"; }
  nlohmann::json params() const override {
    return {{"pruningConfidence", confidence_}, {"prune", prune_}, {"minLeaf", minLeaf_}};
  }
  const Tree& tree() const { return tree_; }

 protected:
  void fitImpl(const Dataset& data) override;
  int predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const override;
  nlohmann::json state() const override { return tree_.toJson(); }
  void loadState(const nlohmann::json& s) override { tree_ = Tree::fromJson(s); }

 private:
  int grow(const Dataset& data, std::vector<Eigen::Index>& rows, int parentLabel);
  double prune(int node);

  double confidence_ = 0.25;
  bool prune_ = true;
  int minLeaf_ = 2;
  Tree tree_;
};

/// Naive Bayes tree: a split is kept only when the node holds at least `minNode`
/// instances and the 5-fold cross-validated Naive Bayes error of the children is lower
/// than the node's own by more than `minRelativeGain`. Leaves hold Naive Bayes models.
class NbTreeClassifier : public Classifier {
 public:
  explicit NbTreeClassifier(const nlohmann::json& params = {});
  std::string_view algorithm() const override { return "nbtree"; }
  nlohmann::json params() const override {
    return {{"minNode", minNode_}, {"folds", folds_}, {"minRelativeGain", minRelativeGain_}};
  }
  const Tree& tree() const { return tree_; }
  const std::vector<NaiveBayesModel>& leafModels() const { return models_; }

 protected:
  void fitImpl(const Dataset& data) override;
  int predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const override;
  nlohmann::json state() const override;
  void loadState(const nlohmann::json& s) override;

 private:
  int grow(const Dataset& data, std::vector<Eigen::Index>& rows);
  double cvCorrect(const Dataset& data, std::span<const Eigen::Index> rows) const;

  int minNode_ = 30;
  int folds_ = 5;
  double minRelativeGain_ = 0.05;
  Tree tree_;
  std::vector<NaiveBayesModel> models_;
};

}  // namespace bdss
