#include "bridgedss/trees.hpp"

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bridgedss/eigen_json.hpp"
#include "bridgedss/errors.hpp"

namespace bdss {

namespace {

constexpr double kTieEps = 1e-12;

Eigen::VectorXd classCounts(const Dataset& data, std::span<const Eigen::Index> rows) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(data.schema.numClasses());
  for (auto i : rows) c(data.y(i)) += 1.0;
  return c;
}

bool pure(const Eigen::VectorXd& counts) { return (counts.array() > 0).count() <= 1; }

double giniOf(const Eigen::VectorXd& counts, double n) {
  if (n <= 0) return 0.0;
  return 1.0 - (counts.array() / n).square().sum();
}

// Sorted (value, label) pairs of one attribute over the node.
std::vector<std::pair<double, int>> sortedColumn(const Dataset& data, std::span<const Eigen::Index> rows, int f) {
  std::vector<std::pair<double, int>> col;
  col.reserve(rows.size());
  for (auto i : rows) col.emplace_back(data.x(i, f), data.y(i));
  std::sort(col.begin(), col.end());
  return col;
}

double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

struct NumericCut {
  double threshold = 0.0;
  double gain = -std::numeric_limits<double>::infinity();
  double leftCount = 0.0;
};

// Highest-information-gain midpoint of a numeric attribute (lowest threshold on ties).
std::optional<NumericCut> bestEntropyCut(const Dataset& data, std::span<const Eigen::Index> rows, int f,
                                         const Eigen::VectorXd& parent) {
  auto col = sortedColumn(data, rows, f);
  const double n = static_cast<double>(col.size());
  const double h = entropy(parent);
  Eigen::VectorXd left = Eigen::VectorXd::Zero(parent.size());
  std::optional<NumericCut> best;
  for (std::size_t p = 0; p + 1 < col.size(); ++p) {
    left(col[p].second) += 1.0;
    if (!(col[p].first < col[p + 1].first)) continue;
    const double nl = static_cast<double>(p + 1);
    Eigen::VectorXd right = parent - left;
    const double gain = h - (nl / n) * entropy(left) - ((n - nl) / n) * entropy(right);
    if (!best || gain > best->gain + kTieEps) best = NumericCut{midpoint(col[p].first, col[p + 1].first), gain, nl};
  }
  return best;
}

std::vector<std::vector<Eigen::Index>> partitionRows(const Dataset& data, std::span<const Eigen::Index> rows,
                                                     const TreeNode& node, int card) {
  std::vector<std::vector<Eigen::Index>> parts(node.kind == SplitKind::Multiway ? card : 2);
  for (auto i : rows) {
    const double v = data.x(i, node.feature);
    switch (node.kind) {
      case SplitKind::Threshold: parts[v <= node.threshold ? 0 : 1].push_back(i); break;
      case SplitKind::Category: parts[static_cast<int>(v) == node.category ? 0 : 1].push_back(i); break;
      case SplitKind::Multiway: parts[static_cast<int>(v)].push_back(i); break;
    }
  }
  return parts;
}

std::vector<Eigen::Index> allRows(const Dataset& d) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(d.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  return rows;
}

// Drops nodes no longer reachable from the root after pruning.
Tree compact(const Tree& t) {
  Tree out;
  std::vector<int> remap(t.nodes.size(), -1);
  // breadth-first keeps children of one node contiguous
  std::vector<int> queue{0};
  for (std::size_t q = 0; q < queue.size(); ++q) {
    remap[queue[q]] = static_cast<int>(q);
    for (int c : t.nodes[queue[q]].children) queue.push_back(c);
  }
  for (int old : queue) {
    TreeNode n = t.nodes[old];
    for (auto& c : n.children) c = remap[c];
    out.nodes.push_back(std::move(n));
  }
  return out;
}

}  // namespace

double giniImpurity(const Eigen::Ref<const Eigen::VectorXd>& counts) {
  if ((counts.array() < 0).any()) throw PreconditionError("class counts must be non-negative");
  const double n = counts.sum();
  if (n <= 0) throw PreconditionError("gini impurity of an empty node");
  return 1.0 - (counts.array() / n).square().sum();
}

double entropy(const Eigen::Ref<const Eigen::VectorXd>& counts) {
  const double n = counts.sum();
  if (n <= 0) return 0.0;
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    if (counts(i) > 0) {
      const double p = counts(i) / n;
      h -= p * std::log2(p);
    }
  }
  return h;
}

int Tree::leafFor(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  int at = 0;
  while (!nodes[at].leaf()) {
    const auto& n = nodes[at];
    const double v = row(n.feature);
    switch (n.kind) {
      case SplitKind::Threshold: at = n.children[v <= n.threshold ? 0 : 1]; break;
      case SplitKind::Category: at = n.children[static_cast<int>(v) == n.category ? 0 : 1]; break;
      case SplitKind::Multiway: at = n.children.at(static_cast<std::size_t>(v)); break;
    }
  }
  return at;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (int c : nodes[i].children) d[c] = d[i] + 1;
    best = std::max(best, d[i]);
  }
  return best;
}

int Tree::leaves() const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.leaf(); }));
}

nlohmann::json Tree::toJson() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& n : nodes) {
    nlohmann::json j{{"label", n.label}, {"counts", vectorToJson(n.counts)}};
    if (!n.leaf()) {
      j["feature"] = n.feature;
      j["children"] = n.children;
      switch (n.kind) {
        case SplitKind::Threshold: j["threshold"] = n.threshold; break;
        case SplitKind::Category: j["category"] = n.category; break;
        case SplitKind::Multiway: j["multiway"] = true; break;
      }
    }
    if (n.model >= 0) j["model"] = n.model;
    out.push_back(std::move(j));
  }
  return out;
}

Tree Tree::fromJson(const nlohmann::json& j) {
  Tree t;
  for (const auto& e : j) {
    TreeNode n;
    n.label = e.at("label").get<int>();
    n.counts = vectorFromJson(e.at("counts"));
    if (e.contains("children")) {
      n.feature = e.at("feature").get<int>();
      n.children = e.at("children").get<std::vector<int>>();
      if (e.contains("threshold")) {
        n.kind = SplitKind::Threshold;
        n.threshold = e.at("threshold").get<double>();
      } else if (e.contains("category")) {
        n.kind = SplitKind::Category;
        n.category = e.at("category").get<int>();
      } else {
        n.kind = SplitKind::Multiway;
      }
    }
    if (e.contains("model")) n.model = e.at("model").get<int>();
    t.nodes.push_back(std::move(n));
  }
  const auto size = static_cast<int>(t.nodes.size());
  if (size == 0) throw SchemaError("tree has no nodes");
  for (const auto& n : t.nodes) {
    for (int c : n.children) {
      if (c <= 0 || c >= size) throw SchemaError("tree child index out of range");
    }
  }
  return t;
}

// ---------------------------------------------------------------- CART

std::optional<CartSplit> cartBestSplit(const Dataset& data, std::span<const Eigen::Index> rows) {
  if (rows.size() < 2) return std::nullopt;
  const Eigen::VectorXd parent = classCounts(data, rows);
  if (pure(parent)) return std::nullopt;
  const double n = static_cast<double>(rows.size());
  const double g = giniOf(parent, n);
  const int k = data.schema.numClasses();

  std::optional<CartSplit> best;
  auto offer = [&](int f, bool categorical, double threshold, const Eigen::VectorXd& left, double nl) {
    const Eigen::VectorXd right = parent - left;
    const double dec = g - (nl / n) * giniOf(left, nl) - ((n - nl) / n) * giniOf(right, n - nl);
    if (!best || dec > best->decrease + kTieEps) best = CartSplit{f, categorical, threshold, dec};
  };

  for (int f = 0; f < data.schema.numAttributes(); ++f) {
    const auto& attr = data.schema.attributes[f];
    if (attr.nominal()) {
      Eigen::MatrixXd byCat = Eigen::MatrixXd::Zero(attr.cardinality(), k);
      for (auto i : rows) byCat(static_cast<Eigen::Index>(data.x(i, f)), data.y(i)) += 1.0;
      for (int v = 0; v < attr.cardinality(); ++v) {
        const double nl = byCat.row(v).sum();
        if (nl == 0 || nl == n) continue;
        offer(f, true, v, byCat.row(v).transpose(), nl);
      }
      continue;
    }
    auto col = sortedColumn(data, rows, f);
    Eigen::VectorXd left = Eigen::VectorXd::Zero(k);
    for (std::size_t p = 0; p + 1 < col.size(); ++p) {
      left(col[p].second) += 1.0;
      if (col[p].first < col[p + 1].first) offer(f, false, midpoint(col[p].first, col[p + 1].first), left, static_cast<double>(p + 1));
    }
  }
  return best;
}

CartClassifier::CartClassifier(const nlohmann::json& params) {
  ParamReader p("cart", params);
  minLeaf_ = p.integer("minLeaf", 2);
  ccpAlpha_ = p.real("ccpAlpha", 0.0);
  p.finish();
  if (minLeaf_ < 1) throw ValidationError("cart: minLeaf must be >= 1");
  if (ccpAlpha_ < 0) throw ValidationError("cart: ccpAlpha must be >= 0");
}

int CartClassifier::grow(const Dataset& data, std::vector<Eigen::Index>& rows) {
  const int id = static_cast<int>(tree_.nodes.size());
  tree_.nodes.emplace_back();
  Eigen::VectorXd counts = classCounts(data, rows);
  tree_.nodes[id].counts = counts;
  tree_.nodes[id].label = argmaxLowest(counts);
  if (static_cast<int>(rows.size()) < minLeaf_ || pure(counts)) return id;
  auto split = cartBestSplit(data, rows);
  if (!split) return id;

  TreeNode& node = tree_.nodes[id];
  node.feature = split->feature;
  node.kind = split->categorical ? SplitKind::Category : SplitKind::Threshold;
  node.threshold = split->categorical ? 0.0 : split->threshold;
  node.category = split->categorical ? static_cast<int>(split->threshold) : -1;
  auto parts = partitionRows(data, rows, node, 0);
  rows.clear();
  rows.shrink_to_fit();
  const int left = grow(data, parts[0]);
  const int right = grow(data, parts[1]);
  tree_.nodes[id].children = {left, right};
  return id;
}

namespace {

struct Cost {
  double subtree = 0.0;  // resubstitution error of the subtree, as a fraction of all rows
  int leaves = 0;
};

Cost ccpPrune(Tree& t, int id, double total, double alpha) {
  auto& n = t.nodes[id];
  const double asLeaf = (n.counts.sum() - n.counts.maxCoeff()) / total;
  if (n.leaf()) return {asLeaf, 1};
  Cost c;
  for (int child : std::vector<int>(n.children)) {
    auto cc = ccpPrune(t, child, total, alpha);
    c.subtree += cc.subtree;
    c.leaves += cc.leaves;
  }
  if ((asLeaf - c.subtree) / (c.leaves - 1) <= alpha + kTieEps) {
    t.nodes[id].children.clear();
    t.nodes[id].feature = -1;
    return {asLeaf, 1};
  }
  return c;
}

}  // namespace

void CartClassifier::prune(int node, double total) {
  ccpPrune(tree_, node, total, ccpAlpha_);
  tree_ = compact(tree_);
}

void CartClassifier::fitImpl(const Dataset& data) {
  tree_ = Tree{};
  auto rows = allRows(data);
  grow(data, rows);
  if (ccpAlpha_ > 0) prune(0, static_cast<double>(data.rows()));
}

int CartClassifier::predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  return tree_.nodes[tree_.leafFor(row)].label;
}

// ---------------------------------------------------------------- C4.5

std::optional<C45Split> c45BestSplit(const Dataset& data, std::span<const Eigen::Index> rows) {
  if (rows.size() < 2) return std::nullopt;
  const Eigen::VectorXd parent = classCounts(data, rows);
  if (pure(parent)) return std::nullopt;
  const double n = static_cast<double>(rows.size());
  const double h = entropy(parent);
  const int k = data.schema.numClasses();

  std::vector<C45Split> candidates;
  for (int f = 0; f < data.schema.numAttributes(); ++f) {
    const auto& attr = data.schema.attributes[f];
    if (attr.nominal()) {
      Eigen::MatrixXd byCat = Eigen::MatrixXd::Zero(attr.cardinality(), k);
      for (auto i : rows) byCat(static_cast<Eigen::Index>(data.x(i, f)), data.y(i)) += 1.0;
      const Eigen::VectorXd sizes = byCat.rowwise().sum();
      if ((sizes.array() > 0).count() < 2) continue;
      double rem = 0.0;
      for (int v = 0; v < attr.cardinality(); ++v) rem += sizes(v) / n * entropy(byCat.row(v).transpose());
      const double gain = h - rem;
      candidates.push_back({f, true, 0.0, gain, gain / entropy(sizes)});
      continue;
    }
    auto cut = bestEntropyCut(data, rows, f, parent);
    if (!cut) continue;
    Eigen::Vector2d sizes(cut->leftCount, n - cut->leftCount);
    candidates.push_back({f, false, cut->threshold, cut->gain, cut->gain / entropy(sizes)});
  }
  if (candidates.empty()) return std::nullopt;

  double avg = 0.0;
  for (const auto& c : candidates) avg += c.gain;
  avg /= static_cast<double>(candidates.size());
  std::optional<C45Split> best;
  for (const auto& c : candidates) {
    if (c.gain < avg - kTieEps) continue;
    if (!best || c.gainRatio > best->gainRatio + kTieEps) best = c;
  }
  return best;
}

double pessimisticExtraErrors(double n, double e, double cf) {
  if (n <= 0) return 0.0;
  if (e < 1.0) {
    const double base = n * (1.0 - std::pow(cf, 1.0 / n));
    if (e == 0.0) return base;
    return base + e * (pessimisticExtraErrors(n, 1.0, cf) - base);
  }
  if (e + 0.5 >= n) return std::max(n - e, 0.0);
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - cf);
  const double f = (e + 0.5) / n;
  const double r = (f + z * z / (2 * n) + z * std::sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n);
  return r * n - e;
}

C45Classifier::C45Classifier(const nlohmann::json& params) {
  ParamReader p("c45", params);
  confidence_ = p.real("pruningConfidence", 0.25);
  prune_ = p.flag("prune", true);
  minLeaf_ = p.integer("minLeaf", 2);
  p.finish();
  if (!(confidence_ > 0 && confidence_ <= 0.5)) throw ValidationError("c45: pruningConfidence must be in (0, 0.5]");
  if (minLeaf_ < 1) throw ValidationError("c45: minLeaf must be >= 1");
}

int C45Classifier::grow(const Dataset& data, std::vector<Eigen::Index>& rows, int parentLabel) {
  const int id = static_cast<int>(tree_.nodes.size());
  tree_.nodes.emplace_back();
  Eigen::VectorXd counts = classCounts(data, rows);
  tree_.nodes[id].counts = counts;
  tree_.nodes[id].label = rows.empty() ? parentLabel : argmaxLowest(counts);
  if (static_cast<int>(rows.size()) < minLeaf_ || pure(counts)) return id;
  auto split = c45BestSplit(data, rows);
  if (!split) return id;

  TreeNode& node = tree_.nodes[id];
  node.feature = split->feature;
  node.kind = split->multiway ? SplitKind::Multiway : SplitKind::Threshold;
  node.threshold = split->threshold;
  const int card = data.schema.attributes[split->feature].cardinality();
  auto parts = partitionRows(data, rows, node, card);
  rows.clear();
  rows.shrink_to_fit();
  const int label = node.label;
  std::vector<int> children;
  for (auto& part : parts) children.push_back(grow(data, part, label));
  tree_.nodes[id].children = std::move(children);
  return id;
}

double C45Classifier::prune(int id) {
  auto& n = tree_.nodes[id];
  const double total = n.counts.sum();
  const double errors = total - (total > 0 ? n.counts.maxCoeff() : 0.0);
  const double asLeaf = errors + pessimisticExtraErrors(total, errors, confidence_);
  if (n.leaf()) return asLeaf;
  double subtree = 0.0;
  for (int child : std::vector<int>(n.children)) subtree += prune(child);
  if (asLeaf <= subtree) {
    tree_.nodes[id].children.clear();
    tree_.nodes[id].feature = -1;
    return asLeaf;
  }
  return subtree;
}

void C45Classifier::fitImpl(const Dataset& data) {
  tree_ = Tree{};
  auto rows = allRows(data);
  grow(data, rows, 0);
  if (prune_) {
    prune(0);
    tree_ = compact(tree_);
  }
}

int C45Classifier::predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  return tree_.nodes[tree_.leafFor(row)].label;
}

// ---------------------------------------------------------------- NBTree

NbTreeClassifier::NbTreeClassifier(const nlohmann::json& params) {
  ParamReader p("nbtree", params);
  minNode_ = p.integer("minNode", 30);
  folds_ = p.integer("folds", 5);
  minRelativeGain_ = p.real("minRelativeGain", 0.05);
  p.finish();
  if (folds_ < 2) throw ValidationError("nbtree: folds must be >= 2");
}

double NbTreeClassifier::cvCorrect(const Dataset& data, std::span<const Eigen::Index> rows) const {
  double correct = 0.0;
  std::vector<Eigen::Index> train, test;
  for (int fold = 0; fold < folds_; ++fold) {
    train.clear();
    test.clear();
    for (std::size_t p = 0; p < rows.size(); ++p) (static_cast<int>(p % folds_) == fold ? test : train).push_back(rows[p]);
    if (test.empty()) continue;
    NaiveBayesModel nb;
    nb.fit(data, train);
    for (auto i : test) correct += nb.predict(data.x.row(i).transpose()) == data.y(i) ? 1.0 : 0.0;
  }
  return correct;
}

int NbTreeClassifier::grow(const Dataset& data, std::vector<Eigen::Index>& rows) {
  const int id = static_cast<int>(tree_.nodes.size());
  tree_.nodes.emplace_back();
  const Eigen::VectorXd counts = classCounts(data, rows);
  tree_.nodes[id].counts = counts;
  tree_.nodes[id].label = argmaxLowest(counts);
  auto makeLeaf = [&] {
    NaiveBayesModel nb;
    nb.fit(data, rows);
    tree_.nodes[id].model = static_cast<int>(models_.size());
    models_.push_back(std::move(nb));
    return id;
  };
  const double n = static_cast<double>(rows.size());
  if (static_cast<int>(rows.size()) < minNode_ || pure(counts)) return makeLeaf();
  const double nodeError = 1.0 - cvCorrect(data, rows) / n;
  if (nodeError <= 0) return makeLeaf();

  TreeNode best;
  double bestCorrect = -1.0;
  for (int f = 0; f < data.schema.numAttributes(); ++f) {
    const auto& attr = data.schema.attributes[f];
    TreeNode cand;
    cand.feature = f;
    if (attr.nominal()) {
      cand.kind = SplitKind::Multiway;
    } else {
      auto cut = bestEntropyCut(data, rows, f, counts);
      if (!cut) continue;
      cand.kind = SplitKind::Threshold;
      cand.threshold = cut->threshold;
    }
    auto parts = partitionRows(data, rows, cand, attr.cardinality());
    if (std::count_if(parts.begin(), parts.end(), [](const auto& p) { return !p.empty(); }) < 2) continue;
    double correct = 0.0;
    for (const auto& part : parts) correct += cvCorrect(data, part);
    if (correct > bestCorrect) {
      bestCorrect = correct;
      best = cand;
    }
  }
  if (best.feature < 0) return makeLeaf();
  const double splitError = 1.0 - bestCorrect / n;
  if ((nodeError - splitError) / nodeError <= minRelativeGain_) return makeLeaf();

  const int card = data.schema.attributes[best.feature].cardinality();
  auto parts = partitionRows(data, rows, best, card);
  best.counts = counts;
  best.label = tree_.nodes[id].label;
  tree_.nodes[id] = best;
  std::vector<int> children;
  for (auto& part : parts) {
    if (part.empty()) {
      // unseen branch: fall back to the parent's instances
      std::vector<Eigen::Index> copy = rows;
      const int leaf = static_cast<int>(tree_.nodes.size());
      tree_.nodes.emplace_back();
      tree_.nodes[leaf].counts = Eigen::VectorXd::Zero(counts.size());
      tree_.nodes[leaf].label = best.label;
      NaiveBayesModel nb;
      nb.fit(data, copy);
      tree_.nodes[leaf].model = static_cast<int>(models_.size());
      models_.push_back(std::move(nb));
      children.push_back(leaf);
    } else {
      children.push_back(grow(data, part));
    }
  }
  tree_.nodes[id].children = std::move(children);
  return id;
}

void NbTreeClassifier::fitImpl(const Dataset& data) {
  tree_ = Tree{};
  models_.clear();
  auto rows = allRows(data);
  grow(data, rows);
}

int NbTreeClassifier::predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  const auto& leaf = tree_.nodes[tree_.leafFor(row)];
  return models_.at(leaf.model).predict(row);
}

nlohmann::json NbTreeClassifier::state() const {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : models_) models.push_back(m.toJson());
  return {{"tree", tree_.toJson()}, {"models", models}};
}

void NbTreeClassifier::loadState(const nlohmann::json& s) {
  tree_ = Tree::fromJson(s.at("tree"));
  models_.clear();
  for (const auto& m : s.at("models")) models_.push_back(NaiveBayesModel::fromJson(m));
  for (const auto& n : tree_.nodes) {
    if (n.leaf() && (n.model < 0 || n.model >= static_cast<int>(models_.size()))) throw SchemaError("nbtree leaf without a model");
  }
}

}  // namespace bdss
