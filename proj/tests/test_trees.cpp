#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "bridgedss/errors.hpp"
#include "bridgedss/trees.hpp"

using namespace bdss;

namespace {

// two numeric attributes on a coarse grid (so thresholds tie) and one nominal attribute
Dataset randomSmall(std::uint64_t seed, int n = 20) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> val(0, 4), cat(0, 2), cls(0, 2);
  Dataset d;
  d.schema.attributes = {{"a", AttributeKind::Numeric, {}},
                         {"b", AttributeKind::Numeric, {}},
                         {"c", AttributeKind::Nominal, {"x", "y", "z"}}};
  d.schema.classNames = {"p", "q", "r"};
  d.x.resize(n, 3);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    d.x(i, 0) = val(rng) * 0.5;
    d.x(i, 1) = val(rng) - 2.0;
    d.x(i, 2) = cat(rng);
    d.y(i) = cls(rng);
  }
  return d;
}

Dataset xorData(int copies) {
  Dataset d;
  d.schema.attributes = {{"a", AttributeKind::Numeric, {}}, {"b", AttributeKind::Numeric, {}}};
  d.schema.classNames = {"zero", "one"};
  d.x.resize(4 * copies, 2);
  d.y.resize(4 * copies);
  for (int r = 0; r < 4 * copies; ++r) {
    const int a = (r / 2) % 2, b = r % 2;
    d.x(r, 0) = a;
    d.x(r, 1) = b;
    d.y(r) = a ^ b;
  }
  return d;
}

std::vector<Eigen::Index> all(const Dataset& d) {
  std::vector<Eigen::Index> r(static_cast<std::size_t>(d.rows()));
  std::iota(r.begin(), r.end(), Eigen::Index{0});
  return r;
}

double giniRef(const std::vector<double>& c) {
  double n = 0, s = 0;
  for (double v : c) n += v;
  for (double v : c) s += (v / n) * (v / n);
  return 1.0 - s;
}

double entropyRef(const std::vector<double>& c) {
  double n = 0, h = 0;
  for (double v : c) n += v;
  for (double v : c) {
    if (v > 0) h -= v / n * std::log2(v / n);
  }
  return h;
}

struct Candidate {
  int feature;
  double threshold;  // midpoint, or category code
  double score;
};

// every binary split written out as a left/right predicate
std::vector<Candidate> cartCandidates(const Dataset& d) {
  std::vector<Candidate> out;
  const int n = static_cast<int>(d.rows());
  std::vector<double> parent(3, 0.0);
  for (int i = 0; i < n; ++i) parent[d.y(i)] += 1;
  for (int f = 0; f < 3; ++f) {
    std::vector<double> points;
    if (d.schema.attributes[f].nominal()) {
      for (int v = 0; v < 3; ++v) points.push_back(v);
    } else {
      std::vector<double> vals;
      for (int i = 0; i < n; ++i) vals.push_back(d.x(i, f));
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      for (std::size_t k = 0; k + 1 < vals.size(); ++k) points.push_back((vals[k] + vals[k + 1]) / 2);
    }
    for (double t : points) {
      std::vector<double> l(3, 0.0), r(3, 0.0);
      double nl = 0;
      for (int i = 0; i < n; ++i) {
        const bool left = d.schema.attributes[f].nominal() ? d.x(i, f) == t : d.x(i, f) <= t;
        (left ? l : r)[d.y(i)] += 1;
        nl += left;
      }
      if (nl == 0 || nl == n) continue;
      const double dec = giniRef(parent) - nl / n * giniRef(l) - (n - nl) / n * giniRef(r);
      out.push_back({f, t, dec});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("gini and entropy of small count vectors") {
  CHECK(giniImpurity(Eigen::Vector3d(1, 2, 3)) == doctest::Approx(11.0 / 18.0).epsilon(1e-15));
  CHECK(giniImpurity(Eigen::Vector2d(5, 0)) == 0.0);
  CHECK_THROWS_AS(giniImpurity(Eigen::Vector2d(0, 0)), PreconditionError);
  CHECK(entropy(Eigen::Vector2d(4, 4)) == doctest::Approx(1.0));
  CHECK(entropy(Eigen::Vector4d(1, 1, 1, 1)) == doctest::Approx(2.0));
}

TEST_CASE("CART best split equals brute-force enumeration on 100 random datasets") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CAPTURE(seed);
    const Dataset d = randomSmall(seed);
    const auto rows = all(d);
    const auto cands = cartCandidates(d);
    const auto split = cartBestSplit(d, rows);
    if (cands.empty()) {
      CHECK_FALSE(split.has_value());
      continue;
    }
    double best = -1;
    for (const auto& c : cands) best = std::max(best, c.score);
    // candidates are listed feature by feature, thresholds ascending: the first maximum wins
    const auto first = *std::find_if(cands.begin(), cands.end(), [&](const Candidate& c) { return c.score >= best - 1e-9; });
    REQUIRE(split.has_value());
    CHECK(split->decrease == doctest::Approx(best).epsilon(1e-12));
    CHECK(split->feature == first.feature);
    CHECK(split->threshold == first.threshold);
    CHECK(split->categorical == d.schema.attributes[first.feature].nominal());
  }
}

TEST_CASE("C4.5 best split equals brute-force enumeration on 100 random datasets") {
  for (std::uint64_t seed = 100; seed < 200; ++seed) {
    CAPTURE(seed);
    const Dataset d = randomSmall(seed);
    const int n = static_cast<int>(d.rows());
    std::vector<double> parent(3, 0.0);
    for (int i = 0; i < n; ++i) parent[d.y(i)] += 1;
    const double h = entropyRef(parent);

    struct C {
      int feature;
      bool multiway;
      double threshold, gain, ratio;
    };
    std::vector<C> cands;
    for (int f = 0; f < 3; ++f) {
      if (d.schema.attributes[f].nominal()) {
        std::vector<std::vector<double>> parts(3, std::vector<double>(3, 0.0));
        std::vector<double> sizes(3, 0.0);
        for (int i = 0; i < n; ++i) {
          parts[static_cast<int>(d.x(i, f))][d.y(i)] += 1;
          sizes[static_cast<int>(d.x(i, f))] += 1;
        }
        if (std::count_if(sizes.begin(), sizes.end(), [](double s) { return s > 0; }) < 2) continue;
        double rem = 0;
        for (int v = 0; v < 3; ++v) {
          if (sizes[v] > 0) rem += sizes[v] / n * entropyRef(parts[v]);
        }
        cands.push_back({f, true, 0.0, h - rem, (h - rem) / entropyRef(sizes)});
        continue;
      }
      std::vector<double> vals;
      for (int i = 0; i < n; ++i) vals.push_back(d.x(i, f));
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      bool any = false;
      C best{f, false, 0, -1, 0};
      for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
        const double t = (vals[k] + vals[k + 1]) / 2;
        std::vector<double> l(3, 0.0), r(3, 0.0);
        double nl = 0;
        for (int i = 0; i < n; ++i) {
          (d.x(i, f) <= t ? l : r)[d.y(i)] += 1;
          nl += d.x(i, f) <= t;
        }
        const double gain = h - nl / n * entropyRef(l) - (n - nl) / n * entropyRef(r);
        if (!any || gain > best.gain + 1e-9) {
          best = {f, false, t, gain, gain / entropyRef({nl, n - nl})};
          any = true;
        }
      }
      if (any) cands.push_back(best);
    }
    const auto split = c45BestSplit(d, all(d));
    if (cands.empty() || h == 0) {
      CHECK_FALSE(split.has_value());
      continue;
    }
    double avg = 0;
    for (const auto& c : cands) avg += c.gain;
    avg /= static_cast<double>(cands.size());
    const C* pick = nullptr;
    for (const auto& c : cands) {
      if (c.gain < avg - 1e-9) continue;
      if (!pick || c.ratio > pick->ratio + 1e-9) pick = &c;
    }
    REQUIRE(split.has_value());
    CHECK(split->feature == pick->feature);
    CHECK(split->multiway == pick->multiway);
    CHECK(split->threshold == pick->threshold);
    CHECK(split->gain == doctest::Approx(pick->gain).epsilon(1e-12));
    CHECK(split->gainRatio == doctest::Approx(pick->ratio).epsilon(1e-12));
  }
}

TEST_CASE("pessimistic error estimate matches the published upper limits") {
  // U_25%(0, N) for N = 6, 9, 1 and U_25%(1, 16), as used in the classic pruning example
  CHECK(pessimisticExtraErrors(6, 0, 0.25) / 6 == doctest::Approx(0.206).epsilon(0.005));
  CHECK(pessimisticExtraErrors(9, 0, 0.25) / 9 == doctest::Approx(0.143).epsilon(0.005));
  CHECK(pessimisticExtraErrors(1, 0, 0.25) / 1 == doctest::Approx(0.750).epsilon(0.005));
  CHECK((1 + pessimisticExtraErrors(16, 1, 0.25)) / 16 == doctest::Approx(0.157).epsilon(0.02));
}

TEST_CASE("trees separate XOR, which no single split can") {
  const Dataset d = xorData(1);
  CartClassifier cart;
  cart.fit(d);
  CHECK(accuracy(cart.predict(d), d.y) == 1.0);
  C45Classifier c45;
  c45.fit(d);
  CHECK(accuracy(c45.predict(d), d.y) == 1.0);
  CHECK(c45.tree().leaves() == 4);
}

TEST_CASE("tree node counts partition the training rows") {
  const Dataset d = randomSmall(7, 60);
  CartClassifier cart;
  C45Classifier c45(nlohmann::json{{"prune", false}});
  cart.fit(d);
  c45.fit(d);
  for (const Tree* t : {&cart.tree(), &c45.tree()}) {
    CHECK(t->nodes[0].counts.sum() == 60);
    for (const auto& n : t->nodes) {
      if (n.leaf()) continue;
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
      for (int c : n.children) sum += t->nodes[c].counts;
      CHECK(sum == n.counts);
    }
  }
  // an unpruned CART tree reaches the bound set by identical rows with different labels
  std::map<std::vector<double>, Eigen::VectorXd> groups;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    auto& g = groups.try_emplace({d.x(i, 0), d.x(i, 1), d.x(i, 2)}, Eigen::VectorXd::Zero(3)).first->second;
    g(d.y(i)) += 1;
  }
  double bound = 0;
  for (const auto& [_, g] : groups) bound += g.maxCoeff();
  CHECK(accuracy(cart.predict(d), d.y) == doctest::Approx(bound / 60));
}

TEST_CASE("CART cost-complexity pruning collapses to the root for a large alpha") {
  const Dataset d = randomSmall(3, 60);
  CartClassifier full, pruned(nlohmann::json{{"ccpAlpha", 10.0}});
  full.fit(d);
  pruned.fit(d);
  CHECK(full.tree().leaves() > 1);
  CHECK(pruned.tree().nodes.size() == 1);
  CHECK(pruned.predict(Eigen::Vector3d(0, 0, 0)) == argmaxLowest(Eigen::Vector3d(pruned.tree().nodes[0].counts)));
}

TEST_CASE("C4.5 pruning replaces noise subtrees by leaves") {
  const Dataset d = randomSmall(11, 80);
  C45Classifier raw(nlohmann::json{{"prune", false}}), pruned;
  raw.fit(d);
  pruned.fit(d);
  CHECK(pruned.tree().leaves() < raw.tree().leaves());
}

TEST_CASE("NBTree gates splits on node size and relative error reduction") {
  // too small to split: one Naive Bayes leaf
  NbTreeClassifier small;
  small.fit(xorData(7));
  CHECK(small.tree().nodes.size() == 1);
  CHECK(small.leafModels().size() == 1);

  // XOR defeats Naive Bayes; one split makes each side trivial
  const Dataset big = xorData(25);
  NbTreeClassifier tree;
  tree.fit(big);
  CHECK(tree.tree().nodes.size() > 1);
  CHECK(accuracy(tree.predict(big), big.y) == 1.0);

  // an unreachable gain threshold keeps the root a leaf
  NbTreeClassifier strict(nlohmann::json{{"minRelativeGain", 1.0}});
  strict.fit(big);
  CHECK(strict.tree().nodes.size() == 1);
}

TEST_CASE("tree learners are invariant to the order of training rows") {
  const Dataset d = randomSmall(21, 120);
  std::vector<Eigen::Index> perm = all(d);
  std::mt19937_64 rng(5);
  std::shuffle(perm.begin(), perm.end(), rng);
  const Dataset shuffled = d.subset(perm);
  for (const char* id : {"cart", "c45"}) {
    CAPTURE(id);
    auto a = makeClassifier(id), b = makeClassifier(id);
    a->fit(d);
    b->fit(shuffled);
    CHECK(a->predict(d) == b->predict(d));
  }
}

TEST_CASE("hyperparameters are validated") {
  CHECK_THROWS_AS(CartClassifier(nlohmann::json{{"minLeaf", 0}}), ValidationError);
  CHECK_THROWS_AS(C45Classifier(nlohmann::json{{"pruningConfidence", 0.9}}), ValidationError);
  CHECK_THROWS_AS(makeClassifier("cart", nlohmann::json{{"depth", 3}}), ValidationError);
}
