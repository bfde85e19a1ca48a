#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "bridgedss/clusterers.hpp"
#include "bridgedss/errors.hpp"

using namespace bdss;

namespace {

Eigen::MatrixXd gaussianBlobs(std::uint64_t seed, int perBlob, int blobs, int dims = 2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(perBlob * blobs, dims);
  for (int b = 0; b < blobs; ++b) {
    for (int i = 0; i < perBlob; ++i) {
      for (int d = 0; d < dims; ++d) x(b * perBlob + i, d) = 6.0 * ((b >> d) & 1) + 3.0 * b * (d == 0) + g(rng) * 0.8;
    }
  }
  return x;
}

Eigen::MatrixXd column(std::initializer_list<double> v) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double e : v) x(i++, 0) = e;
  return x;
}

// same partition up to relabeling
bool samePartition(const Eigen::VectorXi& a, const Eigen::VectorXi& b) {
  std::set<std::pair<int, int>> pairs;
  std::set<int> la, lb;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    pairs.emplace(a(i), b(i));
    la.insert(a(i));
    lb.insert(b(i));
  }
  return pairs.size() == la.size() && pairs.size() == lb.size();
}

// textbook average linkage: recompute every cluster distance from the raw points
Eigen::VectorXi naiveAverageLinkage(const Eigen::MatrixXd& x, int k) {
  std::vector<std::vector<Eigen::Index>> clusters;
  for (Eigen::Index i = 0; i < x.rows(); ++i) clusters.push_back({i});
  while (static_cast<int>(clusters.size()) > k) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        double s = 0;
        for (auto i : clusters[a]) {
          for (auto j : clusters[b]) s += (x.row(i) - x.row(j)).norm();
        }
        s /= static_cast<double>(clusters[a].size() * clusters[b].size());
        if (s < best) {
          best = s;
          ba = a;
          bb = b;
        }
      }
    }
    clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  Eigen::VectorXi out(x.rows());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (auto i : clusters[c]) out(i) = static_cast<int>(c);
  }
  return out;
}

}  // namespace

TEST_CASE("k-means SSE never increases within a run") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    const Eigen::MatrixXd x = gaussianBlobs(seed, 30, 4);
    KMeans km(4, seed, 3);
    std::vector<std::vector<double>> trace(3);
    km.setObserver([&](int r, int, double sse) { trace[static_cast<std::size_t>(r)].push_back(sse); });
    km.fit(x);
    for (const auto& t : trace) {
      REQUIRE_FALSE(t.empty());
      for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] <= t[i - 1] + 1e-9);
    }
    CHECK(km.sse() == doctest::Approx(sumSquaredError(x, km.centers(), km.trainingAssignment())));
  }
}

TEST_CASE("EM mean log-likelihood never decreases") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    const Eigen::MatrixXd x = gaussianBlobs(seed + 50, 25, 3);
    GaussianMixture em(3, seed);
    std::vector<double> ll;
    em.setObserver([&](int, double v) { ll.push_back(v); });
    em.fit(x);
    REQUIRE(ll.size() >= 2);
    for (std::size_t i = 1; i < ll.size(); ++i) CHECK(ll[i] >= ll[i - 1] - 1e-9);
    CHECK(em.weights().sum() == doctest::Approx(1.0));
    CHECK((em.variances().array() >= 1e-6).all());
    const Eigen::VectorXd r = em.responsibilities(x.row(0).transpose());
    CHECK(r.sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("k-means finds well-separated blobs and reseeds empty clusters") {
  const Eigen::MatrixXd x = gaussianBlobs(1, 40, 3);
  KMeans km(3, 1);
  km.fit(x);
  Eigen::VectorXi truth(120);
  for (int i = 0; i < 120; ++i) truth(i) = i / 40;
  CHECK(samePartition(km.trainingAssignment(), truth));

  // two distinct values but three clusters: fails cleanly
  KMeans tooMany(3, 1);
  CHECK_THROWS_AS(tooMany.fit(column({1, 1, 2, 2})), PreconditionError);
}

TEST_CASE("farthest-first picks the farthest point and counts n * k distances") {
  FarthestFirst ff(2, 0);
  ff.setFirstCenter(0);
  ff.fit(column({0, 1, 10}));
  CHECK(ff.centerRows() == std::vector<Eigen::Index>{0, 2});
  CHECK(ff.distanceCount() == 6);
  CHECK(ff.trainingAssignment() == Eigen::Vector3i(0, 0, 1));

  // equidistant candidates: the lower row wins
  FarthestFirst tie(2, 0);
  tie.setFirstCenter(1);
  tie.fit(column({-3, 0, 3}));
  CHECK(tie.centerRows() == std::vector<Eigen::Index>{1, 0});

  const Eigen::MatrixXd x = gaussianBlobs(2, 50, 4);
  FarthestFirst big(5, 9);
  big.fit(x);
  CHECK(big.distanceCount() == 200LL * 5);
}

TEST_CASE("average linkage merges the closest pair first, lower pair on ties") {
  Hierarchical h(2);
  h.fit(column({0, 1, 5, 6, 20}));
  using P = std::pair<Eigen::Index, Eigen::Index>;
  CHECK(h.merges() == std::vector<P>{{0, 1}, {2, 3}, {0, 2}});
  CHECK(h.trainingAssignment() == (Eigen::VectorXi(5) << 0, 0, 0, 0, 1).finished());
  CHECK(h.centroids()(1, 0) == 20.0);
  CHECK(h.assign(Eigen::VectorXd::Constant(1, 14.0)) == 1);
}

TEST_CASE("average linkage matches the textbook recomputation") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 10);
    Eigen::MatrixXd x(30, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = u(rng);
    Hierarchical h(4);
    h.fit(x);
    CHECK(samePartition(h.trainingAssignment(), naiveAverageLinkage(x, 4)));
  }
}

TEST_CASE("LVQ with a zero rate keeps its prototypes; otherwise they move toward the data") {
  const Eigen::MatrixXd x = gaussianBlobs(3, 30, 2);
  Lvq still(2, 4, 0.0, 5);
  still.fit(x);
  CHECK(still.prototypes() == still.initialPrototypes());

  Lvq lvq(2, 4);
  lvq.fit(x);
  CHECK(sumSquaredError(x, lvq.prototypes(), lvq.trainingAssignment()) <=
        sumSquaredError(x, lvq.initialPrototypes(), lvq.assignAll(x)) + 1e-9);
}

TEST_CASE("SOM neighbourhood and training") {
  Som som(4, 3, 1);
  CHECK(som.k() == 12);
  CHECK(som.neighbourhood(5, 5, 2.0) == 1.0);
  CHECK(som.neighbourhood(0, 1, 0.0) == 0.0);
  CHECK(som.neighbourhood(4, 4, 0.0) == 1.0);
  CHECK(som.neighbourhood(0, 1, 2.0) == doctest::Approx(std::exp(-1.0 / 8.0)));
  CHECK(som.neighbourhood(0, 1, 2.0) > som.neighbourhood(0, 2, 2.0));
  CHECK(som.neighbourhood(0, 11, 2.0) == som.neighbourhood(11, 0, 2.0));

  const Eigen::MatrixXd x = gaussianBlobs(6, 40, 4);
  som.fit(x);
  Som untrained(4, 3, 1, 0);
  untrained.fit(x);
  CHECK(untrained.units() == som.initialUnits());
  CHECK(som.quantizationError(x) < untrained.quantizationError(x));
}

TEST_CASE("SOM with radius zero moves only the winning unit") {
  // one epoch over three samples touches at most three of the eight units
  const Eigen::MatrixXd x = column({0.0, 0.45, 1.0});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    Som som(1, 8, seed, 1, 0.5, 0.0);
    som.fit(x);
    int moved = 0;
    for (int u = 0; u < 8; ++u) moved += som.units()(u, 0) != som.initialUnits()(u, 0);
    CHECK(moved >= 1);
    CHECK(moved <= 3);
  }
}

TEST_CASE("filtered clusterer scales columns before k-means") {
  Eigen::MatrixXd x(4, 2);
  x << 0, 100, 1, 300, 0, 500, 1, 700;
  FilteredClusterer f(2, 1, 2);
  f.fit(x);
  const Eigen::MatrixXd t = f.transform(x);
  CHECK(t.minCoeff() == 0.0);
  CHECK(t.maxCoeff() == 1.0);
  KMeans direct(2, 1, 2);
  direct.fit(t);
  CHECK(f.trainingAssignment() == direct.trainingAssignment());
}

TEST_CASE("classes-to-clusters accuracy maps clusters to majority classes") {
  Eigen::VectorXi trainC(6), trainY(6), testC(4), testY(4);
  trainC << 0, 0, 0, 1, 1, 1;
  trainY << 2, 2, 1, 0, 0, 1;
  testC << 0, 1, 2, 1;
  testY << 2, 0, 1, 1;
  const auto ev = classesToClustersAccuracy(trainC, trainY, testC, testY, 3, 3);
  // cluster 2 is empty in training and takes the global majority (classes 0, 1, 2 tie at 2 -> 0)
  CHECK(ev.clusterToClass == std::vector<int>{2, 0, 0});
  CHECK(ev.emptyClusters == 1);
  CHECK(ev.accuracy == 0.5);
}

TEST_CASE("clusterers round-trip through JSON") {
  const Eigen::MatrixXd x = gaussianBlobs(7, 20, 3, 3);
  for (const auto& id : clustererIds()) {
    CAPTURE(id);
    auto c = makeClusterer(id, id == "som" ? 12 : 3, 5);
    c->fit(x);
    const auto doc = c->toJson();
    auto back = loadClusterer(nlohmann::json::parse(doc.dump()));
    CHECK(back->algorithm() == id);
    CHECK(back->assignAll(x) == c->assignAll(x));
    CHECK(back->toJson()["params"] == doc["params"]);
  }
}

TEST_CASE("clusterer factory rejects unknown ids and keys") {
  CHECK_THROWS_AS(makeClusterer("dbscan", 3, 1), ValidationError);
  CHECK_THROWS_AS(makeClusterer("kmeans", 3, 1, {{"restart", 4}}), ValidationError);
  CHECK_THROWS_AS(makeClusterer("som", 5, 1, {{"rows", 2}, {"cols", 2}}), ValidationError);
  auto km = makeClusterer("kmeans", 2, 1);
  CHECK_THROWS_AS(km->assign(Eigen::Vector2d(0, 0)), PreconditionError);
}
