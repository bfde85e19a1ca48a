#include "bridgedss/clusterers.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "bridgedss/classifier.hpp"
#include "bridgedss/eigen_json.hpp"
#include "bridgedss/errors.hpp"
#include "bridgedss/log.hpp"

namespace bdss {

namespace {

constexpr int kClustererVersion = 1;
constexpr double kInf = std::numeric_limits<double>::infinity();

// k distinct rows in seeded random order.
std::vector<Eigen::Index> pickDistinct(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Eigen::Index> chosen;
  for (auto i : order) {
    bool dup = false;
    for (auto c : chosen) {
      if (x.row(c) == x.row(i)) {
        dup = true;
        break;
      }
    }
    if (!dup) chosen.push_back(i);
    if (static_cast<int>(chosen.size()) == k) return chosen;
  }
  throw PreconditionError(fmt::format("k = {} exceeds the {} distinct points", k, chosen.size()));
}

Eigen::MatrixXd rowsOf(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
  return out;
}

}  // namespace

void Clusterer::fit(const Eigen::MatrixXd& x) {
  if (fitted()) throw PreconditionError(fmt::format("{} clusterer is already fitted", algorithm()));
  if (k_ < 1) throw PreconditionError("k must be >= 1");
  if (x.rows() == 0) throw PreconditionError("cannot cluster an empty matrix");
  if (!x.allFinite()) throw ValidationError("features must be finite");
  trainAssign_ = fitImpl(x);
  dims_ = static_cast<int>(x.cols());
}

int Clusterer::assign(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (!fitted()) throw PreconditionError(fmt::format("{} clusterer is not fitted", algorithm()));
  if (x.size() != dims_) throw SchemaError(fmt::format("row has {} features, clusterer expects {}", x.size(), dims_));
  return assignImpl(x);
}

Eigen::VectorXi Clusterer::assignAll(const Eigen::MatrixXd& x) const {
  Eigen::VectorXi out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = assign(Eigen::VectorXd(x.row(i).transpose()));
  return out;
}

nlohmann::json Clusterer::toJson() const {
  if (!fitted()) throw PreconditionError("only fitted clusterers can be serialized");
  return {{"format", "bridgedss-clusterer"}, {"version", kClustererVersion}, {"algorithm", algorithm()},
          {"k", k_},                        {"dims", dims_},                 {"params", params()},
          {"state", state()}};
}

int nearestCenter(const Eigen::MatrixXd& centers, const Eigen::Ref<const Eigen::VectorXd>& x) {
  int best = 0;
  double bestD = kInf;
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (centers.row(c).transpose() - x).squaredNorm();
    if (d < bestD) {
      bestD = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

double sumSquaredError(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centers, const Eigen::VectorXi& assignment) {
  double sse = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) sse += (x.row(i) - centers.row(assignment(i))).squaredNorm();
  return sse;
}

// ---------------------------------------------------------------- k-means

KMeans::KMeans(int k, std::uint64_t seed, int restarts, int maxIterations)
    : Clusterer(k), seed_(seed), restarts_(restarts), maxIterations_(maxIterations) {
  if (restarts_ < 1 || maxIterations_ < 1) throw ValidationError("kmeans: restarts and maxIterations must be >= 1");
}

nlohmann::json KMeans::params() const {
  return {{"seed", seed_}, {"restarts", restarts_}, {"maxIterations", maxIterations_}};
}

Eigen::VectorXi KMeans::fitImpl(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  std::mt19937_64 rng(seed_);
  double bestSse = kInf;
  Eigen::VectorXi bestAssign;
  for (int r = 0; r < restarts_; ++r) {
    Eigen::MatrixXd centers = rowsOf(x, pickDistinct(x, k_, rng));
    Eigen::VectorXi assign = Eigen::VectorXi::Constant(n, -1);
    double sse = kInf;
    for (int it = 0; it < maxIterations_; ++it) {
      Eigen::VectorXi next(n);
      for (Eigen::Index i = 0; i < n; ++i) next(i) = nearestCenter(centers, x.row(i).transpose());
      sse = sumSquaredError(x, centers, next);
      if (observer_) observer_(r, it, sse);
      const bool converged = next == assign;
      assign = std::move(next);
      if (converged) break;

      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k_, x.cols());
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(k_);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(assign(i)) += x.row(i);
        counts(assign(i)) += 1.0;
      }
      std::vector<Eigen::Index> reseeded;
      for (int c = 0; c < k_; ++c) {
        if (counts(c) > 0) {
          centers.row(c) = sums.row(c) / counts(c);
          continue;
        }
        // empty cluster: move it onto the point worst served by the current centers
        Eigen::Index far = -1;
        double farD = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (std::find(reseeded.begin(), reseeded.end(), i) != reseeded.end()) continue;
          const double d = (x.row(i) - centers.row(assign(i))).squaredNorm();
          if (d > farD) {
            farD = d;
            far = i;
          }
        }
        reseeded.push_back(far);
        centers.row(c) = x.row(far);
      }
    }
    if (sse < bestSse) {
      bestSse = sse;
      centers_ = centers;
      bestAssign = assign;
    }
  }
  sse_ = bestSse;
  return bestAssign;
}

nlohmann::json KMeans::state() const { return {{"centers", matrixToJson(centers_)}, {"sse", sse_}}; }

void KMeans::loadState(const nlohmann::json& s) {
  centers_ = matrixFromJson(s.at("centers"));
  sse_ = s.at("sse").get<double>();
}

// ---------------------------------------------------------------- EM

GaussianMixture::GaussianMixture(int k, std::uint64_t seed, double varianceFloor, int maxIterations, double minGain)
    : Clusterer(k), seed_(seed), floor_(varianceFloor), maxIterations_(maxIterations), minGain_(minGain) {
  if (!(floor_ > 0)) throw ValidationError("em: varianceFloor must be positive");
  if (maxIterations_ < 1) throw ValidationError("em: maxIterations must be >= 1");
}

nlohmann::json GaussianMixture::params() const {
  return {{"seed", seed_}, {"varianceFloor", floor_}, {"maxIterations", maxIterations_}, {"minGain", minGain_}};
}

Eigen::VectorXd GaussianMixture::logDensities(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd out(k_);
  for (int c = 0; c < k_; ++c) {
    if (weights_(c) <= 0) {
      out(c) = -kInf;
      continue;
    }
    const auto v = vars_.row(c).transpose().array();
    const auto d = x.array() - means_.row(c).transpose().array();
    out(c) = std::log(weights_(c)) - 0.5 * ((2.0 * std::numbers::pi * v).log() + d.square() / v).sum();
  }
  return out;
}

Eigen::VectorXd GaussianMixture::responsibilities(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd l = logDensities(x);
  const double top = l.maxCoeff();
  Eigen::VectorXd p = (l.array() - top).exp();
  return p / p.sum();
}

double GaussianMixture::logLikelihood(const Eigen::MatrixXd& x) const {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::VectorXd l = logDensities(x.row(i).transpose());
    const double top = l.maxCoeff();
    ll += top + std::log((l.array() - top).exp().sum());
  }
  return ll / static_cast<double>(x.rows());
}

Eigen::VectorXi GaussianMixture::fitImpl(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  const auto d = x.cols();
  KMeans init(k_, seed_);
  init.fit(x);
  const auto& a = init.trainingAssignment();
  means_ = init.centers();
  weights_ = Eigen::VectorXd::Zero(k_);
  vars_ = Eigen::MatrixXd::Zero(k_, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    weights_(a(i)) += 1.0;
    vars_.row(a(i)) += (x.row(i) - means_.row(a(i))).array().square().matrix();
  }
  for (int c = 0; c < k_; ++c) {
    if (weights_(c) > 0) vars_.row(c) /= weights_(c);
  }
  vars_ = vars_.cwiseMax(floor_);
  weights_ /= static_cast<double>(n);

  Eigen::MatrixXd resp(n, k_);
  double prev = -kInf;
  for (int it = 0; it < maxIterations_; ++it) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd l = logDensities(x.row(i).transpose());
      const double top = l.maxCoeff();
      Eigen::VectorXd p = (l.array() - top).exp();
      const double s = p.sum();
      ll += top + std::log(s);
      resp.row(i) = (p / s).transpose();
    }
    ll /= static_cast<double>(n);
    if (observer_) observer_(it, ll);
    if (it > 0 && ll - prev < minGain_) break;
    prev = ll;

    const Eigen::VectorXd nk = resp.colwise().sum().transpose();
    for (int c = 0; c < k_; ++c) {
      weights_(c) = nk(c) / static_cast<double>(n);
      if (nk(c) <= 0) continue;
      means_.row(c) = (resp.col(c).transpose() * x) / nk(c);
      Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(d);
      for (Eigen::Index i = 0; i < n; ++i) var += resp(i, c) * (x.row(i) - means_.row(c)).array().square().matrix();
      vars_.row(c) = (var / nk(c)).cwiseMax(floor_);
    }
  }
  Eigen::VectorXi out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = assignImpl(x.row(i).transpose());
  return out;
}

int GaussianMixture::assignImpl(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return argmaxLowest(logDensities(x));
}

nlohmann::json GaussianMixture::state() const {
  return {{"weights", vectorToJson(weights_)}, {"means", matrixToJson(means_)}, {"variances", matrixToJson(vars_)}};
}

void GaussianMixture::loadState(const nlohmann::json& s) {
  weights_ = vectorFromJson(s.at("weights"));
  means_ = matrixFromJson(s.at("means"));
  vars_ = matrixFromJson(s.at("variances"));
}

// ---------------------------------------------------------------- farthest-first

FarthestFirst::FarthestFirst(int k, std::uint64_t seed) : Clusterer(k), seed_(seed) {}

nlohmann::json FarthestFirst::params() const { return {{"seed", seed_}}; }

Eigen::VectorXi FarthestFirst::fitImpl(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  if (k_ > n) throw PreconditionError(fmt::format("farthestfirst: k = {} exceeds {} points", k_, n));
  Eigen::Index current;
  if (first_) {
    if (*first_ < 0 || *first_ >= n) throw PreconditionError("farthestfirst: first center out of range");
    current = *first_;
  } else {
    std::mt19937_64 rng(seed_);
    current = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
  }
  Eigen::VectorXd minDist = Eigen::VectorXd::Constant(n, kInf);
  Eigen::VectorXi owner = Eigen::VectorXi::Zero(n);
  centerRows_.clear();
  distances_ = 0;
  for (int c = 0; c < k_; ++c) {
    if (c > 0) minDist.maxCoeff(&current);  // first maximum, so ties go to the lower row
    centerRows_.push_back(current);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = (x.row(i) - x.row(current)).squaredNorm();
      ++distances_;
      if (d < minDist(i)) {
        minDist(i) = d;
        owner(i) = c;
      }
    }
  }
  centers_ = rowsOf(x, centerRows_);
  return owner;
}

nlohmann::json FarthestFirst::state() const { return {{"centers", matrixToJson(centers_)}}; }

void FarthestFirst::loadState(const nlohmann::json& s) { centers_ = matrixFromJson(s.at("centers")); }

// ---------------------------------------------------------------- LVQ

Lvq::Lvq(int k, std::uint64_t seed, double learningRate, int epochs)
    : Clusterer(k), seed_(seed), lr_(learningRate), epochs_(epochs) {
  if (lr_ < 0 || epochs_ < 0) throw ValidationError("lvq: learningRate and epochs must be >= 0");
}

nlohmann::json Lvq::params() const { return {{"seed", seed_}, {"learningRate", lr_}, {"epochs", epochs_}}; }

Eigen::VectorXi Lvq::fitImpl(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  std::mt19937_64 rng(seed_);
  protos_ = rowsOf(x, pickDistinct(x, k_, rng));
  initial_ = protos_;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const double total = static_cast<double>(epochs_) * static_cast<double>(n);
  double t = 0.0;
  for (int e = 0; e < epochs_; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      const double rate = lr_ * (1.0 - t / total);
      const int w = nearestCenter(protos_, x.row(i).transpose());
      protos_.row(w) += rate * (x.row(i) - protos_.row(w));
      t += 1.0;
    }
  }
  Eigen::VectorXi out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = nearestCenter(protos_, x.row(i).transpose());
  return out;
}

nlohmann::json Lvq::state() const { return {{"prototypes", matrixToJson(protos_)}}; }

void Lvq::loadState(const nlohmann::json& s) { protos_ = matrixFromJson(s.at("prototypes")); }

// ---------------------------------------------------------------- hierarchical

Hierarchical::Hierarchical(int k) : Clusterer(k) {}

Eigen::VectorXi Hierarchical::fitImpl(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  if (k_ > n) throw PreconditionError(fmt::format("hierarchical: k = {} exceeds {} points", k_, n));
  merges_.clear();
  // condensed upper triangle: pair (i, j), i < j
  auto at = [n](Eigen::Index i, Eigen::Index j) {
    return static_cast<std::size_t>(i * n - i * (i + 1) / 2 + (j - i - 1));
  };
  std::vector<double> dist(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) dist[at(i, j)] = (x.row(i) - x.row(j)).norm();
  }
  std::vector<char> active(static_cast<std::size_t>(n), 1);
  std::vector<double> size(static_cast<std::size_t>(n), 1.0);
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) members[i] = {i};
  // nearest active partner with a higher index, per row
  std::vector<Eigen::Index> nn(static_cast<std::size_t>(n), -1);
  std::vector<double> nnDist(static_cast<std::size_t>(n), kInf);
  auto refresh = [&](Eigen::Index i) {
    nn[i] = -1;
    nnDist[i] = kInf;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (active[j] && dist[at(i, j)] < nnDist[i]) {
        nnDist[i] = dist[at(i, j)];
        nn[i] = j;
      }
    }
  };
  for (Eigen::Index i = 0; i < n; ++i) refresh(i);

  for (Eigen::Index clusters = n; clusters > k_; --clusters) {
    Eigen::Index a = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active[i] && nn[i] >= 0 && (a < 0 || nnDist[i] < nnDist[a])) a = i;
    }
    const Eigen::Index b = nn[a];
    merges_.emplace_back(a, b);
    const double sa = size[a], sb = size[b];
    active[b] = 0;
    for (Eigen::Index m = 0; m < n; ++m) {
      if (!active[m] || m == a) continue;
      const double dam = dist[m < a ? at(m, a) : at(a, m)];
      const double dbm = dist[m < b ? at(m, b) : at(b, m)];
      dist[m < a ? at(m, a) : at(a, m)] = (sa * dam + sb * dbm) / (sa + sb);
    }
    size[a] = sa + sb;
    members[a].insert(members[a].end(), members[b].begin(), members[b].end());
    members[b].clear();
    refresh(a);
    for (Eigen::Index m = 0; m < b; ++m) {
      if (!active[m] || m == a) continue;
      if (nn[m] == a || nn[m] == b) {
        refresh(m);
      } else if (m < a) {
        const double d = dist[at(m, a)];
        if (d < nnDist[m] || (d == nnDist[m] && a < nn[m])) {
          nnDist[m] = d;
          nn[m] = a;
        }
      }
    }
  }

  Eigen::VectorXi out(n);
  centroids_.resize(k_, x.cols());
  int id = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!active[i]) continue;
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(x.cols());
    for (auto m : members[i]) {
      out(m) = id;
      sum += x.row(m);
    }
    centroids_.row(id) = sum / static_cast<double>(members[i].size());
    ++id;
  }
  return out;
}

nlohmann::json Hierarchical::state() const { return {{"centroids", matrixToJson(centroids_)}}; }

void Hierarchical::loadState(const nlohmann::json& s) { centroids_ = matrixFromJson(s.at("centroids")); }

// ---------------------------------------------------------------- filtered

FilteredClusterer::FilteredClusterer(int k, std::uint64_t seed, int restarts)
    : Clusterer(k), inner_(k, seed, restarts) {}

nlohmann::json FilteredClusterer::params() const {
  auto p = inner_.params();
  p.erase("maxIterations");
  return p;
}

Eigen::MatrixXd FilteredClusterer::transform(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (span_(j) > 0) {
      out.col(j) = (x.col(j).array() - lo_(j)) / span_(j);
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

Eigen::VectorXi FilteredClusterer::fitImpl(const Eigen::MatrixXd& x) {
  lo_ = x.colwise().minCoeff().transpose();
  span_ = x.colwise().maxCoeff().transpose() - lo_;
  inner_.fit(transform(x));
  return inner_.trainingAssignment();
}

int FilteredClusterer::assignImpl(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::MatrixXd row = x.transpose();
  return inner_.assign(Eigen::VectorXd(transform(row).row(0).transpose()));
}

nlohmann::json FilteredClusterer::state() const {
  return {{"lo", vectorToJson(lo_)}, {"span", vectorToJson(span_)}, {"inner", inner_.toJson()}};
}

void FilteredClusterer::loadState(const nlohmann::json& s) {
  lo_ = vectorFromJson(s.at("lo"));
  span_ = vectorFromJson(s.at("span"));
  auto inner = loadClusterer(s.at("inner"));
  inner_ = dynamic_cast<const KMeans&>(*inner);
}

// ---------------------------------------------------------------- SOM

Som::Som(int rows, int cols, std::uint64_t seed, int epochs, double learningRate, double radius)
    : Clusterer(rows * cols), rows_(rows), cols_(cols), seed_(seed), epochs_(epochs), lr_(learningRate), radius_(radius) {
  if (rows_ < 1 || cols_ < 1) throw ValidationError("som: grid dimensions must be >= 1");
  if (epochs_ < 0 || lr_ < 0) throw ValidationError("som: epochs and learningRate must be >= 0");
  if (radius_ < 0) radius_ = std::max(rows_, cols_) / 2.0;
}

nlohmann::json Som::params() const {
  return {{"seed", seed_}, {"rows", rows_}, {"cols", cols_}, {"epochs", epochs_}, {"learningRate", lr_}, {"radius", radius_}};
}

double Som::neighbourhood(int a, int b, double radius) const {
  if (radius <= 0) return a == b ? 1.0 : 0.0;
  const double dr = a / cols_ - b / cols_;
  const double dc = a % cols_ - b % cols_;
  return std::exp(-(dr * dr + dc * dc) / (2.0 * radius * radius));
}

double Som::quantizationError(const Eigen::MatrixXd& x) const {
  double e = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) e += (units_.row(nearestCenter(units_, x.row(i).transpose())) - x.row(i)).norm();
  return e / static_cast<double>(x.rows());
}

Eigen::VectorXi Som::fitImpl(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  std::mt19937_64 rng(seed_);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::RowVectorXd lo = x.colwise().minCoeff();
  const Eigen::RowVectorXd hi = x.colwise().maxCoeff();
  units_.resize(k_, x.cols());
  for (int u = 0; u < k_; ++u) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) units_(u, j) = lo(j) + unit(rng) * (hi(j) - lo(j));
  }
  initial_ = units_;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const double total = static_cast<double>(epochs_) * static_cast<double>(n);
  double t = 0.0;
  for (int e = 0; e < epochs_; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      const double frac = 1.0 - t / total;
      const double rate = lr_ * frac;
      const double radius = radius_ * frac;
      const int bmu = nearestCenter(units_, x.row(i).transpose());
      for (int u = 0; u < k_; ++u) {
        const double h = neighbourhood(bmu, u, radius);
        if (h > 0) units_.row(u) += rate * h * (x.row(i) - units_.row(u));
      }
      t += 1.0;
    }
  }
  Eigen::VectorXi out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = nearestCenter(units_, x.row(i).transpose());
  return out;
}

nlohmann::json Som::state() const { return {{"units", matrixToJson(units_)}}; }

void Som::loadState(const nlohmann::json& s) { units_ = matrixFromJson(s.at("units")); }

// ---------------------------------------------------------------- factory and evaluation

const std::vector<std::string>& clustererIds() {
  static const std::vector<std::string> ids{"em", "kmeans", "farthestfirst", "lvq", "hierarchical", "filtered", "som"};
  return ids;
}

std::unique_ptr<Clusterer> makeClusterer(std::string_view algorithm, int k, std::uint64_t seed, const nlohmann::json& params) {
  ParamReader p(algorithm, params);
  k = p.integer("k", k);
  seed = static_cast<std::uint64_t>(p.integer("seed", static_cast<int>(seed)));
  std::unique_ptr<Clusterer> out;
  if (algorithm == "kmeans") {
    const int restarts = p.integer("restarts", 10);
    out = std::make_unique<KMeans>(k, seed, restarts, p.integer("maxIterations", 100));
  } else if (algorithm == "em") {
    const double floor = p.real("varianceFloor", 1e-6);
    const int iters = p.integer("maxIterations", 100);
    out = std::make_unique<GaussianMixture>(k, seed, floor, iters, p.real("minGain", 1e-6));
  } else if (algorithm == "farthestfirst") {
    out = std::make_unique<FarthestFirst>(k, seed);
  } else if (algorithm == "lvq") {
    const double lr = p.real("learningRate", 0.3);
    out = std::make_unique<Lvq>(k, seed, lr, p.integer("epochs", 100));
  } else if (algorithm == "hierarchical") {
    out = std::make_unique<Hierarchical>(k);
  } else if (algorithm == "filtered") {
    out = std::make_unique<FilteredClusterer>(k, seed, p.integer("restarts", 10));
  } else if (algorithm == "som") {
    const int rows = p.integer("rows", k == 12 ? 4 : k);
    const int cols = p.integer("cols", k == 12 ? 3 : 1);
    if (rows * cols != k) throw ValidationError(fmt::format("som: grid {}x{} does not have k = {} units", rows, cols, k));
    const int epochs = p.integer("epochs", 200);
    const double lr = p.real("learningRate", 0.5);
    out = std::make_unique<Som>(rows, cols, seed, epochs, lr, p.real("radius", -1.0));
  } else {
    throw ValidationError(fmt::format("unknown clusterer '{}'", algorithm));
  }
  p.finish();
  return out;
}

std::unique_ptr<Clusterer> loadClusterer(const nlohmann::json& j) {
  try {
    if (j.at("format") != "bridgedss-clusterer") throw SchemaError("not a bridgedss clusterer document");
    if (j.at("version").get<int>() != kClustererVersion) throw SchemaError("unsupported clusterer version");
    const int k = j.at("k").get<int>();
    auto out = makeClusterer(j.at("algorithm").get<std::string>(), k, 0, j.at("params"));
    out->loadState(j.at("state"));
    out->dims_ = j.at("dims").get<int>();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("malformed clusterer document: {}", e.what()));
  }
}

ClusterEvaluation classesToClustersAccuracy(const Eigen::VectorXi& trainClusters, const Eigen::VectorXi& trainLabels,
                                            const Eigen::VectorXi& testClusters, const Eigen::VectorXi& testLabels,
                                            int k, int numClasses) {
  if (trainClusters.size() != trainLabels.size() || testClusters.size() != testLabels.size()) {
    throw ValidationError("cluster assignments and labels differ in length");
  }
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k, numClasses);
  Eigen::VectorXd global = Eigen::VectorXd::Zero(numClasses);
  for (Eigen::Index i = 0; i < trainClusters.size(); ++i) {
    counts(trainClusters(i), trainLabels(i)) += 1.0;
    global(trainLabels(i)) += 1.0;
  }
  ClusterEvaluation ev;
  const int fallback = argmaxLowest(global);
  for (int c = 0; c < k; ++c) {
    if (counts.row(c).sum() == 0) {
      ++ev.emptyClusters;
      ev.clusterToClass.push_back(fallback);
    } else {
      ev.clusterToClass.push_back(argmaxLowest(counts.row(c).transpose()));
    }
  }
  if (ev.emptyClusters > 0) log::info("{} clusters had no training members; mapped to class {}", ev.emptyClusters, fallback);
  int hit = 0;
  for (Eigen::Index i = 0; i < testClusters.size(); ++i) hit += ev.clusterToClass.at(testClusters(i)) == testLabels(i);
  ev.accuracy = testClusters.size() ? static_cast<double>(hit) / static_cast<double>(testClusters.size()) : 0.0;
  return ev;
}

}  // namespace bdss
