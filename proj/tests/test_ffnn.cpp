#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "bridgedss/errors.hpp"
#include "bridgedss/ffnn.hpp"

using namespace bdss;

namespace {

Eigen::MatrixXd randomMatrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 0.7);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = g(rng);
  }
  return m;
}

Dataset xorNominal(int copies) {
  Dataset d;
  d.schema.attributes = {{"a", AttributeKind::Nominal, {"0", "1"}}, {"b", AttributeKind::Nominal, {"0", "1"}}};
  d.schema.classNames = {"zero", "one"};
  d.x.resize(4 * copies, 2);
  d.y.resize(4 * copies);
  for (int r = 0; r < 4 * copies; ++r) {
    d.x(r, 0) = (r / 2) % 2;
    d.x(r, 1) = r % 2;
    d.y(r) = static_cast<int>(d.x(r, 0)) ^ static_cast<int>(d.x(r, 1));
  }
  return d;
}

}  // namespace

TEST_CASE("backpropagation matches central differences") {
  std::mt19937_64 rng(17);
  FfnnWeights w{randomMatrix(3, 5, rng), randomMatrix(3, 1, rng), randomMatrix(2, 3, rng), randomMatrix(2, 1, rng)};
  const Eigen::MatrixXd x = randomMatrix(7, 5, rng);
  Eigen::VectorXi y(7);
  y << 0, 1, 1, 0, 1, 0, 0;
  const FfnnWeights g = ffnnGradient(w, x, y);

  const double h = 1e-6;
  double worst = 0.0;
  auto probe = [&](auto& param, const auto& grad) {
    for (Eigen::Index i = 0; i < param.size(); ++i) {
      const double keep = param(i);
      param(i) = keep + h;
      const double up = ffnnLoss(w, x, y);
      param(i) = keep - h;
      const double down = ffnnLoss(w, x, y);
      param(i) = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad(i)) / std::max(1e-8, std::abs(fd) + std::abs(grad(i))));
    }
  };
  probe(w.w1, g.w1);
  probe(w.b1, g.b1);
  probe(w.w2, g.w2);
  probe(w.b2, g.b2);
  CHECK(worst < 1e-4);
}

TEST_CASE("forward pass yields a probability distribution per row") {
  std::mt19937_64 rng(3);
  FfnnWeights w{randomMatrix(4, 3, rng), randomMatrix(4, 1, rng), randomMatrix(5, 4, rng), randomMatrix(5, 1, rng)};
  const Eigen::MatrixXd p = ffnnForward(w, randomMatrix(6, 3, rng));
  CHECK((p.array() > 0).all());
  for (Eigen::Index i = 0; i < p.rows(); ++i) CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("FFNN training is deterministic under a fixed seed") {
  const Dataset d = xorNominal(5);
  FfnnClassifier a(nlohmann::json{{"epochs", 20}}), b(nlohmann::json{{"epochs", 20}}), c(nlohmann::json{{"epochs", 20}, {"seed", 2}});
  a.fit(d);
  b.fit(d);
  c.fit(d);
  CHECK(a.weights().w1 == b.weights().w1);
  CHECK(a.weights().w2 == b.weights().w2);
  CHECK(a.weights().w1 != c.weights().w1);
  // default hidden size (inputs + classes) / 2 over the one-hot inputs
  CHECK(a.hiddenUnits() == (4 + 2) / 2);
}

TEST_CASE("FFNN learns XOR") {
  const Dataset d = xorNominal(25);
  FfnnClassifier net(nlohmann::json{{"hidden", 4}, {"epochs", 300}, {"lr", 0.5}, {"momentum", 0.5}});
  net.fit(d);
  CHECK(accuracy(net.predict(d), d.y) == 1.0);
}

TEST_CASE("full-batch training with a small rate lowers the loss every epoch") {
  const Dataset d = xorNominal(10);
  FfnnClassifier net(nlohmann::json{{"epochs", 50}, {"lr", 0.01}, {"momentum", 0.0}, {"batchSize", 0}});
  std::vector<double> losses;
  net.setEpochObserver([&](int, double loss) { losses.push_back(loss); });
  net.fit(d);
  REQUIRE(losses.size() == 50);
  for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] <= losses[i - 1]);
}

TEST_CASE("FFNN validates hyperparameters") {
  CHECK_THROWS_AS(FfnnClassifier(nlohmann::json{{"lr", 0.0}}), ValidationError);
  CHECK_THROWS_AS(FfnnClassifier(nlohmann::json{{"momentum", 1.0}}), ValidationError);
  CHECK_THROWS_AS(FfnnClassifier(nlohmann::json{{"epochs", -1}}), ValidationError);
}
