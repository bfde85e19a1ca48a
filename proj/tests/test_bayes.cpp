#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "bridgedss/bayes.hpp"
#include "bridgedss/errors.hpp"

using namespace bdss;

namespace {

Dataset handTable() {
  Dataset d;
  d.schema.attributes = {{"a", AttributeKind::Nominal, {"u", "v"}}, {"b", AttributeKind::Numeric, {}}};
  d.schema.classNames = {"c0", "c1", "c2"};
  d.x.resize(5, 2);
  d.x << 0, 1.0,  //
      0, 2.0,     //
      1, 3.0,     //
      1, 4.0,     //
      1, 6.0;
  d.y.resize(5);
  d.y << 0, 0, 0, 1, 1;
  return d;
}

double normalPdf(double x, double mean, double var) {
  return std::exp(-(x - mean) * (x - mean) / (2 * var)) / std::sqrt(2 * std::numbers::pi * var);
}

Dataset nominal(const std::vector<std::vector<int>>& rows, int card = 2) {
  Dataset d;
  const int m = static_cast<int>(rows[0].size()) - 1;
  for (int j = 0; j < m; ++j) {
    Attribute a{"a" + std::to_string(j), AttributeKind::Nominal, {}};
    for (int v = 0; v < card; ++v) a.values.push_back(std::to_string(v));
    d.schema.attributes.push_back(a);
  }
  d.schema.classNames = {"n", "p"};
  d.x.resize(static_cast<Eigen::Index>(rows.size()), m);
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int j = 0; j < m; ++j) d.x(static_cast<Eigen::Index>(r), j) = rows[r][j];
    d.y(static_cast<Eigen::Index>(r)) = rows[r][m];
  }
  return d;
}

}  // namespace

TEST_CASE("Naive Bayes posteriors match hand-computed tables") {
  NaiveBayesClassifier nb;
  nb.fit(handTable());
  const auto& m = nb.model();
  // Laplace prior (n_c + 1) / (n + K) and tables (n_vc + 1) / (n_c + |V|)
  CHECK(std::exp(m.logPrior()(0)) == doctest::Approx(4.0 / 8.0).epsilon(1e-12));
  CHECK(std::exp(m.logPrior()(1)) == doctest::Approx(3.0 / 8.0).epsilon(1e-12));
  CHECK(m.table(0)(0, 0) == doctest::Approx(3.0 / 5.0).epsilon(1e-12));
  CHECK(m.table(0)(1, 0) == doctest::Approx(1.0 / 4.0).epsilon(1e-12));
  CHECK(m.mean(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(m.variance(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.variance(1, 1) == doctest::Approx(1.0).epsilon(1e-12));

  const double j0 = 4.0 / 8 * 2.0 / 5 * normalPdf(3.0, 2.0, 2.0 / 3.0);
  const double j1 = 3.0 / 8 * 3.0 / 4 * normalPdf(3.0, 5.0, 1.0);
  const Eigen::VectorXd post = m.posterior(Eigen::Vector2d(1, 3.0));
  CHECK(std::abs(post(0) - j0 / (j0 + j1)) < 1e-12);
  CHECK(std::abs(post(1) - j1 / (j0 + j1)) < 1e-12);
  // c2 never occurs in training
  CHECK(post(2) == 0.0);
}

TEST_CASE("Naive Bayes never predicts a class absent from training") {
  NaiveBayesClassifier nb;
  nb.fit(handTable());
  for (double b = -10; b <= 10; b += 0.5) {
    CHECK(nb.predict(Eigen::Vector2d(0, b)) != 2);
    CHECK(nb.predict(Eigen::Vector2d(1, b)) != 2);
  }
}

TEST_CASE("Naive Bayes floors the variance of constant attributes") {
  Dataset d = handTable();
  d.x.col(1).setConstant(2.0);
  NaiveBayesClassifier nb;
  nb.fit(d);
  CHECK(nb.model().variance(0, 1) == 1e-6);
  CHECK(std::isfinite(nb.model().logJoint(Eigen::Vector2d(0, 2.5))(0)));
}

TEST_CASE("HNB weights: duplicated attributes dominate and rows sum to one") {
  std::mt19937_64 rng(9);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::vector<int>> rows;
  for (int i = 0; i < 200; ++i) {
    const int a = coin(rng), noise = coin(rng), c = coin(rng) ? a : 1 - a;
    rows.push_back({a, a, noise, c});
  }
  HnbClassifier hnb;
  hnb.fit(nominal(rows));
  const auto& w = hnb.weights();
  for (int i = 0; i < 3; ++i) {
    CHECK(w(i, i) == 0.0);
    CHECK(w.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(w(0, 1) > 0.9);
  CHECK(w(1, 0) > 0.9);
  CHECK(hnb.cmi()(0, 1) > hnb.cmi()(0, 2));
}

TEST_CASE("HNB conditional mutual information matches the direct formula") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> v(0, 2);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::vector<int>> rows;
  for (int i = 0; i < 90; ++i) {
    const int a = v(rng);
    rows.push_back({a, (a + v(rng) / 2) % 3, v(rng), coin(rng)});
  }
  const Dataset d = nominal(rows, 3);
  HnbClassifier hnb;
  hnb.fit(d);
  const double n = static_cast<double>(d.rows());
  auto cmi = [&](int i, int j) {
    double s = 0;
    for (int c = 0; c < 2; ++c) {
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          double nab = 0, na = 0, nb = 0, nc = 0;
          for (Eigen::Index r = 0; r < d.rows(); ++r) {
            if (d.y(r) != c) continue;
            nc += 1;
            na += d.x(r, i) == a;
            nb += d.x(r, j) == b;
            nab += d.x(r, i) == a && d.x(r, j) == b;
          }
          if (nab > 0) s += nab / n * std::log((nab / nc) / ((na / nc) * (nb / nc)));
        }
      }
    }
    return s;
  };
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i != j) CHECK(hnb.cmi()(i, j) == doctest::Approx(cmi(i, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("HNB falls back to uniform weights under exact conditional independence") {
  // full factorial design per class: every pair of attributes is independent given the class
  std::vector<std::vector<int>> rows;
  for (int c = 0; c < 2; ++c) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        for (int e = 0; e < 2; ++e) rows.push_back({a, b, e, c});
      }
    }
  }
  HnbClassifier hnb;
  hnb.fit(nominal(rows));
  CHECK(hnb.cmi().cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(hnb.weights()(i, j) == (i == j ? 0.0 : 0.5));
  }
}

TEST_CASE("HNB requires nominal attributes") {
  HnbClassifier hnb;
  CHECK_THROWS_AS(hnb.fit(handTable()), PreconditionError);
}

TEST_CASE("HNB with one attribute reduces to Naive Bayes") {
  const Dataset d = nominal({{0, 0}, {0, 0}, {1, 1}, {1, 0}, {1, 1}});
  HnbClassifier hnb;
  NaiveBayesClassifier nb;
  hnb.fit(d);
  nb.fit(d);
  for (int v = 0; v < 2; ++v) {
    const Eigen::VectorXd row = Eigen::VectorXd::Constant(1, v);
    const Eigen::VectorXd a = hnb.logJoint(row), b = nb.model().logJoint(row);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
}
