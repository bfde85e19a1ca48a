#include "bridgedss/bayes.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "bridgedss/eigen_json.hpp"
#include "bridgedss/errors.hpp"

namespace bdss {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<Eigen::Index> allRows(const Dataset& d) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(d.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  return rows;
}

}  // namespace

void NaiveBayesModel::fit(const Dataset& data) {
  auto rows = allRows(data);
  fit(data, rows);
}

void NaiveBayesModel::fit(const Dataset& data, std::span<const Eigen::Index> rows) {
  const auto& schema = data.schema;
  const int k = schema.numClasses();
  const int m = schema.numAttributes();
  cardinality_.assign(m, 0);
  for (int j = 0; j < m; ++j) {
    if (schema.attributes[j].nominal()) cardinality_[j] = schema.attributes[j].cardinality();
  }

  Eigen::VectorXd classCount = Eigen::VectorXd::Zero(k);
  std::vector<Eigen::MatrixXd> counts(m);
  for (int j = 0; j < m; ++j) {
    if (cardinality_[j]) counts[j] = Eigen::MatrixXd::Zero(k, cardinality_[j]);
  }
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, m);
  for (auto i : rows) {
    const int c = data.y(i);
    classCount(c) += 1.0;
    for (int j = 0; j < m; ++j) {
      if (cardinality_[j]) {
        counts[j](c, static_cast<int>(data.x(i, j))) += 1.0;
      } else {
        sum(c, j) += data.x(i, j);
      }
    }
  }
  const double n = static_cast<double>(rows.size());
  logPrior_ = ((classCount.array() + 1.0) / (n + k)).log();
  seen_ = (classCount.array() > 0).cast<int>();

  mean_ = Eigen::MatrixXd::Zero(k, m);
  var_ = Eigen::MatrixXd::Constant(k, m, varianceFloor_);
  for (int c = 0; c < k; ++c) {
    if (classCount(c) > 0) mean_.row(c) = sum.row(c) / classCount(c);
  }
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(k, m);
  for (auto i : rows) {
    const int c = data.y(i);
    for (int j = 0; j < m; ++j) {
      if (!cardinality_[j]) {
        const double dlt = data.x(i, j) - mean_(c, j);
        sq(c, j) += dlt * dlt;
      }
    }
  }
  for (int c = 0; c < k; ++c) {
    if (classCount(c) == 0) continue;
    for (int j = 0; j < m; ++j) {
      if (!cardinality_[j]) var_(c, j) = std::max(varianceFloor_, sq(c, j) / classCount(c));
    }
  }

  tables_.assign(m, Eigen::MatrixXd());
  for (int j = 0; j < m; ++j) {
    if (!cardinality_[j]) continue;
    Eigen::MatrixXd t = counts[j].array() + 1.0;
    for (int c = 0; c < k; ++c) t.row(c) /= classCount(c) + cardinality_[j];
    tables_[j] = t.array().log();
  }
}

Eigen::VectorXd NaiveBayesModel::logJoint(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  const auto k = logPrior_.size();
  Eigen::VectorXd out = logPrior_;
  for (Eigen::Index c = 0; c < k; ++c) {
    if (!seen_(c)) {
      out(c) = kNegInf;
      continue;
    }
    for (std::size_t j = 0; j < cardinality_.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (cardinality_[j]) {
        out(c) += tables_[j](c, static_cast<Eigen::Index>(row(jj)));
      } else {
        const double v = var_(c, jj);
        const double d = row(jj) - mean_(c, jj);
        out(c) += -0.5 * std::log(2.0 * std::numbers::pi * v) - d * d / (2.0 * v);
      }
    }
  }
  return out;
}

Eigen::VectorXd NaiveBayesModel::posterior(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  Eigen::VectorXd lj = logJoint(row);
  const double top = lj.maxCoeff();
  Eigen::VectorXd p = (lj.array() - top).exp();
  return p / p.sum();
}

int NaiveBayesModel::predict(const Eigen::Ref<const Eigen::VectorXd>& row) const { return argmaxLowest(logJoint(row)); }

nlohmann::json NaiveBayesModel::toJson() const {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& t : tables_) tables.push_back(matrixToJson(t));
  return {{"varianceFloor", varianceFloor_},
          {"cardinality", cardinality_},
          {"logPrior", vectorToJson(logPrior_)},
          {"seen", vectorToJson(seen_)},
          {"tables", tables},
          {"mean", matrixToJson(mean_)},
          {"variance", matrixToJson(var_)}};
}

NaiveBayesModel NaiveBayesModel::fromJson(const nlohmann::json& j) {
  NaiveBayesModel m(j.at("varianceFloor").get<double>());
  m.cardinality_ = j.at("cardinality").get<std::vector<int>>();
  m.logPrior_ = vectorFromJson(j.at("logPrior"));
  m.seen_ = intVectorFromJson(j.at("seen"));
  for (const auto& t : j.at("tables")) m.tables_.push_back(matrixFromJson(t));
  m.mean_ = matrixFromJson(j.at("mean"));
  m.var_ = matrixFromJson(j.at("variance"));
  return m;
}

NaiveBayesClassifier::NaiveBayesClassifier(const nlohmann::json& params) {
  ParamReader p("naivebayes", params);
  varianceFloor_ = p.real("varianceFloor", 1e-6);
  p.finish();
  if (!(varianceFloor_ > 0)) throw ValidationError("naivebayes: varianceFloor must be positive");
}

void NaiveBayesClassifier::fitImpl(const Dataset& data) {
  model_ = NaiveBayesModel(varianceFloor_);
  model_.fit(data);
}

HnbClassifier::HnbClassifier(const nlohmann::json& params) {
  ParamReader p("hnb", params);
  p.finish();
}

void HnbClassifier::fitImpl(const Dataset& data) {
  const auto& schema = data.schema;
  for (const auto& a : schema.attributes) {
    if (!a.nominal()) {
      throw PreconditionError(fmt::format("hnb needs nominal attributes; '{}' is numeric (apply the discrete filter)", a.name));
    }
  }
  m_ = schema.numAttributes();
  const int k = schema.numClasses();
  card_.clear();
  for (const auto& a : schema.attributes) card_.push_back(a.cardinality());
  const double n = static_cast<double>(data.rows());

  Eigen::VectorXd classCount = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < data.rows(); ++i) classCount(data.y(i)) += 1.0;
  logPrior_ = ((classCount.array() + 1.0) / (n + k)).log();
  seen_ = (classCount.array() > 0).cast<int>();

  // counts n(a_i = u, c)
  std::vector<Eigen::MatrixXd> single(m_);
  for (int i = 0; i < m_; ++i) single[i] = Eigen::MatrixXd::Zero(k, card_[i]);
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (int i = 0; i < m_; ++i) single[i](data.y(r), static_cast<Eigen::Index>(data.x(r, i))) += 1.0;
  }
  singles_.assign(m_, Eigen::MatrixXd());
  for (int i = 0; i < m_; ++i) {
    Eigen::MatrixXd t = single[i].array() + 1.0;
    for (int c = 0; c < k; ++c) t.row(c) /= classCount(c) + card_[i];
    singles_[i] = t;
  }

  pairs_.assign(static_cast<std::size_t>(m_ * m_), Eigen::MatrixXd());
  cmi_ = Eigen::MatrixXd::Zero(m_, m_);
  for (int i = 0; i < m_; ++i) {
    for (int j = i + 1; j < m_; ++j) {
      // joint counts n(a_i = u, a_j = v, c) at (c, u * card_j + v)
      Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(k, card_[i] * card_[j]);
      for (Eigen::Index r = 0; r < data.rows(); ++r) {
        const auto u = static_cast<Eigen::Index>(data.x(r, i));
        const auto v = static_cast<Eigen::Index>(data.x(r, j));
        joint(data.y(r), u * card_[j] + v) += 1.0;
      }
      double info = 0.0;
      for (int c = 0; c < k; ++c) {
        for (int u = 0; u < card_[i]; ++u) {
          for (int v = 0; v < card_[j]; ++v) {
            const double nuv = joint(c, u * card_[j] + v);
            if (nuv == 0) continue;
            info += nuv / n * std::log(nuv * classCount(c) / (single[i](c, u) * single[j](c, v)));
          }
        }
      }
      // rounding leaves ~1e-17 where the attributes are conditionally independent
      cmi_(i, j) = cmi_(j, i) = info > 1e-12 ? info : 0.0;

      Eigen::MatrixXd ij(k, card_[i] * card_[j]);  // P(a_i = u | a_j = v, c)
      Eigen::MatrixXd ji(k, card_[j] * card_[i]);  // P(a_j = v | a_i = u, c)
      for (int c = 0; c < k; ++c) {
        for (int u = 0; u < card_[i]; ++u) {
          for (int v = 0; v < card_[j]; ++v) {
            const double nuv = joint(c, u * card_[j] + v);
            ij(c, u * card_[j] + v) = (nuv + 1.0) / (single[j](c, v) + card_[i]);
            ji(c, v * card_[i] + u) = (nuv + 1.0) / (single[i](c, u) + card_[j]);
          }
        }
      }
      pairs_[static_cast<std::size_t>(i * m_ + j)] = std::move(ij);
      pairs_[static_cast<std::size_t>(j * m_ + i)] = std::move(ji);
    }
  }

  weights_ = Eigen::MatrixXd::Zero(m_, m_);
  for (int i = 0; i < m_; ++i) {
    if (m_ < 2) break;
    const double total = cmi_.row(i).sum();
    for (int j = 0; j < m_; ++j) {
      if (j == i) continue;
      weights_(i, j) = total > 0 ? cmi_(i, j) / total : 1.0 / (m_ - 1);
    }
  }
}

Eigen::VectorXd HnbClassifier::logJoint(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  const auto k = logPrior_.size();
  Eigen::VectorXd out = logPrior_;
  for (Eigen::Index c = 0; c < k; ++c) {
    if (!seen_(c)) {
      out(c) = kNegInf;
      continue;
    }
    for (int i = 0; i < m_; ++i) {
      const auto u = static_cast<Eigen::Index>(row(i));
      if (m_ == 1) {
        out(c) += std::log(singles_[i](c, u));
        continue;
      }
      double mix = 0.0;
      for (int j = 0; j < m_; ++j) {
        if (j == i || weights_(i, j) == 0) continue;
        const auto v = static_cast<Eigen::Index>(row(j));
        mix += weights_(i, j) * pair(i, j)(c, u * card_[j] + v);
      }
      out(c) += std::log(mix);
    }
  }
  return out;
}

int HnbClassifier::predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const { return argmaxLowest(logJoint(row)); }

nlohmann::json HnbClassifier::state() const {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : pairs_) pairs.push_back(matrixToJson(p));
  nlohmann::json singles = nlohmann::json::array();
  for (const auto& s : singles_) singles.push_back(matrixToJson(s));
  return {{"cardinality", card_},          {"logPrior", vectorToJson(logPrior_)}, {"seen", vectorToJson(seen_)},
          {"cmi", matrixToJson(cmi_)},     {"weights", matrixToJson(weights_)},   {"pairs", pairs},
          {"singles", singles}};
}

void HnbClassifier::loadState(const nlohmann::json& s) {
  card_ = s.at("cardinality").get<std::vector<int>>();
  m_ = static_cast<int>(card_.size());
  logPrior_ = vectorFromJson(s.at("logPrior"));
  seen_ = intVectorFromJson(s.at("seen"));
  cmi_ = matrixFromJson(s.at("cmi"));
  weights_ = matrixFromJson(s.at("weights"));
  pairs_.clear();
  for (const auto& p : s.at("pairs")) pairs_.push_back(matrixFromJson(p));
  singles_.clear();
  for (const auto& t : s.at("singles")) singles_.push_back(matrixFromJson(t));
}

}  // namespace bdss
