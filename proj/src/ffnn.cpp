#include "bridgedss/ffnn.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bridgedss/eigen_json.hpp"
#include "bridgedss/errors.hpp"

namespace bdss {

namespace {

Eigen::MatrixXd hiddenLayer(const FfnnWeights& w, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a = x * w.w1.transpose();
  a.rowwise() += w.b1.transpose();
  return (1.0 / (1.0 + (-a.array()).exp())).matrix();
}

Eigen::MatrixXd softmaxRows(Eigen::MatrixXd z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    z.row(i).array() -= z.row(i).maxCoeff();
    z.row(i) = z.row(i).array().exp().matrix();
    z.row(i) /= z.row(i).sum();
  }
  return z;
}

Eigen::MatrixXd outputs(const FfnnWeights& w, const Eigen::MatrixXd& h) {
  Eigen::MatrixXd z = h * w.w2.transpose();
  z.rowwise() += w.b2.transpose();
  return softmaxRows(std::move(z));
}

void axpy(FfnnWeights& dst, double a, const FfnnWeights& src) {
  dst.w1 += a * src.w1;
  dst.b1 += a * src.b1;
  dst.w2 += a * src.w2;
  dst.b2 += a * src.b2;
}

void scale(FfnnWeights& w, double a) {
  w.w1 *= a;
  w.b1 *= a;
  w.w2 *= a;
  w.b2 *= a;
}

}  // namespace

FfnnWeights FfnnWeights::zerosLike(const FfnnWeights& o) {
  return {Eigen::MatrixXd::Zero(o.w1.rows(), o.w1.cols()), Eigen::VectorXd::Zero(o.b1.size()),
          Eigen::MatrixXd::Zero(o.w2.rows(), o.w2.cols()), Eigen::VectorXd::Zero(o.b2.size())};
}

Eigen::MatrixXd ffnnForward(const FfnnWeights& w, const Eigen::MatrixXd& x) { return outputs(w, hiddenLayer(w, x)); }

double ffnnLoss(const FfnnWeights& w, const Eigen::MatrixXd& x, const Eigen::VectorXi& y) {
  const Eigen::MatrixXd p = ffnnForward(w, x);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) loss -= std::log(std::max(p(i, y(i)), 1e-300));
  return loss / static_cast<double>(x.rows());
}

FfnnWeights ffnnGradient(const FfnnWeights& w, const Eigen::MatrixXd& x, const Eigen::VectorXi& y) {
  const Eigen::MatrixXd h = hiddenLayer(w, x);
  Eigen::MatrixXd dz = outputs(w, h);
  for (Eigen::Index i = 0; i < x.rows(); ++i) dz(i, y(i)) -= 1.0;
  dz /= static_cast<double>(x.rows());
  FfnnWeights g;
  g.w2 = dz.transpose() * h;
  g.b2 = dz.colwise().sum().transpose();
  const Eigen::MatrixXd dh = ((dz * w.w2).array() * h.array() * (1.0 - h.array())).matrix();
  g.w1 = dh.transpose() * x;
  g.b1 = dh.colwise().sum().transpose();
  return g;
}

FfnnClassifier::FfnnClassifier(const nlohmann::json& params) {
  ParamReader p("ffnn", params);
  hidden_ = p.integer("hidden", 0);
  epochs_ = p.integer("epochs", 100);
  lr_ = p.real("lr", 0.3);
  momentum_ = p.real("momentum", 0.2);
  batchSize_ = p.integer("batchSize", 32);
  seed_ = static_cast<std::uint64_t>(p.integer("seed", 1));
  p.finish();
  if (hidden_ < 0 || epochs_ < 0 || batchSize_ < 0) throw ValidationError("ffnn: hidden, epochs and batchSize must be >= 0");
  if (!(lr_ > 0) || momentum_ < 0 || momentum_ >= 1) throw ValidationError("ffnn: need lr > 0 and 0 <= momentum < 1");
}

nlohmann::json FfnnClassifier::params() const {
  return {{"hidden", hidden_}, {"epochs", epochs_},       {"lr", lr_},
          {"momentum", momentum_}, {"batchSize", batchSize_}, {"seed", seed_}};
}

void FfnnClassifier::fitImpl(const Dataset& data) {
  const Eigen::MatrixXd x = encodeOneHot(data.schema, data.x);
  const auto inputs = static_cast<int>(x.cols());
  const int classes = data.schema.numClasses();
  const int hidden = hidden_ > 0 ? hidden_ : std::max(1, (inputs + classes) / 2);

  std::mt19937_64 rng(seed_);
  std::uniform_real_distribution<double> init(-0.5, 0.5);
  auto draw = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = init(rng);
    }
    return m;
  };
  weights_.w1 = draw(hidden, inputs);
  weights_.b1 = draw(hidden, 1);
  weights_.w2 = draw(classes, hidden);
  weights_.b2 = draw(classes, 1);

  const auto n = x.rows();
  const Eigen::Index batch = batchSize_ > 0 ? std::min<Eigen::Index>(batchSize_, n) : n;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  FfnnWeights velocity = FfnnWeights::zerosLike(weights_);
  Eigen::MatrixXd xb;
  Eigen::VectorXi yb;
  for (int epoch = 0; epoch < epochs_; ++epoch) {
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index len = std::min(batch, n - start);
      xb.resize(len, x.cols());
      yb.resize(len);
      for (Eigen::Index r = 0; r < len; ++r) {
        xb.row(r) = x.row(order[static_cast<std::size_t>(start + r)]);
        yb(r) = data.y(order[static_cast<std::size_t>(start + r)]);
      }
      const FfnnWeights g = ffnnGradient(weights_, xb, yb);
      scale(velocity, momentum_);
      axpy(velocity, -lr_, g);
      axpy(weights_, 1.0, velocity);
    }
    if (onEpoch_) onEpoch_(epoch, ffnnLoss(weights_, x, data.y));
  }
}

int FfnnClassifier::predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  const Eigen::MatrixXd x = encodeOneHot(schema(), row.transpose());
  return argmaxLowest(ffnnForward(weights_, x).row(0).transpose());
}

nlohmann::json FfnnClassifier::state() const {
  return {{"w1", matrixToJson(weights_.w1)},
          {"b1", vectorToJson(weights_.b1)},
          {"w2", matrixToJson(weights_.w2)},
          {"b2", vectorToJson(weights_.b2)}};
}

void FfnnClassifier::loadState(const nlohmann::json& s) {
  weights_.w1 = matrixFromJson(s.at("w1"));
  weights_.b1 = vectorFromJson(s.at("b1"));
  weights_.w2 = matrixFromJson(s.at("w2"));
  weights_.b2 = vectorFromJson(s.at("b2"));
  if (weights_.w1.rows() != weights_.b1.size() || weights_.w2.cols() != weights_.b1.size() ||
      weights_.w2.rows() != weights_.b2.size() || weights_.w1.cols() != oneHotWidth(schema())) {
    throw SchemaError("ffnn weight shapes do not match the schema");
  }
}

}  // namespace bdss
