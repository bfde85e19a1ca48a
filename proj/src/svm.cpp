#include "bridgedss/svm.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <list>
#include <random>
#include <unordered_map>

#include "bridgedss/eigen_json.hpp"
#include "bridgedss/errors.hpp"
#include "bridgedss/log.hpp"

namespace bdss {

double Kernel::operator()(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (type == Type::Linear) return a.dot(b);
  return std::exp(-gamma * (a - b).squaredNorm());
}

Eigen::VectorXd Kernel::row(const Eigen::MatrixXd& x, const Eigen::VectorXd& sqNorms,
                            const Eigen::Ref<const Eigen::VectorXd>& q) const {
  return fromDots(x * q, sqNorms, q.squaredNorm());
}

Eigen::VectorXd Kernel::fromDots(Eigen::VectorXd dots, const Eigen::VectorXd& sqNorms, double qq) const {
  if (type == Type::Linear) return dots;
  return (-gamma * (sqNorms.array() - 2.0 * dots.array() + qq).max(0.0)).exp().matrix();
}

double BinaryMachine::decision(const Kernel& k, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (k.type == Kernel::Type::Linear) return w.dot(x) + b;
  double f = b;
  for (Eigen::Index i = 0; i < supportVectors.rows(); ++i) f += coef(i) * k(supportVectors.row(i).transpose(), x);
  return f;
}

namespace {

// Least-recently-used kernel rows, fetched only for accepted steps. One-hot rows are
// mostly zeros, so inner products accumulate only the columns where the query is nonzero.
class RowCache {
 public:
  RowCache(const Eigen::MatrixXd& x, const Kernel& k, const Eigen::VectorXd& sq, std::size_t capacity)
      : x_(x), k_(k), sq_(sq), capacity_(std::max<std::size_t>(capacity, 2)) {}

  const Eigen::VectorXd& get(Eigen::Index i) {
    if (auto it = map_.find(i); it != map_.end()) {
      order_.splice(order_.begin(), order_, it->second.second);
      return it->second.first;
    }
    if (map_.size() >= capacity_) {
      map_.erase(order_.back());
      order_.pop_back();
    }
    order_.push_front(i);
    Eigen::VectorXd dots = Eigen::VectorXd::Zero(x_.rows());
    for (Eigen::Index j = 0; j < x_.cols(); ++j) {
      if (const double q = x_(i, j); q != 0.0) dots += q * x_.col(j);
    }
    Eigen::VectorXd row = k_.fromDots(std::move(dots), sq_, sq_(i));
    auto [it, _] = map_.emplace(i, std::make_pair(std::move(row), order_.begin()));
    return it->second.first;
  }

 private:
  const Eigen::MatrixXd& x_;
  const Kernel& k_;
  const Eigen::VectorXd& sq_;
  std::size_t capacity_;
  std::list<Eigen::Index> order_;
  std::unordered_map<Eigen::Index, std::pair<Eigen::VectorXd, std::list<Eigen::Index>::iterator>> map_;
};

std::size_t cacheRows(Eigen::Index n) {
  constexpr std::size_t kBudget = std::size_t{256} << 20;  // bytes
  return kBudget / (sizeof(double) * static_cast<std::size_t>(std::max<Eigen::Index>(n, 1)));
}

// Platt's layout for the linear kernel: errors cached for non-bound multipliers only,
// recomputed from an explicit weight vector for the rest. Nonlinear kernels keep every
// error current instead, since a bound error would cost a pass over the support vectors.
class Smo {
 public:
  Smo(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SmoOptions& opt)
      : x_(x),
        y_(y),
        opt_(opt),
        n_(x.rows()),
        linear_(opt.kernel.type == Kernel::Type::Linear),
        sq_(x.rowwise().squaredNorm()),
        cache_(x, opt.kernel, sq_, cacheRows(x.rows())),
        rng_(7) {
    alpha_ = Eigen::VectorXd::Zero(n_);
    err_ = -y_;
    w_ = Eigen::VectorXd::Zero(x.cols());
    nbPos_.assign(static_cast<std::size_t>(n_), -1);
  }

  BinaryMachine run() {
    int changed = 0;
    bool examineAll = true;
    int passes = 0;
    while (changed > 0 || examineAll) {
      changed = 0;
      for (Eigen::Index i = 0; i < n_; ++i) {
        if (examineAll || nonBound(i)) changed += examine(i);
      }
      if (examineAll) {
        examineAll = false;
      } else if (changed == 0) {
        examineAll = true;
      }
      if (++passes > 100000) {
        log::warn("smo: stopped after {} passes without converging", passes);
        break;
      }
    }
    BinaryMachine m;
    m.alpha = alpha_;
    m.y = y_;
    m.b = b_;
    m.steps = steps_;
    return m;
  }

 private:
  bool nonBound(Eigen::Index i) const { return alpha_(i) > 0 && alpha_(i) < opt_.c; }

  double k(Eigen::Index i, Eigen::Index j) const {
    const double dot = x_.row(i).dot(x_.row(j));
    if (linear_) return dot;
    return std::exp(-opt_.kernel.gamma * std::max(0.0, sq_(i) + sq_(j) - 2.0 * dot));
  }

  double error(Eigen::Index i) const {
    if (!linear_ || nonBound(i)) return err_(i);
    return w_.dot(x_.row(i).transpose()) + b_ - y_(i);
  }

  // keeps `set` equal to {i : keep(i)} for the index just changed
  static void updateSet(std::vector<Eigen::Index>& set, std::vector<Eigen::Index>& pos, Eigen::Index i, bool keep) {
    auto& p = pos[static_cast<std::size_t>(i)];
    if (keep && p < 0) {
      p = static_cast<Eigen::Index>(set.size());
      set.push_back(i);
    } else if (!keep && p >= 0) {
      const Eigen::Index last = set.back();
      set[static_cast<std::size_t>(p)] = last;
      pos[static_cast<std::size_t>(last)] = p;
      set.pop_back();
      p = -1;
    }
  }

  void track(Eigen::Index i) {
    updateSet(nb_, nbPos_, i, nonBound(i));
  }

  int examine(Eigen::Index i2) {
    const double e2 = error(i2);
    const double r2 = e2 * y_(i2);
    const double a2 = alpha_(i2);
    if (!((r2 < -opt_.tol && a2 < opt_.c) || (r2 > opt_.tol && a2 > 0))) return 0;

    Eigen::Index best = -1;
    double gap = -1.0;
    for (auto i : nb_) {
      const double g = std::abs(err_(i) - e2);
      if (g > gap || (g == gap && i < best)) {
        gap = g;
        best = i;
      }
    }
    if (nb_.size() > 1 && takeStep(best, i2, e2)) return 1;

    if (!nb_.empty()) {
      const std::size_t m = nb_.size();
      const auto start = static_cast<std::size_t>(rng_() % m);
      for (std::size_t s = 0; s < m; ++s) {
        if (takeStep(nb_[(start + s) % m], i2, e2)) return 1;
      }
    }
    const auto start2 = static_cast<Eigen::Index>(rng_() % static_cast<std::uint64_t>(n_));
    for (Eigen::Index s = 0; s < n_; ++s) {
      const Eigen::Index i1 = (start2 + s) % n_;
      if (!nonBound(i1) && takeStep(i1, i2, e2)) return 1;
    }
    return 0;
  }

  bool takeStep(Eigen::Index i1, Eigen::Index i2, double e2) {
    if (i1 == i2) return false;
    const double c = opt_.c;
    const double a1o = alpha_(i1), a2o = alpha_(i2);
    const double y1 = y_(i1), y2 = y_(i2);
    const double s = y1 * y2;
    double lo, hi;
    if (s < 0) {
      lo = std::max(0.0, a2o - a1o);
      hi = std::min(c, c + a2o - a1o);
    } else {
      lo = std::max(0.0, a1o + a2o - c);
      hi = std::min(c, a1o + a2o);
    }
    if (lo >= hi) return false;

    const double e1 = error(i1);
    const double k11 = k(i1, i1), k12 = k(i1, i2), k22 = k(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;

    double a2;
    if (eta > 0) {
      a2 = std::clamp(a2o + y2 * (e1 - e2) / eta, lo, hi);
    } else {
      // objective (to minimise) at both ends of the segment
      const double f1 = y1 * (e1 - b_) - a1o * k11 - s * a2o * k12;
      const double f2 = y2 * (e2 - b_) - s * a1o * k12 - a2o * k22;
      auto obj = [&](double a) {
        const double a1 = a1o + s * (a2o - a);
        return a1 * f1 + a * f2 + 0.5 * a1 * a1 * k11 + 0.5 * a * a * k22 + s * a * a1 * k12;
      };
      const double lObj = obj(lo), hObj = obj(hi);
      if (lObj < hObj - opt_.eps) {
        a2 = lo;
      } else if (lObj > hObj + opt_.eps) {
        a2 = hi;
      } else {
        a2 = a2o;
      }
    }
    const double snap = 1e-10 * c;
    if (a2 < snap) a2 = 0.0;
    if (a2 > c - snap) a2 = c;
    if (std::abs(a2 - a2o) < opt_.eps * (a2 + a2o + opt_.eps)) return false;

    double a1 = a1o + s * (a2o - a2);
    if (a1 < 0) {
      a2 += s * a1;
      a1 = 0.0;
    } else if (a1 > c) {
      a2 += s * (a1 - c);
      a1 = c;
    }
    if (a1 < snap) a1 = 0.0;
    if (a1 > c - snap) a1 = c;

    const double d1 = y1 * (a1 - a1o), d2 = y2 * (a2 - a2o);
    const double b1 = b_ - e1 - d1 * k11 - d2 * k12;
    const double b2 = b_ - e2 - d1 * k12 - d2 * k22;
    double bn;
    if (a1 > 0 && a1 < c) {
      bn = b1;
    } else if (a2 > 0 && a2 < c) {
      bn = b2;
    } else {
      bn = 0.5 * (b1 + b2);
    }
    const double db = bn - b_;
    if (linear_) {
      const Eigen::VectorXd dw = d1 * x_.row(i1).transpose() + d2 * x_.row(i2).transpose();
      for (auto j : nb_) {
        if (j != i1 && j != i2) err_(j) += dw.dot(x_.row(j).transpose()) + db;
      }
      err_(i1) = e1 + d1 * k11 + d2 * k12 + db;
      err_(i2) = e2 + d1 * k12 + d2 * k22 + db;
      w_ += dw;
    } else {
      const Eigen::VectorXd k1 = cache_.get(i1);
      err_ += d1 * k1 + d2 * cache_.get(i2);
      err_.array() += db;
    }
    b_ = bn;
    alpha_(i1) = a1;
    alpha_(i2) = a2;
    track(i1);
    track(i2);
    ++steps_;
    if (opt_.onStep) opt_.onStep(alpha_);
    return true;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  const SmoOptions& opt_;
  Eigen::Index n_;
  bool linear_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd sq_;
  RowCache cache_;
  std::mt19937_64 rng_;
  Eigen::VectorXd err_;  // linear kernel: valid for non-bound indices only
  Eigen::VectorXd w_;
  std::vector<Eigen::Index> nb_;  // non-bound indices
  std::vector<Eigen::Index> nbPos_;
  double b_ = 0.0;
  int steps_ = 0;
};

}  // namespace

BinaryMachine solveSmo(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SmoOptions& opt) {
  if (x.rows() != y.size() || x.rows() < 2) throw PreconditionError("smo needs at least two labelled instances");
  if (!((y.array() == 1.0) || (y.array() == -1.0)).all()) throw PreconditionError("smo labels must be +1 or -1");
  BinaryMachine m = Smo(x, y, opt).run();
  int sv = 0;
  for (Eigen::Index i = 0; i < m.alpha.size(); ++i) sv += m.alpha(i) > 0;
  m.supportVectors.resize(sv, x.cols());
  m.coef.resize(sv);
  m.w = Eigen::VectorXd::Zero(x.cols());
  for (Eigen::Index i = 0, r = 0; i < m.alpha.size(); ++i) {
    if (m.alpha(i) <= 0) continue;
    m.supportVectors.row(r) = x.row(i);
    m.coef(r) = m.alpha(i) * y(i);
    m.w += m.coef(r) * x.row(i).transpose();
    ++r;
  }
  return m;
}

double dualObjective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& alpha, const Kernel& k) {
  double quad = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (alpha(i) == 0) continue;
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      if (alpha(j) == 0) continue;
      quad += alpha(i) * alpha(j) * y(i) * y(j) * k(x.row(i).transpose(), x.row(j).transpose());
    }
  }
  return alpha.sum() - 0.5 * quad;
}

double maxKktViolation(const Eigen::MatrixXd& x, const BinaryMachine& m, double c, const Kernel& k) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double f = m.b;
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      if (m.alpha(j) > 0) f += m.alpha(j) * m.y(j) * k(x.row(j).transpose(), x.row(i).transpose());
    }
    const double yf = m.y(i) * f;
    if (m.alpha(i) < c) worst = std::max(worst, 1.0 - yf);
    if (m.alpha(i) > 0) worst = std::max(worst, yf - 1.0);
  }
  return worst;
}

SmoClassifier::Config SmoClassifier::parse(std::string algorithm, Kernel::Type kernel, const nlohmann::json& params) {
  ParamReader p(algorithm, params);
  Config cfg;
  cfg.algorithm = algorithm;
  cfg.options.c = p.real("C", 1.0);
  cfg.options.tol = p.real("tol", 1e-3);
  cfg.options.eps = p.real("eps", 1e-12);
  const auto kname = p.text("kernel", kernel == Kernel::Type::Linear ? "linear" : "rbf");
  cfg.options.kernel.gamma = p.real("gamma", 0.01);
  p.finish();
  if (kname == "linear") {
    cfg.options.kernel.type = Kernel::Type::Linear;
  } else if (kname == "rbf") {
    cfg.options.kernel.type = Kernel::Type::Rbf;
  } else {
    throw ValidationError(fmt::format("{}: unknown kernel '{}'", algorithm, kname));
  }
  if (!(cfg.options.c > 0)) throw ValidationError(fmt::format("{}: C must be positive", algorithm));
  if (!(cfg.options.tol > 0)) throw ValidationError(fmt::format("{}: tol must be positive", algorithm));
  if (!(cfg.options.kernel.gamma > 0)) throw ValidationError(fmt::format("{}: gamma must be positive", algorithm));
  return cfg;
}

SmoClassifier::Config SmoClassifier::smoDefaults(const nlohmann::json& params) {
  return parse("smo", Kernel::Type::Linear, params);
}

SmoClassifier::Config SmoClassifier::svmDefaults(const nlohmann::json& params) {
  return parse("svm", Kernel::Type::Rbf, params);
}

nlohmann::json SmoClassifier::params() const {
  const auto& o = cfg_.options;
  return {{"C", o.c},
          {"tol", o.tol},
          {"eps", o.eps},
          {"kernel", o.kernel.type == Kernel::Type::Linear ? "linear" : "rbf"},
          {"gamma", o.kernel.gamma}};
}

Eigen::MatrixXd SmoClassifier::machineInputs(const Dataset& data, std::size_t machine) const {
  const auto& m = machines_.at(machine);
  Eigen::MatrixXd enc = encodeOneHot(data.schema, data.x);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (data.y(i) == m.positive || data.y(i) == m.negative) rows.push_back(i);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), enc.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = enc.row(rows[r]);
  return out;
}

void SmoClassifier::fitImpl(const Dataset& data) {
  machines_.clear();
  constant_ = -1;
  const auto counts = data.classCounts();
  std::vector<int> present;
  for (int c = 0; c < static_cast<int>(counts.size()); ++c) {
    if (counts[c] > 0) present.push_back(c);
  }
  if (present.size() == 1) {
    constant_ = present.front();
    log::warn("{}: training data holds a single class; fitted a constant classifier", cfg_.algorithm);
    return;
  }
  const Eigen::MatrixXd enc = encodeOneHot(data.schema, data.x);
  for (std::size_t a = 0; a < present.size(); ++a) {
    for (std::size_t b = a + 1; b < present.size(); ++b) {
      std::vector<Eigen::Index> rows;
      for (Eigen::Index i = 0; i < data.rows(); ++i) {
        if (data.y(i) == present[a] || data.y(i) == present[b]) rows.push_back(i);
      }
      Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), enc.cols());
      Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        x.row(static_cast<Eigen::Index>(r)) = enc.row(rows[r]);
        y(static_cast<Eigen::Index>(r)) = data.y(rows[r]) == present[a] ? 1.0 : -1.0;
      }
      BinaryMachine m = solveSmo(x, y, cfg_.options);
      m.positive = present[a];
      m.negative = present[b];
      machines_.push_back(std::move(m));
    }
  }
}

int SmoClassifier::predictImpl(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  if (constant_ >= 0) return constant_;
  const Eigen::VectorXd x = encodeOneHot(schema(), row.transpose()).row(0).transpose();
  Eigen::VectorXd votes = Eigen::VectorXd::Zero(schema().numClasses());
  for (const auto& m : machines_) votes(m.decision(cfg_.options.kernel, x) >= 0 ? m.positive : m.negative) += 1.0;
  return argmaxLowest(votes);
}

nlohmann::json SmoClassifier::state() const {
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : machines_) {
    ms.push_back({{"positive", m.positive},
                  {"negative", m.negative},
                  {"b", m.b},
                  {"alpha", vectorToJson(m.alpha)},
                  {"y", vectorToJson(m.y)},
                  {"coef", vectorToJson(m.coef)},
                  {"supportVectors", matrixToJson(m.supportVectors)},
                  {"w", vectorToJson(m.w)},
                  {"steps", m.steps}});
  }
  return {{"constant", constant_}, {"machines", ms}};
}

void SmoClassifier::loadState(const nlohmann::json& s) {
  constant_ = s.at("constant").get<int>();
  machines_.clear();
  for (const auto& j : s.at("machines")) {
    BinaryMachine m;
    m.positive = j.at("positive").get<int>();
    m.negative = j.at("negative").get<int>();
    m.b = j.at("b").get<double>();
    m.alpha = vectorFromJson(j.at("alpha"));
    m.y = vectorFromJson(j.at("y"));
    m.coef = vectorFromJson(j.at("coef"));
    m.supportVectors = matrixFromJson(j.at("supportVectors"));
    m.w = vectorFromJson(j.at("w"));
    m.steps = j.at("steps").get<int>();
    if (m.supportVectors.rows() != m.coef.size()) throw SchemaError("svm support vectors and coefficients disagree");
    machines_.push_back(std::move(m));
  }
}

}  // namespace bdss
