#include "bridgedss/evalbench.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "bridgedss/classifier.hpp"
#include "bridgedss/clusterers.hpp"
#include "bridgedss/errors.hpp"
#include "bridgedss/log.hpp"
#include "bridgedss/version.hpp"

namespace bdss {

namespace {

using Clock = std::chrono::steady_clock;

double msSince(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

nlohmann::json paramsFor(const EvalOptions& opt, const std::string& algorithm) {
  if (opt.params.is_object() && opt.params.contains(algorithm)) return opt.params.at(algorithm);
  return nlohmann::json::object();
}

// shortest round-trip representation keeps the CSV byte-stable
std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

std::string_view toString(RowStatus s) {
  switch (s) {
    case RowStatus::Ok: return "ok";
    case RowStatus::Inapplicable: return "inapplicable";
    case RowStatus::Failed: return "failed";
  }
  return "failed";
}

double parseTrainFraction(std::string_view text) {
  const std::string t(text);
  const auto slash = t.find('/');
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(t.substr(0, slash), &used);
    if (used != t.substr(0, slash).size()) throw std::invalid_argument(t);
    if (slash != std::string::npos) {
      const double rest = std::stod(t.substr(slash + 1), &used);
      if (used != t.size() - slash - 1 || v + rest != 100.0) throw std::invalid_argument(t);
    }
  } catch (const std::logic_error&) {
    throw ValidationError(fmt::format("cannot read split '{}'; use 0.8, 80 or 80/20", t));
  }
  // above 1 only whole percentages are accepted, so 1.5 is an error rather than 1.5%
  if (v > 1.0 && v == std::floor(v)) v /= 100.0;
  if (!(v > 0.0 && v < 1.0)) throw ValidationError(fmt::format("split '{}' is not strictly between 0 and 1", t));
  return v;
}

Split stratifiedSplit(const Dataset& data, const SplitSpec& spec) {
  if (!(spec.trainFraction > 0.0 && spec.trainFraction < 1.0)) {
    throw ValidationError(fmt::format("trainFraction must be strictly between 0 and 1, got {}", spec.trainFraction));
  }
  const auto counts = data.classCounts();
  const int k = static_cast<int>(counts.size());
  for (int c = 0; c < k; ++c) {
    if (counts[c] == 1) {
      throw PreconditionError(fmt::format("class '{}' has 1 instance; stratification needs at least 2",
                                          data.schema.classNames[c]));
    }
  }
  const auto n = static_cast<double>(data.rows());
  const auto total = static_cast<int>(std::lround(spec.trainFraction * n));

  // largest remainder: floors first, then the biggest fractional parts (lower class on ties)
  std::vector<int> quota(k, 0);
  std::vector<double> frac(k, -1.0);
  int assigned = 0;
  for (int c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    const double share = spec.trainFraction * counts[c];
    quota[c] = static_cast<int>(std::floor(share));
    frac[c] = share - quota[c];
    assigned += quota[c];
  }
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (int i = 0; i < k && assigned < total; ++i) {
    if (counts[order[i]] == 0) continue;
    ++quota[order[i]];
    ++assigned;
  }
  for (int c = 0; c < k; ++c) {
    if (counts[c] > 0) quota[c] = std::clamp(quota[c], 1, counts[c] - 1);
  }

  std::vector<Eigen::Index> shuffled(static_cast<std::size_t>(data.rows()));
  std::iota(shuffled.begin(), shuffled.end(), Eigen::Index{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  Split out;
  std::vector<int> taken(k, 0);
  for (auto i : shuffled) {
    const int c = data.y(i);
    if (taken[c] < quota[c]) {
      ++taken[c];
      out.train.push_back(i);
    } else {
      out.test.push_back(i);
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

PreparedSplit prepareSplit(const Dataset& data, FilterKind filter, const SplitSpec& spec) {
  const Split s = stratifiedSplit(data, spec);
  Dataset train = data.subset(s.train);
  Dataset test = data.subset(s.test);
  Filter f;
  switch (filter) {
    case FilterKind::Normal: f = Filter::fitNormal(train); break;
    case FilterKind::Discrete: f = Filter::fitDiscrete(train); break;
    case FilterKind::None: f = Filter::identity(train.schema); break;
  }
  return {f.apply(train), f.apply(test), f};
}

ReportRow evaluateClassifier(const std::string& algorithm, const PreparedSplit& split, const EvalOptions& opt) {
  ReportRow row;
  row.algorithm = algorithm;
  row.kind = "supervised";
  row.filter = split.filter.kind();
  row.trainFraction = static_cast<double>(split.train.rows()) /
                      static_cast<double>(split.train.rows() + split.test.rows());
  try {
    auto model = makeClassifier(algorithm, paramsFor(opt, algorithm));
    if (algorithm == "hnb" && !split.train.schema.allNominal()) {
      row.status = RowStatus::Inapplicable;
      row.note = "hnb needs nominal attributes";
      return row;
    }
    auto t0 = Clock::now();
    model->fit(split.train);
    row.trainTimeMs = msSince(t0);
    t0 = Clock::now();
    const Eigen::VectorXi predicted = model->predict(split.test);
    row.predictTimeMs = msSince(t0);
    row.accuracy = accuracy(predicted, split.test.y);
  } catch (const PreconditionError& e) {
    row.status = RowStatus::Inapplicable;
    row.note = e.what();
  } catch (const std::exception& e) {
    row.status = RowStatus::Failed;
    row.note = e.what();
    log::error("{} on {} filter failed: {}", algorithm, toString(row.filter), e.what());
  }
  return row;
}

ReportRow evaluateClusterer(const std::string& algorithm, const PreparedSplit& split, const EvalOptions& opt) {
  ReportRow row;
  row.algorithm = algorithm;
  row.kind = "unsupervised";
  row.filter = split.filter.kind();
  row.trainFraction = static_cast<double>(split.train.rows()) /
                      static_cast<double>(split.train.rows() + split.test.rows());
  try {
    auto model = makeClusterer(algorithm, opt.clusters, opt.seed, paramsFor(opt, algorithm));
    const Eigen::MatrixXd xTrain = encodeOneHot(split.train.schema, split.train.x);
    const Eigen::MatrixXd xTest = encodeOneHot(split.test.schema, split.test.x);
    auto t0 = Clock::now();
    model->fit(xTrain);
    row.trainTimeMs = msSince(t0);
    t0 = Clock::now();
    const Eigen::VectorXi testClusters = model->assignAll(xTest);
    row.predictTimeMs = msSince(t0);
    const auto ev = classesToClustersAccuracy(model->trainingAssignment(), split.train.y, testClusters, split.test.y,
                                              model->k(), split.train.schema.numClasses());
    row.accuracy = ev.accuracy;
  } catch (const PreconditionError& e) {
    row.status = RowStatus::Inapplicable;
    row.note = e.what();
  } catch (const std::exception& e) {
    row.status = RowStatus::Failed;
    row.note = e.what();
    log::error("{} on {} filter failed: {}", algorithm, toString(row.filter), e.what());
  }
  return row;
}

EvaluationReport runBenchmark(const Dataset& data, const BenchmarkConfig& cfg) {
  const auto& supervised = cfg.supervised.empty() ? classifierIds() : cfg.supervised;
  const auto& unsupervised = cfg.unsupervised.empty() ? clustererIds() : cfg.unsupervised;

  std::map<std::pair<int, double>, PreparedSplit> splits;
  for (auto f : cfg.filters) {
    for (double fr : cfg.fractions) {
      splits.emplace(std::pair{static_cast<int>(f), fr}, prepareSplit(data, f, {fr, cfg.splitSeed}));
    }
  }

  struct Task {
    bool supervised;
    std::string algorithm;
    FilterKind filter;
    double fraction;
  };
  std::vector<Task> tasks;
  for (const auto& a : supervised) {
    for (auto f : cfg.filters) {
      for (double fr : cfg.fractions) tasks.push_back({true, a, f, fr});
    }
  }
  for (const auto& a : unsupervised) {
    for (auto f : cfg.filters) {
      for (double fr : cfg.fractions) tasks.push_back({false, a, f, fr});
    }
  }

  EvaluationReport report;
  report.rows.resize(tasks.size());
  auto run = [&](std::size_t i) {
    const auto& t = tasks[i];
    const auto& split = splits.at({static_cast<int>(t.filter), t.fraction});
    ReportRow row = t.supervised ? evaluateClassifier(t.algorithm, split, cfg.eval)
                                 : evaluateClusterer(t.algorithm, split, cfg.eval);
    // the nominal fraction keys the row; the realized one can differ by rounding
    row.trainFraction = t.fraction;
    if (!cfg.recordTiming) {
      row.trainTimeMs = 0.0;
      row.predictTimeMs = 0.0;
    }
    report.rows[i] = std::move(row);
  };

  if (cfg.strictTiming) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      run(i);
      if (cfg.onRow) cfg.onRow(report.rows[i]);
    }
  } else {
    std::atomic<std::size_t> next{0};
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) run(i);
      });
    }
    pool.clear();
    if (cfg.onRow) {
      for (const auto& r : report.rows) cfg.onRow(r);
    }
  }

  std::vector<std::string> filters;
  for (auto f : cfg.filters) filters.emplace_back(toString(f));
  report.metadata = {
      {"artifactVersion", kVersion},
      {"datasetHash", fmt::format("{:016x}", datasetHash(data))},
      {"instances", data.rows()},
      {"splitSeed", cfg.splitSeed},
      {"learnerSeed", cfg.eval.seed},
      {"clusters", cfg.eval.clusters},
      {"fractions", cfg.fractions},
      {"filters", filters},
      {"params", cfg.eval.params.is_null() ? nlohmann::json::object() : cfg.eval.params},
      {"strictTiming", cfg.strictTiming},
      {"recordTiming", cfg.recordTiming},
      {"timingBudgetMs", {{"default", 1000}, {"ffnn", 10000}}},
      {"timingExemptions", {{"ffnn", "exempt from the 1 s training bound; 10 s budget at 100 epochs"}}},
  };
  return report;
}

void writeReportCsv(std::ostream& out, const EvaluationReport& report) {
  out << "algorithm,filter,trainFraction,accuracy,trainTimeMs,predictTimeMs,status\n";
  for (const auto& r : report.rows) {
    const bool ok = r.status == RowStatus::Ok;
    out << fmt::format("{},{},{},{},{},{},{}\n", r.algorithm, toString(r.filter), num(r.trainFraction),
                       ok ? num(r.accuracy) : "", ok ? num(r.trainTimeMs) : "", ok ? num(r.predictTimeMs) : "",
                       toString(r.status));
  }
}

nlohmann::json reportToJson(const EvaluationReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    const bool ok = r.status == RowStatus::Ok;
    nlohmann::json j = {{"algorithm", r.algorithm},
                        {"kind", r.kind},
                        {"filter", toString(r.filter)},
                        {"trainFraction", r.trainFraction},
                        {"accuracy", ok ? nlohmann::json(r.accuracy) : nlohmann::json()},
                        {"trainTimeMs", ok ? nlohmann::json(r.trainTimeMs) : nlohmann::json()},
                        {"predictTimeMs", ok ? nlohmann::json(r.predictTimeMs) : nlohmann::json()},
                        {"status", toString(r.status)}};
    if (!r.note.empty()) j["note"] = r.note;
    rows.push_back(std::move(j));
  }
  return {{"metadata", report.metadata}, {"rows", rows}, {"charts", reportCharts(report)}};
}

nlohmann::json reportCharts(const EvaluationReport& report) {
  // one chart per grouping: categories are algorithms, one series per (filter, fraction)
  // plus a mean-over-splits series per filter
  auto chart = [&](auto keep, auto value) {
    std::vector<std::string> categories;
    std::vector<std::string> filters;
    std::vector<double> fractions;
    int excluded = 0;
    for (const auto& r : report.rows) {
      if (!keep(r)) continue;
      if (r.status != RowStatus::Ok) {
        ++excluded;
        continue;
      }
      if (std::find(categories.begin(), categories.end(), r.algorithm) == categories.end()) categories.push_back(r.algorithm);
      const std::string f(toString(r.filter));
      if (std::find(filters.begin(), filters.end(), f) == filters.end()) filters.push_back(f);
      if (std::find(fractions.begin(), fractions.end(), r.trainFraction) == fractions.end()) fractions.push_back(r.trainFraction);
    }
    nlohmann::json series = nlohmann::json::array();
    for (const auto& f : filters) {
      std::vector<double> sum(categories.size(), 0.0);
      std::vector<int> cnt(categories.size(), 0);
      for (double fr : fractions) {
        nlohmann::json values = nlohmann::json::array();
        for (std::size_t c = 0; c < categories.size(); ++c) {
          nlohmann::json v;
          for (const auto& r : report.rows) {
            if (keep(r) && r.status == RowStatus::Ok && r.algorithm == categories[c] && toString(r.filter) == f &&
                r.trainFraction == fr) {
              v = value(r);
              sum[c] += value(r);
              ++cnt[c];
            }
          }
          values.push_back(v);
        }
        series.push_back({{"filter", f}, {"trainFraction", fr}, {"values", values}});
      }
      nlohmann::json mean = nlohmann::json::array();
      for (std::size_t c = 0; c < categories.size(); ++c) {
        mean.push_back(cnt[c] ? nlohmann::json(sum[c] / cnt[c]) : nlohmann::json());
      }
      series.push_back({{"filter", f}, {"trainFraction", "mean"}, {"values", mean}});
    }
    return nlohmann::json{{"categories", categories}, {"series", series}, {"excluded", excluded}};
  };
  auto isSupervised = [](const ReportRow& r) { return r.kind == "supervised"; };
  auto isUnsupervised = [](const ReportRow& r) { return r.kind == "unsupervised"; };
  auto acc = [](const ReportRow& r) { return r.accuracy; };
  auto time = [](const ReportRow& r) { return r.trainTimeMs; };
  return {{"supervisedAccuracy", chart(isSupervised, acc)},
          {"unsupervisedAccuracy", chart(isUnsupervised, acc)},
          {"supervisedTrainTime", chart(isSupervised, time)},
          {"unsupervisedTrainTime", chart(isUnsupervised, time)}};
}

}  // namespace bdss
