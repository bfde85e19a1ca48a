#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "bridgedss/dataset.hpp"
#include "bridgedss/filters.hpp"
#include "json.hpp"

namespace bdss {

struct SplitSpec {
  double trainFraction = 0.65;
  std::uint64_t seed = 42;
};

struct Split {
  std::vector<Eigen::Index> train;  // ascending row indices
  std::vector<Eigen::Index> test;
};

/// "0.8", "80" or "80/20" to a training fraction strictly between 0 and 1.
double parseTrainFraction(std::string_view text);

/// Stratified holdout: round(f * n) training rows overall, each class getting its
/// largest-remainder share of that total, clamped so both sides keep at least one row.
Split stratifiedSplit(const Dataset& data, const SplitSpec& spec);

enum class RowStatus : std::uint8_t { Ok, Inapplicable, Failed };
std::string_view toString(RowStatus s);

struct ReportRow {
  std::string algorithm;
  std::string kind;  // "supervised" or "unsupervised"
  FilterKind filter = FilterKind::Normal;
  double trainFraction = 0.0;
  double accuracy = 0.0;
  double trainTimeMs = 0.0;
  double predictTimeMs = 0.0;
  RowStatus status = RowStatus::Ok;
  std::string note;
};

struct EvalOptions {
  std::uint64_t seed = 42;  // learner/clusterer seed
  nlohmann::json params;    // per-algorithm hyperparameter overrides, keyed by algorithm id
  int clusters = 12;
};

/// Filter fitted on the training rows only, then applied to both sides.
struct PreparedSplit {
  Dataset train;
  Dataset test;
  Filter filter;
};
PreparedSplit prepareSplit(const Dataset& data, FilterKind filter, const SplitSpec& spec);

ReportRow evaluateClassifier(const std::string& algorithm, const PreparedSplit& split, const EvalOptions& opt = {});
ReportRow evaluateClusterer(const std::string& algorithm, const PreparedSplit& split, const EvalOptions& opt = {});

struct BenchmarkConfig {
  std::vector<double> fractions{0.65, 0.70, 0.80};
  std::vector<FilterKind> filters{FilterKind::Normal, FilterKind::Discrete};
  std::vector<std::string> supervised;    // empty: all eight
  std::vector<std::string> unsupervised;  // empty: all seven
  std::uint64_t splitSeed = 42;
  EvalOptions eval;
  /// Rows run one after another on the calling thread; otherwise rows run on a worker
  /// pool and timings are only indicative.
  bool strictTiming = true;
  /// Zero the timing columns so that reports are byte-comparable across runs.
  bool recordTiming = true;
  std::function<void(const ReportRow&)> onRow;
};

struct EvaluationReport {
  std::vector<ReportRow> rows;
  nlohmann::json metadata;
};

EvaluationReport runBenchmark(const Dataset& data, const BenchmarkConfig& cfg);

/// Header: algorithm,filter,trainFraction,accuracy,trainTimeMs,predictTimeMs,status
void writeReportCsv(std::ostream& out, const EvaluationReport& report);
nlohmann::json reportToJson(const EvaluationReport& report);
/// Chart-ready series: supervised accuracy by filter, unsupervised accuracy, training time.
nlohmann::json reportCharts(const EvaluationReport& report);

}  // namespace bdss
