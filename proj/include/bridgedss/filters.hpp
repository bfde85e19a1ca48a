#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "bridgedss/dataset.hpp"
#include "json.hpp"

namespace bdss {

enum class FilterKind : std::uint8_t { None, Normal, Discrete };

std::string_view toString(FilterKind k);
FilterKind parseFilterKind(std::string_view s);

/// Fitted preprocessing. Parameters are frozen at fit time and replayed on unseen rows
/// (live scoring never refits).
class Filter {
 public:
  Filter() = default;

  /// Min-max scaling of numeric attributes to [0, 1]; constant attributes map to 0.
  static Filter fitNormal(const Dataset& data);
  /// Equal-width bins over [min, max] per numeric attribute; numeric attributes become nominal.
  static Filter fitDiscrete(const Dataset& data, int bins = 10);
  static Filter identity(const Schema& schema);

  FilterKind kind() const { return kind_; }
  int bins() const { return bins_; }
  const Schema& inputSchema() const { return input_; }
  const Schema& outputSchema() const { return output_; }
  /// Interior bin edges for a numeric input attribute (discrete filter only).
  std::vector<double> edges(int attribute) const;

  Dataset apply(const Dataset& data) const;
  Eigen::VectorXd applyRow(const Eigen::Ref<const Eigen::VectorXd>& row) const;

  nlohmann::json toJson() const;
  static Filter fromJson(const nlohmann::json& j);

 private:
  double transform(int attribute, double v) const;

  FilterKind kind_ = FilterKind::None;
  int bins_ = 0;
  Schema input_;
  Schema output_;
  std::vector<double> min_;
  std::vector<double> max_;
};

struct FilteredDataset {
  Dataset data;
  Filter filter;
};

FilteredDataset normalFilter(const Dataset& data);
FilteredDataset discreteFilter(const Dataset& data, int bins = 10);
FilteredDataset applyFilter(const Dataset& data, FilterKind kind, int bins = 10);

/// WEKA ARFF: nominal attributes declared with their value sets, numeric as `numeric`.
void writeArff(std::ostream& out, const Dataset& data, std::string_view relation);
Dataset readArff(std::istream& in);

}  // namespace bdss
