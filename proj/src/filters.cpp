#include "bridgedss/filters.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "bridgedss/errors.hpp"

namespace bdss {

std::string_view toString(FilterKind k) {
  switch (k) {
    case FilterKind::None: return "none";
    case FilterKind::Normal: return "normal";
    case FilterKind::Discrete: return "discrete";
  }
  return "none";
}

FilterKind parseFilterKind(std::string_view s) {
  if (s == "none") return FilterKind::None;
  if (s == "normal") return FilterKind::Normal;
  if (s == "discrete") return FilterKind::Discrete;
  throw ValidationError(fmt::format("unknown filter '{}' (expected normal or discrete)", s));
}

namespace {

void columnRanges(const Dataset& data, std::vector<double>& lo, std::vector<double>& hi) {
  const int m = data.schema.numAttributes();
  lo.assign(m, 0.0);
  hi.assign(m, 0.0);
  if (data.rows() == 0) return;
  for (int j = 0; j < m; ++j) {
    if (data.schema.attributes[j].nominal()) continue;
    lo[j] = data.x.col(j).minCoeff();
    hi[j] = data.x.col(j).maxCoeff();
  }
}

}  // namespace

Filter Filter::identity(const Schema& schema) {
  Filter f;
  f.kind_ = FilterKind::None;
  f.input_ = schema;
  f.output_ = schema;
  f.min_.assign(schema.numAttributes(), 0.0);
  f.max_.assign(schema.numAttributes(), 0.0);
  return f;
}

Filter Filter::fitNormal(const Dataset& data) {
  Filter f = identity(data.schema);
  f.kind_ = FilterKind::Normal;
  columnRanges(data, f.min_, f.max_);
  return f;
}

Filter Filter::fitDiscrete(const Dataset& data, int bins) {
  if (bins < 2) throw PreconditionError(fmt::format("discrete filter needs bins >= 2 (got {})", bins));
  Filter f = identity(data.schema);
  f.kind_ = FilterKind::Discrete;
  f.bins_ = bins;
  columnRanges(data, f.min_, f.max_);
  for (auto& a : f.output_.attributes) {
    if (a.nominal()) continue;
    a.kind = AttributeKind::Nominal;
    a.values.clear();
    for (int b = 0; b < bins; ++b) a.values.push_back(fmt::format("b{}", b));
  }
  return f;
}

std::vector<double> Filter::edges(int attribute) const {
  std::vector<double> e;
  if (kind_ != FilterKind::Discrete || input_.attributes.at(attribute).nominal()) return e;
  const double lo = min_[attribute], hi = max_[attribute];
  if (!(hi > lo)) return e;
  for (int b = 1; b < bins_; ++b) e.push_back(lo + (hi - lo) * b / bins_);
  return e;
}

double Filter::transform(int j, double v) const {
  if (input_.attributes[j].nominal()) return v;
  const double lo = min_[j], hi = max_[j];
  switch (kind_) {
    case FilterKind::None:
      return v;
    case FilterKind::Normal:
      return hi > lo ? (v - lo) / (hi - lo) : 0.0;
    case FilterKind::Discrete: {
      if (!(hi > lo)) return 0.0;
      // bins are [e_b, e_{b+1}); the last bin is closed at max and absorbs anything beyond it
      int bin = 0;
      for (int b = 1; b < bins_; ++b) {
        if (v >= lo + (hi - lo) * b / bins_) bin = b;
      }
      return bin;
    }
  }
  return v;
}

Dataset Filter::apply(const Dataset& data) const {
  if (data.schema != input_) throw SchemaError("filter applied to a dataset with a different schema");
  Dataset out;
  out.schema = output_;
  out.x.resize(data.rows(), data.cols());
  out.y = data.y;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (int j = 0; j < data.schema.numAttributes(); ++j) out.x(i, j) = transform(j, data.x(i, j));
  }
  return out;
}

Eigen::VectorXd Filter::applyRow(const Eigen::Ref<const Eigen::VectorXd>& row) const {
  if (row.size() != input_.numAttributes()) {
    throw SchemaError(fmt::format("row has {} values, filter expects {}", row.size(), input_.numAttributes()));
  }
  Eigen::VectorXd out(row.size());
  for (int j = 0; j < input_.numAttributes(); ++j) out(j) = transform(j, row(j));
  return out;
}

nlohmann::json Filter::toJson() const {
  return {{"kind", toString(kind_)}, {"bins", bins_},           {"min", min_},
          {"max", max_},             {"input", schemaToJson(input_)}, {"output", schemaToJson(output_)}};
}

Filter Filter::fromJson(const nlohmann::json& j) {
  Filter f;
  f.kind_ = parseFilterKind(j.at("kind").get<std::string>());
  f.bins_ = j.at("bins").get<int>();
  f.min_ = j.at("min").get<std::vector<double>>();
  f.max_ = j.at("max").get<std::vector<double>>();
  f.input_ = schemaFromJson(j.at("input"));
  f.output_ = schemaFromJson(j.at("output"));
  if (f.min_.size() != static_cast<std::size_t>(f.input_.numAttributes()) || f.max_.size() != f.min_.size()) {
    throw SchemaError("filter parameters do not match the input schema");
  }
  return f;
}

FilteredDataset normalFilter(const Dataset& data) {
  auto f = Filter::fitNormal(data);
  return {f.apply(data), f};
}

FilteredDataset discreteFilter(const Dataset& data, int bins) {
  auto f = Filter::fitDiscrete(data, bins);
  return {f.apply(data), f};
}

FilteredDataset applyFilter(const Dataset& data, FilterKind kind, int bins) {
  switch (kind) {
    case FilterKind::Normal: return normalFilter(data);
    case FilterKind::Discrete: return discreteFilter(data, bins);
    case FilterKind::None: break;
  }
  return {data, Filter::identity(data.schema)};
}

namespace {

bool needsQuote(std::string_view s) {
  return s.empty() || s.find_first_of(" \t,{}'\"%") != std::string_view::npos;
}

std::string arffName(std::string_view s) {
  if (!needsQuote(s)) return std::string(s);
  std::string out = "'";
  for (char c : s) {
    if (c == '\'' || c == '\\') out += '\\';
    out += c;
  }
  return out + "'";
}

std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t\r"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  return s;
}

std::string unquote(std::string s) {
  s = trim(std::move(s));
  if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"') && s.back() == s.front()) {
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) ++i;
      out += s[i];
    }
    return out;
  }
  return s;
}

std::vector<std::string> splitTopLevel(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (quote) {
      cur += c;
      if (c == '\\' && i + 1 < s.size()) {
        cur += s[++i];
      } else if (c == quote) {
        quote = 0;
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      cur += c;
    } else if (c == ',') {
      out.push_back(unquote(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(unquote(cur));
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

void writeArff(std::ostream& out, const Dataset& data, std::string_view relation) {
  out << "@relation " << arffName(relation) << "\n\n";
  for (const auto& a : data.schema.attributes) {
    out << "@attribute " << arffName(a.name) << ' ';
    if (a.nominal()) {
      out << '{';
      for (int v = 0; v < a.cardinality(); ++v) out << (v ? "," : "") << arffName(a.values[v]);
      out << '}';
    } else {
      out << "numeric";
    }
    out << '\n';
  }
  out << "@attribute class {";
  for (int c = 0; c < data.schema.numClasses(); ++c) out << (c ? "," : "") << arffName(data.schema.classNames[c]);
  out << "}\n\n@data\n";
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (int j = 0; j < data.schema.numAttributes(); ++j) {
      const auto& a = data.schema.attributes[j];
      if (a.nominal()) {
        out << arffName(a.values.at(static_cast<std::size_t>(data.x(i, j))));
      } else {
        out << fmt::format("{}", data.x(i, j));
      }
      out << ',';
    }
    out << arffName(data.schema.classNames.at(data.y(i))) << '\n';
  }
}

Dataset readArff(std::istream& in) {
  std::vector<Attribute> attrs;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  bool inData = false;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    line = trim(line);
    if (line.empty() || line[0] == '%') continue;
    if (!inData) {
      auto head = lower(line.substr(0, line.find_first_of(" \t")));
      if (head == "@relation") continue;
      if (head == "@data") {
        inData = true;
        if (attrs.size() < 1 || !attrs.back().nominal()) throw ValidationError("ARFF: last attribute must be a nominal class");
        continue;
      }
      if (head != "@attribute") throw ValidationError(fmt::format("ARFF line {}: unexpected '{}'", lineNo, line));
      std::string rest = trim(line.substr(head.size()));
      std::string name;
      std::size_t pos = 0;
      if (rest[0] == '\'' || rest[0] == '"') {
        char q = rest[0];
        pos = 1;
        while (pos < rest.size() && rest[pos] != q) {
          if (rest[pos] == '\\') ++pos;
          ++pos;
        }
        name = unquote(rest.substr(0, pos + 1));
        ++pos;
      } else {
        pos = rest.find_first_of(" \t");
        name = rest.substr(0, pos);
      }
      std::string type = trim(rest.substr(std::min(pos, rest.size())));
      Attribute a;
      a.name = name;
      if (!type.empty() && type.front() == '{') {
        auto close = type.rfind('}');
        if (close == std::string::npos) throw ValidationError(fmt::format("ARFF line {}: unterminated value set", lineNo));
        a.kind = AttributeKind::Nominal;
        a.values = splitTopLevel(type.substr(1, close - 1));
      } else if (auto t = lower(type); t == "numeric" || t == "real" || t == "integer") {
        a.kind = AttributeKind::Numeric;
      } else {
        throw ValidationError(fmt::format("ARFF line {}: unsupported attribute type '{}'", lineNo, type));
      }
      attrs.push_back(std::move(a));
      continue;
    }
    auto cells = splitTopLevel(line);
    if (cells.size() != attrs.size()) throw ValidationError(fmt::format("ARFF line {}: expected {} values", lineNo, attrs.size()));
    std::vector<double> row;
    for (std::size_t j = 0; j + 1 < attrs.size(); ++j) {
      const auto& a = attrs[j];
      if (a.nominal()) {
        auto it = std::find(a.values.begin(), a.values.end(), cells[j]);
        if (it == a.values.end()) throw ValidationError(fmt::format("ARFF line {}: unknown value '{}'", lineNo, cells[j]));
        row.push_back(static_cast<double>(it - a.values.begin()));
      } else {
        try {
          row.push_back(std::stod(cells[j]));
        } catch (const std::exception&) {
          throw ValidationError(fmt::format("ARFF line {}: '{}' is not numeric", lineNo, cells[j]));
        }
      }
    }
    const auto& cls = attrs.back().values;
    auto it = std::find(cls.begin(), cls.end(), cells.back());
    if (it == cls.end()) throw ValidationError(fmt::format("ARFF line {}: unknown class '{}'", lineNo, cells.back()));
    labels.push_back(static_cast<int>(it - cls.begin()));
    rows.push_back(std::move(row));
  }
  if (!inData) throw ValidationError("ARFF: missing @data section");
  Dataset d;
  d.schema.classNames = attrs.back().values;
  attrs.pop_back();
  d.schema.attributes = std::move(attrs);
  d.x.resize(static_cast<Eigen::Index>(rows.size()), d.schema.numAttributes());
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < d.schema.numAttributes(); ++j) d.x(static_cast<Eigen::Index>(i), j) = rows[i][j];
    d.y(static_cast<Eigen::Index>(i)) = labels[i];
  }
  return d;
}

}  // namespace bdss
