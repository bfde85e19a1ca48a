#include "bridgedss/ruleforge.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "bridgedss/errors.hpp"
#include "bridgedss/log.hpp"

namespace bdss {

FuzzyPartition::FuzzyPartition(std::string feature, int attribute, Eigen::VectorXd centers)
    : feature_(std::move(feature)), attribute_(attribute), centers_(std::move(centers)) {
  if (centers_.size() == 0) throw ValidationError("fuzzy partition needs at least one center");
  for (Eigen::Index t = 1; t < centers_.size(); ++t) {
    if (!(centers_(t) > centers_(t - 1))) throw ValidationError("fuzzy partition centers must be strictly increasing");
  }
}

FuzzyPartition FuzzyPartition::uniform(std::string feature, int attribute, double lo, double hi, int k) {
  if (k < 2) throw ValidationError(fmt::format("partition of {} needs k >= 2 (got {})", feature, k));
  if (!(hi > lo)) return FuzzyPartition(std::move(feature), attribute, Eigen::VectorXd::Constant(1, lo));
  Eigen::VectorXd c(k);
  for (int t = 0; t < k; ++t) c(t) = t == k - 1 ? hi : lo + (hi - lo) * t / (k - 1);
  return FuzzyPartition(std::move(feature), attribute, std::move(c));
}

double FuzzyPartition::membership(double x, int term) const {
  const Eigen::Index k = centers_.size();
  if (k == 1) return 1.0;
  const double c = centers_(term);
  if (x <= c) {
    if (term == 0) return 1.0;
    const double left = centers_(term - 1);
    return x <= left ? 0.0 : (x - left) / (c - left);
  }
  if (term == k - 1) return 1.0;
  const double right = centers_(term + 1);
  return x >= right ? 0.0 : (right - x) / (right - c);
}

Eigen::VectorXd FuzzyPartition::membership(double x) const {
  Eigen::VectorXd m(centers_.size());
  for (Eigen::Index t = 0; t < centers_.size(); ++t) m(t) = membership(x, static_cast<int>(t));
  return m;
}

int FuzzyPartition::bestTerm(double x) const {
  // only the two centers bracketing x can have non-zero membership
  const auto* begin = centers_.data();
  const auto* end = begin + centers_.size();
  const auto* it = std::upper_bound(begin, end, x);
  if (it == begin) return 0;
  if (it == end) return static_cast<int>(centers_.size() - 1);
  const int right = static_cast<int>(it - begin);
  const int left = right - 1;
  return membership(x, right) > membership(x, left) ? right : left;
}

std::vector<FuzzyPartition> buildPartitions(const Dataset& data, int k) { return buildPartitions(data, k, {}); }

std::vector<FuzzyPartition> buildPartitions(const Dataset& data, int k, const std::map<std::string, int>& termsByFeature) {
  if (data.rows() == 0) throw PreconditionError("cannot build partitions from an empty dataset");
  std::vector<FuzzyPartition> out;
  for (int j = 0; j < data.schema.numAttributes(); ++j) {
    const auto& a = data.schema.attributes[j];
    if (a.nominal()) continue;
    int terms = k;
    if (auto it = termsByFeature.find(a.name); it != termsByFeature.end()) terms = it->second;
    out.push_back(FuzzyPartition::uniform(a.name, j, data.x.col(j).minCoeff(), data.x.col(j).maxCoeff(), terms));
  }
  return out;
}

void RuleBase::offer(const std::vector<int>& antecedent, int consequent, double degree) {
  auto [it, inserted] = rules_.try_emplace(antecedent, FuzzyRule{antecedent, consequent, degree, 0});
  auto& rule = it->second;
  ++rule.support;
  if (inserted) return;
  if (degree > rule.degree || (degree == rule.degree && consequent < rule.consequent)) {
    rule.consequent = consequent;
    rule.degree = degree;
  }
}

const FuzzyRule* RuleBase::find(const std::vector<int>& antecedent) const {
  auto it = rules_.find(antecedent);
  return it == rules_.end() ? nullptr : &it->second;
}

RuleBase extractRules(const Dataset& data, const std::vector<FuzzyPartition>& partitions, ExtractionStats* stats) {
  const auto& schema = data.schema;
  std::vector<const FuzzyPartition*> byAttribute(schema.numAttributes(), nullptr);
  for (const auto& p : partitions) {
    if (p.attribute() < 0 || p.attribute() >= schema.numAttributes()) throw ValidationError("partition attribute out of range");
    byAttribute[p.attribute()] = &p;
  }
  for (int j = 0; j < schema.numAttributes(); ++j) {
    if (!schema.attributes[j].nominal() && !byAttribute[j]) {
      throw PreconditionError(fmt::format("no fuzzy partition for numeric attribute {}", schema.attributes[j].name));
    }
  }

  ExtractionStats local;
  RuleBase rb(schema);
  std::vector<int> antecedent(schema.numAttributes());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    double degree = 1.0;
    for (int j = 0; j < schema.numAttributes(); ++j) {
      double v = data.x(i, j);
      if (schema.attributes[j].nominal()) {
        antecedent[j] = static_cast<int>(v);
        continue;
      }
      const auto& p = *byAttribute[j];
      if (v < p.lo() || v > p.hi()) {
        ++local.clampedValues;
        log::warn("rule extraction: {}={} outside [{}, {}], clamped", p.feature(), v, p.lo(), p.hi());
        v = std::clamp(v, p.lo(), p.hi());
      }
      int term = p.bestTerm(v);
      antecedent[j] = term;
      degree *= p.membership(v, term);
    }
    if (rb.find(antecedent)) ++local.conflicts;
    rb.offer(antecedent, data.y(i), degree);
  }
  if (stats) *stats = local;
  return rb;
}

Dataset ruleBaseToDataset(const RuleBase& rules, const std::vector<FuzzyPartition>& partitions) {
  if (rules.empty()) throw PreconditionError("rule base is empty");
  const auto& schema = rules.schema();
  std::vector<const FuzzyPartition*> byAttribute(schema.numAttributes(), nullptr);
  for (const auto& p : partitions) byAttribute.at(p.attribute()) = &p;

  Dataset out;
  out.schema = schema;
  out.x.resize(static_cast<Eigen::Index>(rules.size()), schema.numAttributes());
  out.y.resize(static_cast<Eigen::Index>(rules.size()));
  Eigen::Index row = 0;
  for (const auto& [antecedent, rule] : rules.rules()) {
    for (int j = 0; j < schema.numAttributes(); ++j) {
      if (schema.attributes[j].nominal()) {
        out.x(row, j) = antecedent[j];
      } else {
        if (!byAttribute[j]) throw PreconditionError("partition missing for " + schema.attributes[j].name);
        out.x(row, j) = byAttribute[j]->center(antecedent[j]);
      }
    }
    out.y(row) = rule.consequent;
    ++row;
  }
  return out;
}

RulePipeline runRulePipeline(const Dataset& labeled, int k, const std::string& distinctFeature, int maxTerms) {
  const bool search = labeled.schema.indexOf(distinctFeature) >= 0;
  RulePipeline out;
  for (int terms = k;; ++terms) {
    std::map<std::string, int> overrides;
    if (search) overrides[distinctFeature] = terms;
    out.partitions = buildPartitions(labeled, k, overrides);
    out.rules = extractRules(labeled, out.partitions);
    if (!search || out.rules.size() == static_cast<std::size_t>(labeled.rows()) || terms >= maxTerms) break;
  }
  out.ruleDataset = ruleBaseToDataset(out.rules, out.partitions);
  return out;
}

Dataset ruleDatasetFor(const SimConfig& cfg, std::span<const ScenarioRecord> records) {
  return runRulePipeline(toLabeledDataset(cfg, records)).ruleDataset;
}

}  // namespace bdss
