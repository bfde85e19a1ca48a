#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bridgedss/dataset.hpp"

namespace bdss {

/// Triangular membership functions over one numeric attribute. Neighbouring triangles
/// overlap by half, so interior memberships sum to one; the outer terms are shouldered.
class FuzzyPartition {
 public:
  FuzzyPartition() = default;
  /// `centers` must be strictly increasing; a single center is a degenerate (constant) partition.
  FuzzyPartition(std::string feature, int attribute, Eigen::VectorXd centers);

  /// k centers spread uniformly over [lo, hi]; a single center when lo == hi.
  static FuzzyPartition uniform(std::string feature, int attribute, double lo, double hi, int k);

  const std::string& feature() const { return feature_; }
  int attribute() const { return attribute_; }
  int size() const { return static_cast<int>(centers_.size()); }
  const Eigen::VectorXd& centers() const { return centers_; }
  double center(int term) const { return centers_(term); }
  double lo() const { return centers_(0); }
  double hi() const { return centers_(centers_.size() - 1); }

  Eigen::VectorXd membership(double x) const;
  double membership(double x, int term) const;
  /// Max-membership term; ties go to the lower term index.
  int bestTerm(double x) const;

 private:
  std::string feature_;
  int attribute_ = -1;
  Eigen::VectorXd centers_;
};

/// One partition per numeric attribute with k uniform terms over the observed range.
std::vector<FuzzyPartition> buildPartitions(const Dataset& data, int k);
/// As above with per-feature term counts overriding k.
std::vector<FuzzyPartition> buildPartitions(const Dataset& data, int k, const std::map<std::string, int>& termsByFeature);

struct FuzzyRule {
  /// One entry per attribute: category code for nominal attributes, term index for numeric ones.
  std::vector<int> antecedent;
  int consequent = 0;
  double degree = 0.0;
  int support = 0;  // instances whose antecedent mapped here
};

/// At most one rule per antecedent, iterated in lexicographic antecedent order.
class RuleBase {
 public:
  RuleBase() = default;
  explicit RuleBase(Schema schema) : schema_(std::move(schema)) {}

  /// Wang-Mendel conflict rule: keep the higher degree; equal degrees go to the lower class id.
  void offer(const std::vector<int>& antecedent, int consequent, double degree);

  const Schema& schema() const { return schema_; }
  std::size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }
  const std::map<std::vector<int>, FuzzyRule>& rules() const { return rules_; }
  const FuzzyRule* find(const std::vector<int>& antecedent) const;

 private:
  Schema schema_;
  std::map<std::vector<int>, FuzzyRule> rules_;
};

struct ExtractionStats {
  std::size_t clampedValues = 0;
  std::size_t conflicts = 0;
};

/// Wang-Mendel rule generation: fuzzify each instance to its max-membership terms,
/// score the rule by the product of those memberships, resolve antecedent conflicts.
RuleBase extractRules(const Dataset& data, const std::vector<FuzzyPartition>& partitions,
                      ExtractionStats* stats = nullptr);

/// One instance per rule; numeric attributes take the centers of the antecedent terms.
Dataset ruleBaseToDataset(const RuleBase& rules, const std::vector<FuzzyPartition>& partitions);

struct RulePipeline {
  std::vector<FuzzyPartition> partitions;
  RuleBase rules;
  Dataset ruleDataset;
};

/// Partitions with k terms, except `distinctFeature`, whose term count is raised from k
/// until every instance yields its own antecedent (or `maxTerms` is reached).
RulePipeline runRulePipeline(const Dataset& labeled, int k = 5,
                             const std::string& distinctFeature = "demandMultiplier", int maxTerms = 64);

/// Labels the records and runs the pipeline with its defaults; the learners' input.
Dataset ruleDatasetFor(const SimConfig& cfg, std::span<const ScenarioRecord> records);

}  // namespace bdss
