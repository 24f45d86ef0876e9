#pragma once

#include "flowguard/constraints.hpp"
#include "flowguard/flowdata.hpp"

#include <map>
#include <variant>

namespace flowguard {

/// Which features are perturbed together. Subsets must be pairwise disjoint.
struct SubsetConfig {
  std::vector<std::vector<std::string>> numeric;
  std::vector<std::vector<std::string>> categorical;
  /// Step size as a fraction of each interval's width.
  double epsilon = 0.3;
};

SubsetConfig subset_config_from_json(const json& doc);
json subset_config_to_json(const SubsetConfig& config);

struct IntervalFeature {
  std::string name;
  std::size_t column = 0;
  double min = 0.0;
  double max = 0.0;
  int decimals = 0;
};

/// Observed value intervals of a subset of numeric features.
struct IntervalPattern {
  std::vector<IntervalFeature> features;
  double epsilon = 0.3;
};

struct CategoricalSource {
  std::string name;
  std::size_t first = 0;
  std::vector<std::string> categories;
};

/// Observed joint assignments of a subset of categorical features.
struct CombinationPattern {
  std::vector<CategoricalSource> sources;
  /// Sorted, unique.
  std::vector<Combination> combinations;
};

using Pattern = std::variant<IntervalPattern, CombinationPattern>;

struct ClassPatternSequence {
  std::string class_name;
  int class_index = 0;
  std::vector<Pattern> patterns;
  std::string fitted_on;
  std::uint64_t layout = 0;
};

/// One sequence per non-benign class, keyed by class index.
using PatternSet = std::map<int, ClassPatternSequence>;

PatternSet fit_patterns(const EncodedDataset& data, const SubsetConfig& config, std::string fitted_on);

/// Widens intervals and adds combinations from `rows`, all of which must carry the sequence's class.
ClassPatternSequence update_patterns(const ClassPatternSequence& sequence, const EncodedDataset& rows);

json patterns_to_json(const PatternSet& patterns);
PatternSet patterns_from_json(const json& doc);

/// Applies pattern sequences to rows of one column layout, repairing the
/// domain's order constraints after the numeric updates.
class Perturber {
 public:
  Perturber(const std::vector<Column>& columns, const std::vector<DomainConstraint>& domain);

  /// One pass over every pattern of `sequence`. The result differs from
  /// `sample` whenever any pattern has room to move.
  RowVector perturb(RowRef sample, const ClassPatternSequence& sequence, Rng& rng) const;

  /// Looks up the sequence for `class_index`; benign or unfitted classes are rejected.
  RowVector perturb(RowRef sample, int class_index, const PatternSet& patterns, Rng& rng) const;

  std::uint64_t layout() const { return layout_; }

 private:
  void apply(RowVector& row, const ClassPatternSequence& sequence, Rng& rng) const;
  void repair_order(RowVector& row) const;
  bool nudge(RowVector& row, RowRef original, const ClassPatternSequence& sequence) const;

  std::uint64_t layout_;
  std::vector<std::pair<std::size_t, std::size_t>> orders_;
};

}  // namespace flowguard
