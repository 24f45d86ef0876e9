#pragma once

#include "flowguard/flowdata.hpp"

#include <map>
#include <set>
#include <variant>

namespace flowguard {

/// lesser <= greater on every valid flow (e.g. min inter-arrival time <= max).
struct OrderPair {
  std::string lesser;
  std::string greater;
};

struct ValueRange {
  std::string feature;
  double min = 0.0;
  double max = 0.0;
};

/// Exactly one active column in the one-hot group of `source`.
struct OneHotExclusive {
  std::string source;
};

using DomainConstraint = std::variant<OrderPair, ValueRange, OneHotExclusive>;

std::string constraint_id(const DomainConstraint& constraint);
json domain_constraint_to_json(const DomainConstraint& constraint);
DomainConstraint domain_constraint_from_json(const json& doc);
std::vector<DomainConstraint> domain_constraints_from_json(const json& doc);
json domain_constraints_to_json(const std::vector<DomainConstraint>& constraints);

struct NumericBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// A joint category assignment: offset of the active category within each source's group.
using Combination = std::vector<int>;

struct ClassConstraints {
  /// Aligned with ClassConstraintTable::numeric_columns.
  std::vector<NumericBounds> bounds;
  /// Aligned with ClassConstraintTable::subsets.
  std::vector<std::set<Combination>> combinations;
};

/// Per-class coherence bounds observed in a reference dataset.
struct ClassConstraintTable {
  std::vector<Column> columns;
  std::vector<std::string> classes;
  int benign = 0;
  std::vector<std::size_t> numeric_columns;
  std::vector<std::vector<std::string>> subsets;
  std::map<int, ClassConstraints> per_class;
};

/// Exact per-class min/max of every numeric column and the observed joint
/// assignments of every categorical subset, over non-benign classes.
ClassConstraintTable derive_class_constraints(const EncodedDataset& data,
                                              const std::vector<std::vector<std::string>>& categorical_subsets);

json class_table_to_json(const ClassConstraintTable& table);
ClassConstraintTable class_table_from_json(const json& doc);

struct Violation {
  std::string constraint;
  std::vector<std::string> features;
  std::vector<double> values;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool valid() const { return violations.empty(); }
};

inline constexpr double kDefaultTolerance = 1e-9;

/// Domain constraints and a class table resolved against one column layout.
class Validator {
 public:
  Validator(std::vector<DomainConstraint> domain, ClassConstraintTable table, double tolerance = kDefaultTolerance);

  /// Reports every violated constraint. Throws DataError for benign or unknown classes.
  ValidationResult check(RowRef sample, int class_index) const;
  ValidationResult check(RowRef sample, std::string_view class_name) const;
  bool is_valid(RowRef sample, int class_index) const { return check(sample, class_index).valid(); }

  const ClassConstraintTable& table() const { return table_; }
  const std::vector<DomainConstraint>& domain() const { return domain_; }
  double tolerance() const { return tolerance_; }

 private:
  struct ResolvedOrder {
    std::size_t lesser, greater;
    std::string id;
  };
  struct ResolvedRange {
    std::size_t column;
    double min, max;
    std::string id;
  };
  struct ResolvedSubset {
    std::vector<OneHotGroup> groups;
  };

  std::vector<DomainConstraint> domain_;
  ClassConstraintTable table_;
  double tolerance_;
  std::vector<OneHotGroup> groups_;
  std::vector<ResolvedOrder> orders_;
  std::vector<ResolvedRange> ranges_;
  std::vector<ResolvedSubset> subsets_;
};

ValidationResult validate(RowRef sample, std::string_view class_name, const std::vector<DomainConstraint>& domain,
                          const ClassConstraintTable& table, double tolerance = kDefaultTolerance);

/// Reads the active category offset of each group; -1 when the group is not one-hot.
Combination read_combination(RowRef sample, std::span<const OneHotGroup> groups);
/// Resolves the one-hot groups of categorical sources by name.
std::vector<OneHotGroup> resolve_groups(const std::vector<Column>& columns, const std::vector<std::string>& sources);
std::size_t resolve_numeric(const std::vector<Column>& columns, std::string_view name);

}  // namespace flowguard
