#pragma once

#include "flowguard/flowdata.hpp"

#include <map>
#include <optional>

namespace flowguard {

/// Bounded distribution of one numeric feature within one class.
/// Uniform on [lo, hi] unless `mean`/`sd` are given, in which case it is a
/// normal truncated to [lo, hi].
struct NumericDist {
  double lo = 0.0;
  double hi = 0.0;
  std::optional<double> mean;
  std::optional<double> sd;
};

struct WeightedCombination {
  std::vector<std::string> values;
  double weight = 1.0;
};

/// Joint distribution of a group of categorical features.
struct CombinationTable {
  std::vector<std::string> features;
  std::vector<WeightedCombination> combinations;
};

/// One mixture component of a class. Rows pick a cluster by weight.
struct SyntheticCluster {
  double weight = 1.0;
  std::map<std::string, NumericDist> numeric;
  std::vector<CombinationTable> categorical;
};

struct SyntheticClass {
  std::string name;
  std::size_t count = 0;
  std::vector<SyntheticCluster> clusters;
};

struct SyntheticNumericFeature {
  std::string name;
  int decimals = 3;
};

struct SyntheticSpec {
  std::string label_column = "label";
  std::string benign_label = "Benign";
  std::vector<SyntheticNumericFeature> numeric;
  std::vector<std::string> categorical;
  /// Address-like identifier columns; emitted but marked drop in the schema.
  std::vector<std::string> identifiers;
  /// (lesser, greater) pairs every generated row satisfies.
  std::vector<std::pair<std::string, std::string>> order_pairs;
  double min_category_freq = 0.0;
  std::vector<SyntheticClass> classes;
  std::uint64_t seed = 0;

  /// Throws ConfigError on inconsistent parameters.
  void validate() const;
};

SyntheticSpec synthetic_spec_from_json(const json& doc);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

struct SyntheticData {
  RawTable table;
  FeatureSchema schema;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace flowguard
