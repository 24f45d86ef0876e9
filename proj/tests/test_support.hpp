#pragma once

// Builders shared by the unit tests and the acceptance runner.

#include "flowguard/constraints.hpp"
#include "flowguard/flowdata.hpp"
#include "flowguard/metrics.hpp"
#include "flowguard/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace flowguard::testing {

struct CategoricalDef {
  std::string name;
  std::vector<std::string> categories;  // without the reserved "other"
};

inline FeatureSchema make_schema(const std::vector<std::string>& numeric, const std::vector<CategoricalDef>& categorical,
                                 const std::vector<std::string>& classes, int decimals = 3) {
  FeatureSchema schema;
  schema.label_column = "label";
  schema.benign_label = classes.front();
  schema.classes = classes;
  for (const auto& n : numeric) schema.features.push_back({n, FeatureKind::numeric, {}, decimals});
  for (const auto& c : categorical) {
    FeatureSpec f{c.name, FeatureKind::categorical, c.categories, 0};
    f.categories.emplace_back(kOtherCategory);
    schema.features.push_back(std::move(f));
  }
  return schema;
}

/// Encodes typed rows; each row lists the numeric values, then the categorical ones.
inline EncodedDataset make_dataset(const FeatureSchema& schema, const std::vector<std::vector<RawValue>>& rows,
                                   const std::vector<std::string>& labels) {
  RawDataset raw;
  for (const auto& f : schema.features) {
    if (f.kind != FeatureKind::drop) raw.features.push_back(f.name);
  }
  raw.rows = rows;
  raw.labels = labels;
  return encode(raw, schema);
}

/// Numeric-only dataset with columns x0..x{d-1}; labels index `classes`.
inline EncodedDataset numeric_dataset(const Matrix& x, const std::vector<int>& labels,
                                      const std::vector<std::string>& classes) {
  EncodedDataset data;
  for (Eigen::Index c = 0; c < x.cols(); ++c) data.columns.push_back({"x" + std::to_string(c), "", false, 6});
  data.values = x;
  data.labels = labels;
  data.classes = classes;
  data.benign = 0;
  return data;
}

/// A random schema, dataset, domain and subset configuration.
struct RandomCase {
  FeatureSchema schema;
  EncodedDataset data;
  std::vector<DomainConstraint> domain;
  SubsetConfig subsets;
};

inline RandomCase random_case(Rng& rng) {
  RandomCase out;
  const std::size_t n_numeric = 1 + rng.below(5);
  const std::size_t n_categorical = rng.below(4);
  const std::size_t n_classes = 2 + rng.below(3);

  std::vector<std::string> numeric;
  for (std::size_t i = 0; i < n_numeric; ++i) numeric.push_back("n" + std::to_string(i));
  std::vector<CategoricalDef> categorical;
  for (std::size_t i = 0; i < n_categorical; ++i) {
    CategoricalDef def{"c" + std::to_string(i), {}};
    const std::size_t k = 2 + rng.below(3);
    for (std::size_t j = 0; j < k; ++j) def.categories.push_back("v" + std::to_string(j));
    categorical.push_back(std::move(def));
  }
  std::vector<std::string> classes{"Benign"};
  for (std::size_t c = 1; c < n_classes; ++c) classes.push_back("A" + std::to_string(c));
  const int decimals = static_cast<int>(rng.below(4));
  out.schema = make_schema(numeric, categorical, classes, decimals);

  // Per class: a numeric centre/spread and a favoured subset of categories.
  std::vector<std::vector<RawValue>> rows;
  std::vector<std::string> labels;
  const std::size_t n_rows = 10 + rng.below(60);
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::size_t cls = r < n_classes ? r : rng.below(n_classes);
    std::vector<RawValue> row;
    std::vector<double> values;
    for (std::size_t i = 0; i < n_numeric; ++i) {
      const double centre = 10.0 * static_cast<double>(cls + i);
      values.push_back(round_to_decimals(centre + rng.uniform(-5.0, 5.0) * (rng.uniform() < 0.2 ? 0.0 : 1.0), decimals));
    }
    if (n_numeric >= 2 && values[0] > values[1]) std::swap(values[0], values[1]);
    for (double v : values) row.emplace_back(v);
    for (const auto& def : categorical) {
      const std::size_t span = 1 + (cls + def.categories.size()) % def.categories.size();
      row.emplace_back(def.categories[rng.below(span)]);
    }
    rows.push_back(std::move(row));
    labels.push_back(classes[cls]);
  }
  out.data = make_dataset(out.schema, rows, labels);

  if (n_numeric >= 2) out.domain.push_back(OrderPair{"n0", "n1"});
  out.domain.push_back(ValueRange{numeric.back(), -1000.0, 1000.0});
  for (const auto& def : categorical) out.domain.push_back(OneHotExclusive{def.name});

  // Random disjoint subsets; some features may stay unperturbed.
  std::vector<std::string> shuffled = numeric;
  rng.shuffle(shuffled);
  std::vector<std::string> current;
  for (const auto& n : shuffled) {
    if (rng.uniform() < 0.15) continue;
    current.push_back(n);
    if (rng.uniform() < 0.5) {
      out.subsets.numeric.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) out.subsets.numeric.push_back(current);
  std::vector<std::string> cats;
  for (const auto& def : categorical) cats.push_back(def.name);
  rng.shuffle(cats);
  if (!cats.empty()) {
    const std::size_t cut = rng.below(cats.size() + 1);
    if (cut > 0) out.subsets.categorical.emplace_back(cats.begin(), cats.begin() + static_cast<std::ptrdiff_t>(cut));
    if (cut < cats.size()) out.subsets.categorical.emplace_back(cats.begin() + static_cast<std::ptrdiff_t>(cut), cats.end());
  }
  out.subsets.epsilon = 0.05 + 0.95 * rng.uniform();
  return out;
}

/// Rates recomputed straight from (truth, predicted) label pairs; NaN marks an undefined rate.
struct BruteMetrics {
  double accuracy, malicious_accuracy, macro_f1, fpr;
  std::vector<double> precision, recall;
};

inline BruteMetrics brute_metrics(const std::vector<int>& truth, const std::vector<int>& predicted, int classes,
                                  int benign) {
  const double nan = std::nan("");
  auto rate = [&](double num, double den) { return den > 0.0 ? num / den : nan; };
  BruteMetrics m{};
  double hit = 0.0, mal = 0.0, mal_hit = 0.0, ben = 0.0, ben_flagged = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    hit += truth[i] == predicted[i] ? 1.0 : 0.0;
    if (truth[i] == benign) {
      ben += 1.0;
      ben_flagged += predicted[i] != benign ? 1.0 : 0.0;
    } else {
      mal += 1.0;
      mal_hit += truth[i] == predicted[i] ? 1.0 : 0.0;
    }
  }
  m.accuracy = rate(hit, static_cast<double>(truth.size()));
  m.malicious_accuracy = rate(mal_hit, mal);
  m.fpr = rate(ben_flagged, ben);
  double f1_sum = 0.0, present = 0.0;
  for (int c = 0; c < classes; ++c) {
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == c && predicted[i] == c) tp += 1.0;
      if (truth[i] != c && predicted[i] == c) fp += 1.0;
      if (truth[i] == c && predicted[i] != c) fn += 1.0;
    }
    m.precision.push_back(rate(tp, tp + fp));
    m.recall.push_back(rate(tp, tp + fn));
    if (tp + fn == 0.0) continue;
    present += 1.0;
    const double p = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    const double r = tp / (tp + fn);
    f1_sum += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  m.macro_f1 = rate(f1_sum, present);
  return m;
}

/// True when an optional rate and a NaN-marked rate agree to `tol`.
inline bool same_rate(const std::optional<double>& got, double expected, double tol = 1e-12) {
  if (std::isnan(expected)) return !got.has_value();
  return got.has_value() && std::abs(*got - expected) <= tol;
}

/// Probability that a random positive outscores a random negative; ties count half.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels, int positive) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != positive) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == positive) continue;
      pairs += 1.0;
      wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  }
  return pairs > 0.0 ? wins / pairs : 0.0;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("flowguard_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace flowguard::testing
