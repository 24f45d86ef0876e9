#pragma once

#include "flowguard/common.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace flowguard {

using json = nlohmann::json;

/// Reserved category that absorbs rare and unseen values.
inline constexpr std::string_view kOtherCategory = "other";
/// Class name used when all attack classes are merged for binary detection.
inline constexpr std::string_view kMaliciousLabel = "Malicious";

class SchemaMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

enum class FeatureKind { numeric, categorical, drop };

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view text);

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  /// Categorical only; ends with the reserved "other" category.
  std::vector<std::string> categories;
  /// Numeric only; observed decimal granularity.
  int decimals = 0;
};

struct FeatureSchema {
  std::vector<FeatureSpec> features;
  std::string label_column;
  std::string benign_label;
  /// Class order used for tie-breaking everywhere; benign first.
  std::vector<std::string> classes;

  /// Throws ConfigError when an invariant is broken.
  void validate() const;
  const FeatureSpec* find(std::string_view name) const;
};

json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const json& doc);
FeatureSchema load_schema(const std::filesystem::path& path);
void save_schema(const std::filesystem::path& path, const FeatureSchema& schema);

/// Untyped CSV contents.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

RawTable read_csv_table(const std::filesystem::path& path);
RawTable parse_csv_table(std::string_view text);
void write_csv_table(const std::filesystem::path& path, const RawTable& table);
std::vector<std::string> split_csv_line(std::string_view line);

using RawValue = std::variant<double, std::string>;

/// Typed rows of the non-dropped schema features, in schema order.
struct RawDataset {
  std::vector<std::string> features;
  std::vector<std::vector<RawValue>> rows;
  std::vector<std::string> labels;
};

/// Loads a CSV and types it against `schema`. Dropped columns are discarded.
RawDataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema);
RawDataset type_table(const RawTable& table, const FeatureSchema& schema);

struct InferOptions {
  std::string label_column = "label";
  std::string benign_label = "Benign";
  /// Categories rarer than this fraction fold into "other".
  double min_category_freq = 0.01;
  std::vector<std::string> drop;
  /// Columns treated as categorical even when every value parses as a number.
  std::vector<std::string> categorical;
};

FeatureSchema infer_schema(const RawTable& table, const InferOptions& options);

/// Number of digits after the decimal point, accounting for exponents.
int count_decimals(std::string_view text);

/// One encoded column: a numeric feature, or one category of a one-hot group.
struct Column {
  std::string source;
  std::string category;
  bool one_hot = false;
  int decimals = 0;

  std::string name() const { return one_hot ? source + "=" + category : source; }
  bool operator==(const Column&) const = default;
};

struct OneHotGroup {
  std::string source;
  std::size_t first = 0;
  std::size_t size = 0;
};

std::vector<Column> encoded_layout(const FeatureSchema& schema);
std::vector<OneHotGroup> one_hot_groups(const std::vector<Column>& columns);
std::uint64_t layout_fingerprint(const std::vector<Column>& columns);

struct EncodedDataset {
  std::vector<Column> columns;
  Matrix values;
  std::vector<int> labels;
  std::vector<std::string> classes;
  int benign = 0;

  std::size_t size() const { return labels.size(); }
  std::vector<std::size_t> class_counts() const;
  /// Index of `name` in `classes`, or -1.
  int class_index(std::string_view name) const;
  int column_index(std::string_view name) const;
  std::size_t malicious_count() const;
  const std::string& benign_label() const { return classes[static_cast<std::size_t>(benign)]; }
  bool is_binary() const { return classes.size() == 2; }
};

EncodedDataset encode(const RawDataset& raw, const FeatureSchema& schema);
/// Inverse of encode, up to "other" aggregation.
RawDataset decode(const EncodedDataset& data, const FeatureSchema& schema);

/// Merges every non-benign class into a single malicious class.
EncodedDataset to_binary(const EncodedDataset& data);
EncodedDataset select_rows(const EncodedDataset& data, std::span<const std::size_t> rows);
EncodedDataset concat_rows(const EncodedDataset& first, const EncodedDataset& second);

struct SplitPair {
  EncodedDataset train;
  EncodedDataset holdout;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> holdout_rows;
  double ratio = 0.7;
  std::uint64_t seed = 0;
};

/// Per-class largest-remainder allocation; members picked by a seeded shuffle.
SplitPair stratified_split(const EncodedDataset& data, double ratio, std::uint64_t seed);
/// Per-class train counts used by stratified_split.
std::vector<std::size_t> largest_remainder(std::span<const std::size_t> counts, double ratio);

/// Encoded CSV: numeric columns by feature name, one-hot columns as "feature=category".
void write_encoded_csv(const std::filesystem::path& path, const EncodedDataset& data,
                       std::string_view label_column);
EncodedDataset read_encoded_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                                bool binary);

}  // namespace flowguard
