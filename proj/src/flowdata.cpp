#include "flowguard/flowdata.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace flowguard {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string quote_csv(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string join_first(const std::vector<std::string>& items, std::size_t limit) {
  std::string out;
  for (std::size_t i = 0; i < items.size() && i < limit; ++i) {
    if (i) out += "; ";
    out += items[i];
  }
  if (items.size() > limit) out += "; ... (" + std::to_string(items.size()) + " total)";
  return out;
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::numeric: return "numeric";
    case FeatureKind::categorical: return "categorical";
    case FeatureKind::drop: return "drop";
  }
  return "numeric";
}

FeatureKind feature_kind_from_string(std::string_view text) {
  if (text == "numeric") return FeatureKind::numeric;
  if (text == "categorical") return FeatureKind::categorical;
  if (text == "drop") return FeatureKind::drop;
  throw ConfigError("unknown feature kind '" + std::string(text) + "'");
}

void FeatureSchema::validate() const {
  if (label_column.empty()) throw ConfigError("schema: label column is empty");
  std::set<std::string_view> names;
  for (const auto& f : features) {
    if (f.name.empty()) throw ConfigError("schema: feature with empty name");
    if (!names.insert(f.name).second) throw ConfigError("schema: duplicate feature '" + f.name + "'");
    if (f.name == label_column) throw ConfigError("schema: label column '" + f.name + "' listed as a feature");
    if (f.kind == FeatureKind::categorical) {
      if (f.categories.empty()) throw ConfigError("schema: categorical feature '" + f.name + "' has no categories");
      std::set<std::string_view> seen(f.categories.begin(), f.categories.end());
      if (seen.size() != f.categories.size()) {
        throw ConfigError("schema: duplicate category in '" + f.name + "'");
      }
    }
    if (f.kind == FeatureKind::numeric && f.decimals < 0) {
      throw ConfigError("schema: negative decimals for '" + f.name + "'");
    }
  }
  if (std::find(classes.begin(), classes.end(), benign_label) == classes.end()) {
    throw ConfigError("schema: benign label '" + benign_label + "' is not a known class");
  }
  std::set<std::string_view> class_names(classes.begin(), classes.end());
  if (class_names.size() != classes.size()) throw ConfigError("schema: duplicate class name");
}

const FeatureSpec* FeatureSchema::find(std::string_view name) const {
  for (const auto& f : features) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

json schema_to_json(const FeatureSchema& schema) {
  json features = json::array();
  for (const auto& f : schema.features) {
    json item = {{"name", f.name}, {"kind", to_string(f.kind)}};
    if (f.kind == FeatureKind::categorical) item["categories"] = f.categories;
    if (f.kind == FeatureKind::numeric) item["decimals"] = f.decimals;
    features.push_back(std::move(item));
  }
  return {{"features", features},
          {"label_column", schema.label_column},
          {"benign_label", schema.benign_label},
          {"classes", schema.classes}};
}

FeatureSchema schema_from_json(const json& doc) {
  FeatureSchema schema;
  try {
    for (const auto& item : doc.at("features")) {
      FeatureSpec f;
      f.name = item.at("name").get<std::string>();
      f.kind = feature_kind_from_string(item.at("kind").get<std::string>());
      if (f.kind == FeatureKind::categorical) f.categories = item.at("categories").get<std::vector<std::string>>();
      if (f.kind == FeatureKind::numeric) f.decimals = item.value("decimals", 0);
      schema.features.push_back(std::move(f));
    }
    schema.label_column = doc.at("label_column").get<std::string>();
    schema.benign_label = doc.at("benign_label").get<std::string>();
    schema.classes = doc.at("classes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schema: ") + e.what());
  }
  schema.validate();
  return schema;
}

FeatureSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema " + path.string());
  try {
    return schema_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("schema " + path.string() + ": " + e.what());
  }
}

void save_schema(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ofstream out(path);
  out << schema_to_json(schema).dump(2) << '\n';
}

std::optional<std::size_t> RawTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

RawTable parse_csv_table(std::string_view text) {
  RawTable table;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw DataError("CSV has no header row");
  return table;
}

RawTable read_csv_table(const std::filesystem::path& path) { return parse_csv_table(read_file(path)); }

void write_csv_table(const std::filesystem::path& path, const RawTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  auto write_row = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << quote_csv(row[i]);
    }
    out << '\n';
  };
  write_row(table.header);
  for (const auto& row : table.rows) write_row(row);
}

RawDataset type_table(const RawTable& table, const FeatureSchema& schema) {
  std::vector<std::string> expected;
  for (const auto& f : schema.features) expected.push_back(f.name);
  expected.push_back(schema.label_column);
  for (const auto& name : expected) {
    if (!table.column(name)) throw SchemaMismatchError("missing column '" + name + "'");
  }
  for (const auto& name : table.header) {
    if (std::find(expected.begin(), expected.end(), name) == expected.end()) {
      throw SchemaMismatchError("unexpected column '" + name + "'");
    }
  }

  RawDataset raw;
  std::vector<std::pair<std::size_t, const FeatureSpec*>> kept;
  for (const auto& f : schema.features) {
    if (f.kind == FeatureKind::drop) continue;
    kept.emplace_back(*table.column(f.name), &f);
    raw.features.push_back(f.name);
  }
  const std::size_t label_col = *table.column(schema.label_column);
  std::set<std::string_view> classes(schema.classes.begin(), schema.classes.end());

  std::vector<std::string> problems;
  raw.rows.reserve(table.rows.size());
  raw.labels.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    std::vector<RawValue> row;
    row.reserve(kept.size());
    std::string issue;
    for (const auto& [col, spec] : kept) {
      const std::string& cell = cells[col];
      if (cell.empty()) {
        issue = "empty cell in '" + spec->name + "'";
        break;
      }
      if (spec->kind == FeatureKind::numeric) {
        double v = 0.0;
        if (!parse_double(cell, v)) {
          issue = "non-numeric '" + cell + "' in '" + spec->name + "'";
          break;
        }
        row.emplace_back(v);
      } else {
        row.emplace_back(cell);
      }
    }
    if (issue.empty()) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c].empty()) {
          issue = "empty cell in '" + table.header[c] + "'";
          break;
        }
      }
    }
    if (issue.empty() && !classes.contains(cells[label_col])) {
      issue = "unknown class '" + cells[label_col] + "'";
    }
    if (!issue.empty()) {
      problems.push_back("row " + std::to_string(r) + ": " + issue);
      continue;
    }
    raw.rows.push_back(std::move(row));
    raw.labels.push_back(cells[label_col]);
  }
  if (!problems.empty()) throw ParseError("failed to parse dataset: " + join_first(problems, 10));
  return raw;
}

RawDataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  return type_table(read_csv_table(path), schema);
}

int count_decimals(std::string_view text) {
  int exponent = 0;
  const auto e = text.find_first_of("eE");
  if (e != std::string_view::npos) {
    std::string exp(text.substr(e + 1));
    exponent = std::atoi(exp.c_str());
    text = text.substr(0, e);
  }
  int digits = 0;
  const auto dot = text.find('.');
  if (dot != std::string_view::npos) digits = static_cast<int>(text.size() - dot - 1);
  return std::max(0, digits - exponent);
}

FeatureSchema infer_schema(const RawTable& table, const InferOptions& options) {
  if (table.rows.empty()) throw DataError("cannot infer a schema from an empty table");
  if (options.min_category_freq < 0.0 || options.min_category_freq >= 1.0) {
    throw ConfigError("min_category_freq must lie in [0, 1)");
  }
  const auto label_col = table.column(options.label_column);
  if (!label_col) throw SchemaMismatchError("missing column '" + options.label_column + "'");
  auto listed = [](const std::vector<std::string>& list, const std::string& name) {
    return std::find(list.begin(), list.end(), name) != list.end();
  };
  const double n = static_cast<double>(table.rows.size());

  FeatureSchema schema;
  schema.label_column = options.label_column;
  schema.benign_label = options.benign_label;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == *label_col) continue;
    FeatureSpec spec;
    spec.name = table.header[c];
    if (listed(options.drop, spec.name)) {
      spec.kind = FeatureKind::drop;
      schema.features.push_back(std::move(spec));
      continue;
    }
    std::size_t numeric = 0;
    int decimals = 0;
    std::map<std::string, std::size_t> counts;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const std::string& cell = table.rows[r][c];
      if (cell.empty()) throw ParseError("row " + std::to_string(r) + ": empty cell in '" + spec.name + "'");
      double v = 0.0;
      if (parse_double(cell, v)) {
        ++numeric;
        decimals = std::max(decimals, count_decimals(cell));
      }
      ++counts[cell];
    }
    const bool forced = listed(options.categorical, spec.name);
    if (!forced && numeric == table.rows.size()) {
      spec.kind = FeatureKind::numeric;
      spec.decimals = decimals;
    } else if (forced || numeric == 0) {
      spec.kind = FeatureKind::categorical;
      std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
      // map iteration is lexicographic, so a stable sort by count keeps lexicographic ties.
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) { return a.second > b.second; });
      for (const auto& [value, count] : ranked) {
        if (static_cast<double>(count) / n >= options.min_category_freq && value != kOtherCategory) {
          spec.categories.push_back(value);
        }
      }
      spec.categories.emplace_back(kOtherCategory);
    } else {
      throw DataError("column '" + spec.name + "' mixes numeric and text values (" + std::to_string(numeric) +
                      " of " + std::to_string(table.rows.size()) + " numeric)");
    }
    schema.features.push_back(std::move(spec));
  }

  std::map<std::string, std::size_t> class_counts;
  for (const auto& row : table.rows) ++class_counts[row[*label_col]];
  if (!class_counts.contains(options.benign_label)) {
    throw DataError("benign label '" + options.benign_label + "' does not occur in the data");
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(class_counts.begin(), class_counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  schema.classes.push_back(options.benign_label);
  for (const auto& [name, count] : ranked) {
    if (name != options.benign_label) schema.classes.push_back(name);
  }
  schema.validate();
  return schema;
}

std::vector<Column> encoded_layout(const FeatureSchema& schema) {
  std::vector<Column> columns;
  for (const auto& f : schema.features) {
    if (f.kind == FeatureKind::numeric) {
      columns.push_back({f.name, "", false, f.decimals});
    } else if (f.kind == FeatureKind::categorical) {
      for (const auto& c : f.categories) columns.push_back({f.name, c, true, 0});
    }
  }
  return columns;
}

std::vector<OneHotGroup> one_hot_groups(const std::vector<Column>& columns) {
  std::vector<OneHotGroup> groups;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (!columns[i].one_hot) continue;
    if (!groups.empty() && groups.back().source == columns[i].source && groups.back().first + groups.back().size == i) {
      ++groups.back().size;
    } else {
      groups.push_back({columns[i].source, i, 1});
    }
  }
  return groups;
}

std::uint64_t layout_fingerprint(const std::vector<Column>& columns) {
  std::uint64_t h = fnv1a("layout");
  for (const auto& c : columns) {
    h = fnv1a(c.name(), h);
    h = fnv1a("\x1f", h);
  }
  return h;
}

std::vector<std::size_t> EncodedDataset::class_counts() const {
  std::vector<std::size_t> counts(classes.size(), 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

int EncodedDataset::class_index(std::string_view name) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int EncodedDataset::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name() == name) return static_cast<int>(i);
  }
  return -1;
}

std::size_t EncodedDataset::malicious_count() const {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [&](int y) { return y != benign; }));
}

EncodedDataset encode(const RawDataset& raw, const FeatureSchema& schema) {
  EncodedDataset out;
  out.columns = encoded_layout(schema);
  out.classes = schema.classes;
  out.benign = out.class_index(schema.benign_label);

  struct Slot {
    const FeatureSpec* spec;
    std::size_t column;
    std::unordered_map<std::string, std::size_t> offsets;
  };
  std::vector<Slot> slots;
  std::size_t next_column = 0;
  for (const auto& f : schema.features) {
    if (f.kind == FeatureKind::drop) continue;
    Slot slot{&f, next_column, {}};
    if (f.kind == FeatureKind::categorical) {
      for (std::size_t k = 0; k < f.categories.size(); ++k) slot.offsets.emplace(f.categories[k], k);
      next_column += f.categories.size();
    } else {
      next_column += 1;
    }
    slots.push_back(std::move(slot));
  }
  if (raw.features.size() != slots.size()) throw SchemaMismatchError("raw dataset does not match schema");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (raw.features[i] != slots[i].spec->name) {
      throw SchemaMismatchError("raw feature '" + raw.features[i] + "' does not match schema order");
    }
  }

  out.values = Matrix::Zero(static_cast<Eigen::Index>(raw.rows.size()), static_cast<Eigen::Index>(out.columns.size()));
  out.labels.reserve(raw.rows.size());
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& row = raw.rows[r];
    const auto ri = static_cast<Eigen::Index>(r);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& slot = slots[i];
      if (slot.spec->kind == FeatureKind::numeric) {
        const double* v = std::get_if<double>(&row[i]);
        if (!v) throw DataError("row " + std::to_string(r) + ": '" + slot.spec->name + "' is not numeric");
        out.values(ri, static_cast<Eigen::Index>(slot.column)) = *v;
      } else {
        const std::string* v = std::get_if<std::string>(&row[i]);
        if (!v) throw DataError("row " + std::to_string(r) + ": '" + slot.spec->name + "' is not categorical");
        auto it = slot.offsets.find(*v);
        const std::size_t offset = it != slot.offsets.end() ? it->second : slot.offsets.at(std::string(kOtherCategory));
        out.values(ri, static_cast<Eigen::Index>(slot.column + offset)) = 1.0;
      }
    }
    const int y = out.class_index(raw.labels[r]);
    if (y < 0) throw DataError("row " + std::to_string(r) + ": unknown class '" + raw.labels[r] + "'");
    out.labels.push_back(y);
  }
  return out;
}

RawDataset decode(const EncodedDataset& data, const FeatureSchema& schema) {
  RawDataset raw;
  for (const auto& f : schema.features) {
    if (f.kind != FeatureKind::drop) raw.features.push_back(f.name);
  }
  const auto groups = one_hot_groups(data.columns);
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    std::vector<RawValue> row;
    std::size_t g = 0;
    for (std::size_t c = 0; c < data.columns.size();) {
      if (!data.columns[c].one_hot) {
        row.emplace_back(data.values(ri, static_cast<Eigen::Index>(c)));
        ++c;
        continue;
      }
      const auto& group = groups[g++];
      std::string value(kOtherCategory);
      for (std::size_t k = 0; k < group.size; ++k) {
        if (data.values(ri, static_cast<Eigen::Index>(group.first + k)) == 1.0) {
          value = data.columns[group.first + k].category;
          break;
        }
      }
      row.emplace_back(std::move(value));
      c = group.first + group.size;
    }
    raw.rows.push_back(std::move(row));
    raw.labels.push_back(data.classes[static_cast<std::size_t>(data.labels[r])]);
  }
  return raw;
}

EncodedDataset to_binary(const EncodedDataset& data) {
  EncodedDataset out;
  out.columns = data.columns;
  out.values = data.values;
  out.classes = {data.benign_label(), std::string(kMaliciousLabel)};
  out.benign = 0;
  out.labels.reserve(data.size());
  for (int y : data.labels) out.labels.push_back(y == data.benign ? 0 : 1);
  return out;
}

EncodedDataset select_rows(const EncodedDataset& data, std::span<const std::size_t> rows) {
  EncodedDataset out;
  out.columns = data.columns;
  out.classes = data.classes;
  out.benign = data.benign;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), data.values.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = data.values.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(data.labels[rows[i]]);
  }
  return out;
}

EncodedDataset concat_rows(const EncodedDataset& first, const EncodedDataset& second) {
  if (first.columns != second.columns || first.classes != second.classes) {
    throw DataError("cannot concatenate datasets with different layouts");
  }
  EncodedDataset out;
  out.columns = first.columns;
  out.classes = first.classes;
  out.benign = first.benign;
  out.values.resize(first.values.rows() + second.values.rows(), first.values.cols());
  out.values.topRows(first.values.rows()) = first.values;
  out.values.bottomRows(second.values.rows()) = second.values;
  out.labels = first.labels;
  out.labels.insert(out.labels.end(), second.labels.begin(), second.labels.end());
  return out;
}

std::vector<std::size_t> largest_remainder(std::span<const std::size_t> counts, double ratio) {
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  const auto target = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(total) + 0.5));
  std::vector<std::size_t> alloc(counts.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double exact = ratio * static_cast<double>(counts[c]);
    alloc[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += alloc[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i) {
    const std::size_t c = remainders[i].second;
    if (remainders[i].first <= 0.0 || alloc[c] >= counts[c]) continue;
    ++alloc[c];
    ++assigned;
  }
  return alloc;
}

SplitPair stratified_split(const EncodedDataset& data, double ratio, std::uint64_t seed) {
  if (data.size() == 0) throw DataError("cannot split an empty dataset");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  const auto counts = data.class_counts();
  const auto alloc = largest_remainder(counts, ratio);

  std::vector<std::vector<std::size_t>> members(data.classes.size());
  for (std::size_t r = 0; r < data.size(); ++r) members[static_cast<std::size_t>(data.labels[r])].push_back(r);

  std::vector<char> in_train(data.size(), 0);
  for (std::size_t c = 0; c < members.size(); ++c) {
    Rng rng(derive_seed(seed, c));
    rng.shuffle(members[c]);
    for (std::size_t i = 0; i < alloc[c]; ++i) in_train[members[c][i]] = 1;
  }

  SplitPair split;
  split.ratio = ratio;
  split.seed = seed;
  for (std::size_t r = 0; r < data.size(); ++r) (in_train[r] ? split.train_rows : split.holdout_rows).push_back(r);
  split.train = select_rows(data, split.train_rows);
  split.holdout = select_rows(data, split.holdout_rows);
  return split;
}

void write_encoded_csv(const std::filesystem::path& path, const EncodedDataset& data, std::string_view label_column) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& c : data.columns) out << quote_csv(c.name()) << ',';
  out << quote_csv(label_column) << '\n';
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    for (std::size_t c = 0; c < data.columns.size(); ++c) {
      out << format_double(data.values(ri, static_cast<Eigen::Index>(c))) << ',';
    }
    out << quote_csv(data.classes[static_cast<std::size_t>(data.labels[r])]) << '\n';
  }
}

EncodedDataset read_encoded_csv(const std::filesystem::path& path, const FeatureSchema& schema, bool binary) {
  const RawTable table = read_csv_table(path);
  EncodedDataset out;
  out.columns = encoded_layout(schema);
  out.classes = schema.classes;
  out.benign = out.class_index(schema.benign_label);
  if (binary) {
    out.classes = {schema.benign_label, std::string(kMaliciousLabel)};
    out.benign = 0;
  }

  if (table.header.size() != out.columns.size() + 1) {
    throw SchemaMismatchError("encoded CSV has " + std::to_string(table.header.size()) + " columns, schema expects " +
                              std::to_string(out.columns.size() + 1));
  }
  for (std::size_t c = 0; c < out.columns.size(); ++c) {
    if (table.header[c] != out.columns[c].name()) {
      throw SchemaMismatchError("encoded column " + std::to_string(c) + " is '" + table.header[c] + "', expected '" +
                                out.columns[c].name() + "'");
    }
  }
  if (table.header.back() != schema.label_column) {
    throw SchemaMismatchError("missing column '" + schema.label_column + "'");
  }
  out.values.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(out.columns.size()));
  std::vector<std::string> problems;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    for (std::size_t c = 0; c < out.columns.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        problems.push_back("row " + std::to_string(r) + ": bad value '" + cells[c] + "' in '" + table.header[c] + "'");
        break;
      }
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
    int y = out.class_index(cells.back());
    if (y < 0 && binary && std::find(schema.classes.begin(), schema.classes.end(), cells.back()) != schema.classes.end()) {
      y = 1;
    }
    if (y < 0) problems.push_back("row " + std::to_string(r) + ": unknown class '" + cells.back() + "'");
    out.labels.push_back(y);
  }
  if (!problems.empty()) throw ParseError("failed to parse encoded dataset: " + join_first(problems, 10));
  return out;
}

}  // namespace flowguard
