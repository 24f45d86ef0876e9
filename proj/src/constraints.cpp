#include "flowguard/constraints.hpp"

#include <algorithm>
#include <cmath>

namespace flowguard {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

std::string constraint_id(const DomainConstraint& constraint) {
  return std::visit(overloaded{
                        [](const OrderPair& c) { return "order:" + c.lesser + "<=" + c.greater; },
                        [](const ValueRange& c) {
                          return "range:" + c.feature + "[" + format_double(c.min) + "," + format_double(c.max) + "]";
                        },
                        [](const OneHotExclusive& c) { return "one_hot:" + c.source; },
                    },
                    constraint);
}

json domain_constraint_to_json(const DomainConstraint& constraint) {
  return std::visit(overloaded{
                        [](const OrderPair& c) -> json {
                          return {{"type", "order"}, {"lesser", c.lesser}, {"greater", c.greater}};
                        },
                        [](const ValueRange& c) -> json {
                          return {{"type", "range"}, {"feature", c.feature}, {"min", c.min}, {"max", c.max}};
                        },
                        [](const OneHotExclusive& c) -> json { return {{"type", "one_hot"}, {"feature", c.source}}; },
                    },
                    constraint);
}

DomainConstraint domain_constraint_from_json(const json& doc) {
  try {
    const auto type = doc.at("type").get<std::string>();
    if (type == "order") return OrderPair{doc.at("lesser").get<std::string>(), doc.at("greater").get<std::string>()};
    if (type == "range") {
      ValueRange r{doc.at("feature").get<std::string>(), doc.at("min").get<double>(), doc.at("max").get<double>()};
      if (r.min > r.max) throw ConfigError("range constraint on '" + r.feature + "' has min > max");
      return r;
    }
    if (type == "one_hot") return OneHotExclusive{doc.at("feature").get<std::string>()};
    throw ConfigError("unknown constraint type '" + type + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("domain constraint: ") + e.what());
  }
}

std::vector<DomainConstraint> domain_constraints_from_json(const json& doc) {
  std::vector<DomainConstraint> out;
  for (const auto& item : doc) out.push_back(domain_constraint_from_json(item));
  return out;
}

json domain_constraints_to_json(const std::vector<DomainConstraint>& constraints) {
  json out = json::array();
  for (const auto& c : constraints) out.push_back(domain_constraint_to_json(c));
  return out;
}

std::size_t resolve_numeric(const std::vector<Column>& columns, std::string_view name) {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (!columns[i].one_hot && columns[i].source == name) return i;
  }
  throw ConfigError("'" + std::string(name) + "' is not a numeric feature of the dataset");
}

std::vector<OneHotGroup> resolve_groups(const std::vector<Column>& columns, const std::vector<std::string>& sources) {
  const auto groups = one_hot_groups(columns);
  std::vector<OneHotGroup> out;
  for (const auto& name : sources) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const OneHotGroup& g) { return g.source == name; });
    if (it == groups.end()) throw ConfigError("'" + name + "' is not a categorical feature of the dataset");
    out.push_back(*it);
  }
  return out;
}

Combination read_combination(RowRef sample, std::span<const OneHotGroup> groups) {
  Combination combo;
  combo.reserve(groups.size());
  for (const auto& g : groups) {
    int active = -1;
    int ones = 0;
    for (std::size_t k = 0; k < g.size; ++k) {
      const double v = sample(static_cast<Eigen::Index>(g.first + k));
      if (v == 1.0) {
        active = static_cast<int>(k);
        ++ones;
      } else if (v != 0.0) {
        ones = 2;
      }
    }
    combo.push_back(ones == 1 ? active : -1);
  }
  return combo;
}

ClassConstraintTable derive_class_constraints(const EncodedDataset& data,
                                              const std::vector<std::vector<std::string>>& categorical_subsets) {
  ClassConstraintTable table;
  table.columns = data.columns;
  table.classes = data.classes;
  table.benign = data.benign;
  table.subsets = categorical_subsets;
  for (std::size_t c = 0; c < data.columns.size(); ++c) {
    if (!data.columns[c].one_hot) table.numeric_columns.push_back(c);
  }
  std::vector<std::vector<OneHotGroup>> groups;
  for (const auto& subset : categorical_subsets) groups.push_back(resolve_groups(data.columns, subset));

  const auto counts = data.class_counts();
  for (std::size_t k = 0; k < data.classes.size(); ++k) {
    if (static_cast<int>(k) == data.benign) continue;
    if (counts[k] == 0) throw DataError("class '" + data.classes[k] + "' has no rows to derive constraints from");
    ClassConstraints cc;
    cc.bounds.assign(table.numeric_columns.size(),
                     {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
    cc.combinations.resize(groups.size());
    table.per_class.emplace(static_cast<int>(k), std::move(cc));
  }
  for (std::size_t r = 0; r < data.size(); ++r) {
    if (data.labels[r] == data.benign) continue;
    auto& cc = table.per_class.at(data.labels[r]);
    const auto row = data.values.row(static_cast<Eigen::Index>(r));
    for (std::size_t i = 0; i < table.numeric_columns.size(); ++i) {
      const double v = row(static_cast<Eigen::Index>(table.numeric_columns[i]));
      cc.bounds[i].lower = std::min(cc.bounds[i].lower, v);
      cc.bounds[i].upper = std::max(cc.bounds[i].upper, v);
    }
    for (std::size_t s = 0; s < groups.size(); ++s) cc.combinations[s].insert(read_combination(row, groups[s]));
  }
  return table;
}

json class_table_to_json(const ClassConstraintTable& table) {
  const auto groups = one_hot_groups(table.columns);
  json classes = json::object();
  for (const auto& [k, cc] : table.per_class) {
    json bounds = json::object();
    for (std::size_t i = 0; i < table.numeric_columns.size(); ++i) {
      bounds[table.columns[table.numeric_columns[i]].source] = {cc.bounds[i].lower, cc.bounds[i].upper};
    }
    json subsets = json::array();
    for (std::size_t s = 0; s < table.subsets.size(); ++s) {
      const auto resolved = resolve_groups(table.columns, table.subsets[s]);
      json combos = json::array();
      for (const auto& combo : cc.combinations[s]) {
        json names = json::array();
        for (std::size_t j = 0; j < combo.size(); ++j) {
          names.push_back(table.columns[resolved[j].first + static_cast<std::size_t>(combo[j])].category);
        }
        combos.push_back(std::move(names));
      }
      subsets.push_back({{"features", table.subsets[s]}, {"combinations", std::move(combos)}});
    }
    classes[table.classes[static_cast<std::size_t>(k)]] = {{"bounds", std::move(bounds)}, {"subsets", std::move(subsets)}};
  }
  json columns = json::array();
  for (const auto& c : table.columns) {
    columns.push_back({{"source", c.source}, {"category", c.category}, {"one_hot", c.one_hot}, {"decimals", c.decimals}});
  }
  return {{"columns", std::move(columns)},
          {"classes", table.classes},
          {"benign", table.benign},
          {"subsets", table.subsets},
          {"per_class", std::move(classes)}};
}

ClassConstraintTable class_table_from_json(const json& doc) {
  ClassConstraintTable table;
  try {
    for (const auto& c : doc.at("columns")) {
      table.columns.push_back({c.at("source").get<std::string>(), c.at("category").get<std::string>(),
                               c.at("one_hot").get<bool>(), c.at("decimals").get<int>()});
    }
    table.classes = doc.at("classes").get<std::vector<std::string>>();
    table.benign = doc.at("benign").get<int>();
    table.subsets = doc.at("subsets").get<std::vector<std::vector<std::string>>>();
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (!table.columns[c].one_hot) table.numeric_columns.push_back(c);
    }
    for (const auto& [name, entry] : doc.at("per_class").items()) {
      const auto it = std::find(table.classes.begin(), table.classes.end(), name);
      if (it == table.classes.end()) throw ConfigError("class table: unknown class '" + name + "'");
      ClassConstraints cc;
      for (std::size_t i : table.numeric_columns) {
        const auto& b = entry.at("bounds").at(table.columns[i].source);
        cc.bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
      }
      for (std::size_t s = 0; s < table.subsets.size(); ++s) {
        const auto resolved = resolve_groups(table.columns, table.subsets[s]);
        std::set<Combination> combos;
        for (const auto& names : entry.at("subsets").at(s).at("combinations")) {
          Combination combo;
          for (std::size_t j = 0; j < resolved.size(); ++j) {
            const auto category = names.at(j).get<std::string>();
            int offset = -1;
            for (std::size_t k = 0; k < resolved[j].size; ++k) {
              if (table.columns[resolved[j].first + k].category == category) offset = static_cast<int>(k);
            }
            if (offset < 0) throw ConfigError("class table: unknown category '" + category + "'");
            combo.push_back(offset);
          }
          combos.insert(std::move(combo));
        }
        cc.combinations.push_back(std::move(combos));
      }
      table.per_class.emplace(static_cast<int>(it - table.classes.begin()), std::move(cc));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("class table: ") + e.what());
  }
  return table;
}

Validator::Validator(std::vector<DomainConstraint> domain, ClassConstraintTable table, double tolerance)
    : domain_(std::move(domain)), table_(std::move(table)), tolerance_(tolerance) {
  groups_ = one_hot_groups(table_.columns);
  for (const auto& c : domain_) {
    if (const auto* order = std::get_if<OrderPair>(&c)) {
      if (order->lesser == order->greater) throw ConfigError("order constraint relates '" + order->lesser + "' to itself");
      orders_.push_back({resolve_numeric(table_.columns, order->lesser), resolve_numeric(table_.columns, order->greater),
                         constraint_id(c)});
    } else if (const auto* range = std::get_if<ValueRange>(&c)) {
      if (range->min > range->max) throw ConfigError("range constraint on '" + range->feature + "' has min > max");
      ranges_.push_back({resolve_numeric(table_.columns, range->feature), range->min, range->max, constraint_id(c)});
    } else if (const auto* one_hot = std::get_if<OneHotExclusive>(&c)) {
      resolve_groups(table_.columns, {one_hot->source});
    }
  }
  for (const auto& subset : table_.subsets) subsets_.push_back({resolve_groups(table_.columns, subset)});
}

ValidationResult Validator::check(RowRef sample, int class_index) const {
  if (class_index == table_.benign) throw DataError("benign samples are not validated against class constraints");
  auto it = table_.per_class.find(class_index);
  if (it == table_.per_class.end()) {
    throw DataError("no class constraints for class index " + std::to_string(class_index));
  }
  if (static_cast<std::size_t>(sample.size()) != table_.columns.size()) {
    throw DataError("sample has " + std::to_string(sample.size()) + " columns, layout has " +
                    std::to_string(table_.columns.size()));
  }
  const auto& cc = it->second;
  const std::string& class_name = table_.classes[static_cast<std::size_t>(class_index)];
  ValidationResult result;
  auto value = [&](std::size_t c) { return sample(static_cast<Eigen::Index>(c)); };

  for (const auto& g : groups_) {
    double sum = 0.0;
    bool binary = true;
    for (std::size_t k = 0; k < g.size; ++k) {
      const double v = value(g.first + k);
      sum += v;
      if (v != 0.0 && v != 1.0) binary = false;
    }
    if (!binary || sum != 1.0) {
      std::vector<double> values;
      for (std::size_t k = 0; k < g.size; ++k) values.push_back(value(g.first + k));
      result.violations.push_back({"one_hot:" + g.source, {g.source}, std::move(values)});
    }
  }
  for (const auto& r : ranges_) {
    const double v = value(r.column);
    if (!(v >= r.min - tolerance_ && v <= r.max + tolerance_)) {
      result.violations.push_back({r.id, {table_.columns[r.column].source}, {v}});
    }
  }
  for (const auto& o : orders_) {
    const double lesser = value(o.lesser);
    const double greater = value(o.greater);
    if (!(lesser <= greater + tolerance_)) {
      result.violations.push_back(
          {o.id, {table_.columns[o.lesser].source, table_.columns[o.greater].source}, {lesser, greater}});
    }
  }
  for (std::size_t i = 0; i < table_.numeric_columns.size(); ++i) {
    const std::size_t c = table_.numeric_columns[i];
    const double v = value(c);
    const auto& b = cc.bounds[i];
    if (!(v >= b.lower - tolerance_ && v <= b.upper + tolerance_)) {
      result.violations.push_back({"class_bound:" + class_name + ":" + table_.columns[c].source,
                                   {table_.columns[c].source},
                                   {v}});
    }
  }
  for (std::size_t s = 0; s < subsets_.size(); ++s) {
    const auto combo = read_combination(sample, subsets_[s].groups);
    if (!cc.combinations[s].contains(combo)) {
      std::vector<double> offsets(combo.begin(), combo.end());
      result.violations.push_back({"class_combination:" + class_name, table_.subsets[s], std::move(offsets)});
    }
  }
  return result;
}

ValidationResult Validator::check(RowRef sample, std::string_view class_name) const {
  const auto it = std::find(table_.classes.begin(), table_.classes.end(), class_name);
  if (it == table_.classes.end()) throw DataError("unknown class '" + std::string(class_name) + "'");
  return check(sample, static_cast<int>(it - table_.classes.begin()));
}

ValidationResult validate(RowRef sample, std::string_view class_name, const std::vector<DomainConstraint>& domain,
                          const ClassConstraintTable& table, double tolerance) {
  return Validator(domain, table, tolerance).check(sample, class_name);
}

}  // namespace flowguard
