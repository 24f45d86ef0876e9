#include "flowguard/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace flowguard {

namespace {

std::vector<OneHotGroup> groups_of(const CombinationPattern& pattern) {
  std::vector<OneHotGroup> groups;
  for (const auto& s : pattern.sources) groups.push_back({s.name, s.first, s.categories.size()});
  return groups;
}

bool has_room(const ClassPatternSequence& sequence) {
  for (const auto& p : sequence.patterns) {
    if (const auto* iv = std::get_if<IntervalPattern>(&p)) {
      for (const auto& f : iv->features) {
        if (f.max > f.min) return true;
      }
    } else if (std::get<CombinationPattern>(p).combinations.size() >= 2) {
      return true;
    }
  }
  return false;
}

double grid_step(int decimals) { return decimals <= 15 ? std::pow(10.0, -decimals) : 0.0; }

std::string hex(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

}  // namespace

SubsetConfig subset_config_from_json(const json& doc) {
  SubsetConfig config;
  try {
    config.numeric = doc.value("numeric_subsets", config.numeric);
    config.categorical = doc.value("categorical_subsets", config.categorical);
    config.epsilon = doc.value("epsilon", config.epsilon);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pattern subsets: ") + e.what());
  }
  if (!(config.epsilon > 0.0 && config.epsilon <= 1.0)) throw ConfigError("epsilon must lie in (0, 1]");
  return config;
}

json subset_config_to_json(const SubsetConfig& config) {
  return {{"numeric_subsets", config.numeric}, {"categorical_subsets", config.categorical}, {"epsilon", config.epsilon}};
}

PatternSet fit_patterns(const EncodedDataset& data, const SubsetConfig& config, std::string fitted_on) {
  if (!(config.epsilon > 0.0 && config.epsilon <= 1.0)) throw ConfigError("epsilon must lie in (0, 1]");
  std::set<std::string> seen;
  auto claim = [&](const std::string& name) {
    if (!seen.insert(name).second) throw ConfigError("feature '" + name + "' appears in more than one pattern subset");
  };
  struct NumericSubset {
    std::vector<std::size_t> columns;
  };
  std::vector<NumericSubset> numeric;
  for (const auto& subset : config.numeric) {
    if (subset.empty()) throw ConfigError("empty numeric pattern subset");
    NumericSubset ns;
    for (const auto& name : subset) {
      claim(name);
      ns.columns.push_back(resolve_numeric(data.columns, name));
    }
    numeric.push_back(std::move(ns));
  }
  std::vector<std::vector<OneHotGroup>> categorical;
  for (const auto& subset : config.categorical) {
    if (subset.empty()) throw ConfigError("empty categorical pattern subset");
    for (const auto& name : subset) claim(name);
    categorical.push_back(resolve_groups(data.columns, subset));
  }

  const auto counts = data.class_counts();
  const auto layout = layout_fingerprint(data.columns);
  PatternSet out;
  for (std::size_t k = 0; k < data.classes.size(); ++k) {
    if (static_cast<int>(k) == data.benign) continue;
    if (counts[k] == 0) throw DataError("class '" + data.classes[k] + "' has no rows to fit patterns on");
    ClassPatternSequence seq;
    seq.class_name = data.classes[k];
    seq.class_index = static_cast<int>(k);
    seq.fitted_on = fitted_on;
    seq.layout = layout;
    for (const auto& ns : numeric) {
      IntervalPattern p;
      p.epsilon = config.epsilon;
      for (std::size_t c : ns.columns) {
        p.features.push_back({data.columns[c].source, c, std::numeric_limits<double>::infinity(),
                              -std::numeric_limits<double>::infinity(), data.columns[c].decimals});
      }
      seq.patterns.emplace_back(std::move(p));
    }
    for (const auto& groups : categorical) {
      CombinationPattern p;
      for (const auto& g : groups) {
        CategoricalSource src{g.source, g.first, {}};
        for (std::size_t j = 0; j < g.size; ++j) src.categories.push_back(data.columns[g.first + j].category);
        p.sources.push_back(std::move(src));
      }
      seq.patterns.emplace_back(std::move(p));
    }
    out.emplace(seq.class_index, std::move(seq));
  }

  std::map<int, std::vector<std::set<Combination>>> combos;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const int y = data.labels[r];
    if (y == data.benign) continue;
    auto& seq = out.at(y);
    auto& seen_combos = combos[y];
    seen_combos.resize(categorical.size());
    const auto row = data.values.row(static_cast<Eigen::Index>(r));
    std::size_t ci = 0;
    for (auto& p : seq.patterns) {
      if (auto* iv = std::get_if<IntervalPattern>(&p)) {
        for (auto& f : iv->features) {
          const double v = row(static_cast<Eigen::Index>(f.column));
          f.min = std::min(f.min, v);
          f.max = std::max(f.max, v);
        }
      } else {
        seen_combos[ci].insert(read_combination(row, categorical[ci]));
        ++ci;
      }
    }
  }
  for (auto& [y, seq] : out) {
    std::size_t ci = 0;
    for (auto& p : seq.patterns) {
      if (auto* cp = std::get_if<CombinationPattern>(&p)) {
        const auto& found = combos[y][ci++];
        cp->combinations.assign(found.begin(), found.end());
      }
    }
  }
  return out;
}

ClassPatternSequence update_patterns(const ClassPatternSequence& sequence, const EncodedDataset& rows) {
  if (layout_fingerprint(rows.columns) != sequence.layout) {
    throw DataError("rows do not share the column layout the patterns were fitted on");
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& name = rows.classes[static_cast<std::size_t>(rows.labels[r])];
    if (name != sequence.class_name) {
      throw DataError("row " + std::to_string(r) + " has class '" + name + "', expected '" + sequence.class_name + "'");
    }
  }
  ClassPatternSequence out = sequence;
  for (auto& p : out.patterns) {
    if (auto* iv = std::get_if<IntervalPattern>(&p)) {
      for (auto& f : iv->features) {
        for (std::size_t r = 0; r < rows.size(); ++r) {
          const double v = rows.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f.column));
          f.min = std::min(f.min, v);
          f.max = std::max(f.max, v);
        }
      }
    } else {
      auto& cp = std::get<CombinationPattern>(p);
      const auto groups = groups_of(cp);
      std::set<Combination> merged(cp.combinations.begin(), cp.combinations.end());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        merged.insert(read_combination(rows.values.row(static_cast<Eigen::Index>(r)), groups));
      }
      cp.combinations.assign(merged.begin(), merged.end());
    }
  }
  return out;
}

json patterns_to_json(const PatternSet& patterns) {
  json classes = json::array();
  for (const auto& [k, seq] : patterns) {
    json items = json::array();
    for (const auto& p : seq.patterns) {
      if (const auto* iv = std::get_if<IntervalPattern>(&p)) {
        json features = json::array();
        for (const auto& f : iv->features) {
          features.push_back(
              {{"name", f.name}, {"column", f.column}, {"min", f.min}, {"max", f.max}, {"decimals", f.decimals}});
        }
        items.push_back({{"type", "interval"}, {"epsilon", iv->epsilon}, {"features", std::move(features)}});
      } else {
        const auto& cp = std::get<CombinationPattern>(p);
        json sources = json::array();
        for (const auto& s : cp.sources) {
          sources.push_back({{"name", s.name}, {"first", s.first}, {"categories", s.categories}});
        }
        json combos = json::array();
        for (const auto& combo : cp.combinations) {
          json names = json::array();
          for (std::size_t j = 0; j < combo.size(); ++j) {
            names.push_back(combo[j] >= 0 ? json(cp.sources[j].categories[static_cast<std::size_t>(combo[j])]) : json());
          }
          combos.push_back(std::move(names));
        }
        items.push_back({{"type", "combination"}, {"sources", std::move(sources)}, {"combinations", std::move(combos)}});
      }
    }
    classes.push_back({{"class", seq.class_name},
                       {"index", seq.class_index},
                       {"fitted_on", seq.fitted_on},
                       {"layout", hex(seq.layout)},
                       {"patterns", std::move(items)}});
  }
  return {{"format", "flowguard-patterns"}, {"version", 1}, {"classes", std::move(classes)}};
}

PatternSet patterns_from_json(const json& doc) {
  PatternSet out;
  try {
    if (doc.at("format") != "flowguard-patterns" || doc.at("version") != 1) {
      throw ConfigError("unsupported pattern document");
    }
    for (const auto& c : doc.at("classes")) {
      ClassPatternSequence seq;
      seq.class_name = c.at("class").get<std::string>();
      seq.class_index = c.at("index").get<int>();
      seq.fitted_on = c.at("fitted_on").get<std::string>();
      seq.layout = std::stoull(c.at("layout").get<std::string>(), nullptr, 16);
      for (const auto& item : c.at("patterns")) {
        if (item.at("type") == "interval") {
          IntervalPattern p;
          p.epsilon = item.at("epsilon").get<double>();
          for (const auto& f : item.at("features")) {
            p.features.push_back({f.at("name").get<std::string>(), f.at("column").get<std::size_t>(),
                                  f.at("min").get<double>(), f.at("max").get<double>(), f.at("decimals").get<int>()});
          }
          seq.patterns.emplace_back(std::move(p));
        } else {
          CombinationPattern p;
          for (const auto& s : item.at("sources")) {
            p.sources.push_back({s.at("name").get<std::string>(), s.at("first").get<std::size_t>(),
                                 s.at("categories").get<std::vector<std::string>>()});
          }
          for (const auto& names : item.at("combinations")) {
            Combination combo;
            for (std::size_t j = 0; j < p.sources.size(); ++j) {
              const auto& cats = p.sources[j].categories;
              if (names.at(j).is_null()) {
                combo.push_back(-1);
                continue;
              }
              const auto it = std::find(cats.begin(), cats.end(), names.at(j).get<std::string>());
              if (it == cats.end()) throw ConfigError("pattern combination names an unknown category");
              combo.push_back(static_cast<int>(it - cats.begin()));
            }
            p.combinations.push_back(std::move(combo));
          }
          std::sort(p.combinations.begin(), p.combinations.end());
          seq.patterns.emplace_back(std::move(p));
        }
      }
      out.emplace(seq.class_index, std::move(seq));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("patterns: ") + e.what());
  }
  return out;
}

Perturber::Perturber(const std::vector<Column>& columns, const std::vector<DomainConstraint>& domain)
    : layout_(layout_fingerprint(columns)) {
  for (const auto& c : domain) {
    if (const auto* order = std::get_if<OrderPair>(&c)) {
      orders_.emplace_back(resolve_numeric(columns, order->lesser), resolve_numeric(columns, order->greater));
    }
  }
}

void Perturber::repair_order(RowVector& row) const {
  // Projection only lowers values, so chains settle within one pass per pair.
  for (std::size_t pass = 0; pass <= orders_.size(); ++pass) {
    bool changed = false;
    for (const auto& [lesser, greater] : orders_) {
      const auto l = static_cast<Eigen::Index>(lesser);
      const auto g = static_cast<Eigen::Index>(greater);
      if (row(l) > row(g)) {
        row(l) = row(g);
        changed = true;
      }
    }
    if (!changed) break;
  }
}

void Perturber::apply(RowVector& row, const ClassPatternSequence& sequence, Rng& rng) const {
  for (const auto& p : sequence.patterns) {
    if (const auto* iv = std::get_if<IntervalPattern>(&p)) {
      for (const auto& f : iv->features) {
        const double width = f.max - f.min;
        if (!(width > 0.0)) continue;
        const auto c = static_cast<Eigen::Index>(f.column);
        const double u = rng.uniform(-1.0, 1.0);
        double v = std::clamp(row(c) + u * iv->epsilon * width, f.min, f.max);
        v = std::clamp(round_to_decimals(v, f.decimals), f.min, f.max);
        row(c) = v;
      }
    } else {
      const auto& cp = std::get<CombinationPattern>(p);
      const auto groups = groups_of(cp);
      const auto current = read_combination(row, groups);
      const auto it = std::lower_bound(cp.combinations.begin(), cp.combinations.end(), current);
      const bool present = it != cp.combinations.end() && *it == current;
      const std::size_t alternatives = cp.combinations.size() - (present ? 1 : 0);
      if (alternatives == 0) continue;
      std::size_t pick = rng.below(alternatives);
      const auto current_pos = static_cast<std::size_t>(it - cp.combinations.begin());
      if (present && pick >= current_pos) ++pick;
      const auto& chosen = cp.combinations[pick];
      for (std::size_t j = 0; j < groups.size(); ++j) {
        for (std::size_t k = 0; k < groups[j].size; ++k) row(static_cast<Eigen::Index>(groups[j].first + k)) = 0.0;
        if (chosen[j] >= 0) row(static_cast<Eigen::Index>(groups[j].first + static_cast<std::size_t>(chosen[j]))) = 1.0;
      }
    }
  }
  repair_order(row);
}

bool Perturber::nudge(RowVector& row, RowRef original, const ClassPatternSequence& sequence) const {
  for (const auto& p : sequence.patterns) {
    const auto* iv = std::get_if<IntervalPattern>(&p);
    if (!iv) continue;
    for (const auto& f : iv->features) {
      if (!(f.max > f.min)) continue;
      const auto c = static_cast<Eigen::Index>(f.column);
      double step = grid_step(f.decimals);
      if (!(step > 0.0) || step > f.max - f.min) step = f.max - f.min;
      for (const double direction : {-1.0, 1.0}) {
        RowVector candidate = original;
        candidate(c) = std::clamp(round_to_decimals(original(c) + direction * step, f.decimals), f.min, f.max);
        repair_order(candidate);
        if (candidate != original) {
          row = std::move(candidate);
          return true;
        }
      }
    }
  }
  return false;
}

RowVector Perturber::perturb(RowRef sample, const ClassPatternSequence& sequence, Rng& rng) const {
  if (sequence.layout != layout_) {
    throw DataError("pattern sequence for '" + sequence.class_name + "' was fitted on a different column layout");
  }
  RowVector row = sample;
  apply(row, sequence, rng);
  if (row != sample) return row;
  if (!has_room(sequence)) return row;
  for (int retry = 0; retry < 16; ++retry) {
    row = sample;
    apply(row, sequence, rng);
    if (row != sample) return row;
  }
  nudge(row, sample, sequence);
  return row;
}

RowVector Perturber::perturb(RowRef sample, int class_index, const PatternSet& patterns, Rng& rng) const {
  const auto it = patterns.find(class_index);
  if (it == patterns.end()) {
    throw DataError("no pattern sequence for class index " + std::to_string(class_index) +
                    " (benign rows are never perturbed)");
  }
  return perturb(sample, it->second, rng);
}

}  // namespace flowguard
