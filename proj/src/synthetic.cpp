#include "flowguard/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace flowguard {

namespace {

double sample(const NumericDist& d, double hi, Rng& rng) {
  const double lo = d.lo;
  if (hi <= lo) return lo;
  if (d.mean && d.sd && *d.sd > 0.0) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const double v = *d.mean + *d.sd * rng.normal();
      if (v >= lo && v <= hi) return v;
    }
  }
  return rng.uniform(lo, hi);
}

const WeightedCombination& pick(const CombinationTable& table, Rng& rng) {
  double total = 0.0;
  for (const auto& c : table.combinations) total += c.weight;
  double u = rng.uniform() * total;
  for (const auto& c : table.combinations) {
    if (u < c.weight) return c;
    u -= c.weight;
  }
  return table.combinations.back();
}

const SyntheticCluster& pick_cluster(const SyntheticClass& cls, Rng& rng) {
  double total = 0.0;
  for (const auto& k : cls.clusters) total += k.weight;
  double u = rng.uniform() * total;
  for (const auto& k : cls.clusters) {
    if (u < k.weight) return k;
    u -= k.weight;
  }
  return cls.clusters.back();
}

std::string address(Rng& rng) {
  return "10." + std::to_string(rng.below(256)) + "." + std::to_string(rng.below(256)) + "." +
         std::to_string(1 + rng.below(254));
}

// Numeric features ordered so that every "greater" side is drawn before its "lesser" side.
std::vector<std::size_t> draw_order(const SyntheticSpec& spec) {
  const std::size_t n = spec.numeric.size();
  auto index_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < n; ++i) {
      if (spec.numeric[i].name == name) return i;
    }
    throw ConfigError("order constraint references unknown numeric feature '" + name + "'");
  };
  std::vector<std::vector<std::size_t>> greaters(n);
  for (const auto& [lesser, greater] : spec.order_pairs) {
    const auto l = index_of(lesser);
    const auto g = index_of(greater);
    if (l == g) throw ConfigError("order constraint relates '" + lesser + "' to itself");
    greaters[l].push_back(g);
  }
  std::vector<std::size_t> order;
  std::vector<char> done(n, 0);
  while (order.size() < n) {
    bool progressed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) continue;
      if (std::all_of(greaters[i].begin(), greaters[i].end(), [&](std::size_t g) { return done[g] != 0; })) {
        done[i] = 1;
        order.push_back(i);
        progressed = true;
      }
    }
    if (!progressed) throw ConfigError("order constraints form a cycle");
  }
  return order;
}

SyntheticCluster parse_cluster(const json& doc, const SyntheticCluster& fallback) {
  SyntheticCluster k = fallback;
  k.weight = doc.value("weight", 1.0);
  const json numeric = doc.value("numeric", json::object());
  for (const auto& [name, d] : numeric.items()) {
    NumericDist dist;
    dist.lo = d.at("lo").get<double>();
    dist.hi = d.at("hi").get<double>();
    if (d.contains("mean")) dist.mean = d.at("mean").get<double>();
    if (d.contains("sd")) dist.sd = d.at("sd").get<double>();
    k.numeric[name] = dist;
  }
  if (doc.contains("categorical")) {
    k.categorical.clear();
    for (const auto& t : doc.at("categorical")) {
      CombinationTable table;
      table.features = t.at("features").get<std::vector<std::string>>();
      for (const auto& combo : t.at("combinations")) {
        table.combinations.push_back({combo.at("values").get<std::vector<std::string>>(), combo.value("weight", 1.0)});
      }
      k.categorical.push_back(std::move(table));
    }
  }
  return k;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (classes.empty()) throw ConfigError("synthetic spec declares no classes");
  draw_order(*this);
  std::set<std::string> names;
  bool has_benign = false;
  for (const auto& c : classes) {
    if (!names.insert(c.name).second) throw ConfigError("duplicate synthetic class '" + c.name + "'");
    if (c.name == benign_label) has_benign = true;
    if (c.count < 1) throw ConfigError("class '" + c.name + "' must have at least one row");
    if (c.clusters.empty()) throw ConfigError("class '" + c.name + "' has no clusters");
    for (const auto& k : c.clusters) {
      if (!(k.weight > 0.0)) throw ConfigError("class '" + c.name + "': cluster weight must be positive");
      for (const auto& f : numeric) {
        auto it = k.numeric.find(f.name);
        if (it == k.numeric.end()) throw ConfigError("class '" + c.name + "' has no distribution for '" + f.name + "'");
        if (it->second.lo > it->second.hi) {
          throw ConfigError("class '" + c.name + "': lo > hi for '" + f.name + "'");
        }
      }
      std::set<std::string> covered;
      for (const auto& table : k.categorical) {
        if (table.combinations.empty()) throw ConfigError("class '" + c.name + "': empty combination table");
        for (const auto& f : table.features) {
          if (std::find(categorical.begin(), categorical.end(), f) == categorical.end()) {
            throw ConfigError("class '" + c.name + "': unknown categorical feature '" + f + "'");
          }
          if (!covered.insert(f).second) throw ConfigError("class '" + c.name + "': '" + f + "' appears twice");
        }
        for (const auto& combo : table.combinations) {
          if (combo.values.size() != table.features.size()) {
            throw ConfigError("class '" + c.name + "': combination arity does not match its features");
          }
          if (!(combo.weight > 0.0)) throw ConfigError("class '" + c.name + "': combination weight must be positive");
        }
      }
      if (covered.size() != categorical.size()) {
        throw ConfigError("class '" + c.name + "' does not cover every categorical feature");
      }
      for (const auto& [lesser, greater] : order_pairs) {
        const auto& l = k.numeric.at(lesser);
        const auto& g = k.numeric.at(greater);
        if (l.lo > g.lo) {
          throw ConfigError("class '" + c.name + "': lower bound of '" + lesser + "' exceeds that of '" + greater +
                            "', violating the declared order");
        }
      }
    }
  }
  if (!has_benign) throw ConfigError("synthetic spec has no benign class '" + benign_label + "'");
}

SyntheticSpec synthetic_spec_from_json(const json& doc) {
  SyntheticSpec spec;
  try {
    spec.label_column = doc.value("label_column", spec.label_column);
    spec.benign_label = doc.value("benign_label", spec.benign_label);
    spec.min_category_freq = doc.value("min_category_freq", spec.min_category_freq);
    spec.seed = doc.value("seed", std::uint64_t{0});
    for (const auto& f : doc.at("numeric_features")) {
      spec.numeric.push_back({f.at("name").get<std::string>(), f.value("decimals", 3)});
    }
    spec.categorical = doc.value("categorical_features", std::vector<std::string>{});
    spec.identifiers = doc.value("identifier_features", std::vector<std::string>{});
    for (const auto& p : doc.value("order_constraints", json::array())) {
      spec.order_pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    }
    for (const auto& c : doc.at("classes")) {
      SyntheticClass cls;
      cls.name = c.at("name").get<std::string>();
      cls.count = c.at("count").get<std::size_t>();
      const SyntheticCluster shared = parse_cluster(c, SyntheticCluster{});
      if (c.contains("clusters")) {
        for (const auto& k : c.at("clusters")) cls.clusters.push_back(parse_cluster(k, shared));
      } else {
        cls.clusters.push_back(shared);
      }
      spec.classes.push_back(std::move(cls));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synthetic spec " + path.string());
  try {
    return synthetic_spec_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("synthetic spec " + path.string() + ": " + e.what());
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto order = draw_order(spec);
  std::vector<std::vector<std::size_t>> greaters(spec.numeric.size());
  for (const auto& [lesser, greater] : spec.order_pairs) {
    std::size_t l = 0, g = 0;
    for (std::size_t i = 0; i < spec.numeric.size(); ++i) {
      if (spec.numeric[i].name == lesser) l = i;
      if (spec.numeric[i].name == greater) g = i;
    }
    greaters[l].push_back(g);
  }

  SyntheticData out;
  auto& table = out.table;
  for (const auto& name : spec.identifiers) table.header.push_back(name);
  for (const auto& f : spec.numeric) table.header.push_back(f.name);
  for (const auto& name : spec.categorical) table.header.push_back(name);
  table.header.push_back(spec.label_column);

  const std::size_t id_offset = 0;
  const std::size_t num_offset = spec.identifiers.size();
  const std::size_t cat_offset = num_offset + spec.numeric.size();

  for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
    const auto& cls = spec.classes[ci];
    Rng rng(derive_seed(spec.seed, ci));
    for (std::size_t r = 0; r < cls.count; ++r) {
      const SyntheticCluster& cluster = cls.clusters.size() == 1 ? cls.clusters[0] : pick_cluster(cls, rng);
      std::vector<std::string> row(table.header.size());
      for (std::size_t i = 0; i < spec.identifiers.size(); ++i) row[id_offset + i] = address(rng);

      std::vector<double> values(spec.numeric.size(), 0.0);
      for (std::size_t i : order) {
        const auto& dist = cluster.numeric.at(spec.numeric[i].name);
        double hi = dist.hi;
        for (std::size_t g : greaters[i]) hi = std::min(hi, values[g]);
        values[i] = round_to_decimals(sample(dist, hi, rng), spec.numeric[i].decimals);
      }
      // Rounding is monotone per feature, but features may carry different
      // decimals; a final projection restores every declared order.
      for (std::size_t i : order) {
        for (std::size_t g : greaters[i]) {
          if (values[i] <= values[g]) continue;
          const double scale = std::pow(10.0, spec.numeric[i].decimals);
          double units = std::floor(values[g] * scale);
          if (units / scale > values[g]) units -= 1.0;
          values[i] = units / scale;
        }
      }
      for (std::size_t i = 0; i < spec.numeric.size(); ++i) {
        row[num_offset + i] = format_fixed(values[i], spec.numeric[i].decimals);
      }

      for (const auto& ct : cluster.categorical) {
        const auto& combo = pick(ct, rng);
        for (std::size_t k = 0; k < ct.features.size(); ++k) {
          const auto pos = std::find(spec.categorical.begin(), spec.categorical.end(), ct.features[k]) -
                           spec.categorical.begin();
          row[cat_offset + static_cast<std::size_t>(pos)] = combo.values[k];
        }
      }
      row.back() = cls.name;
      table.rows.push_back(std::move(row));
    }
  }
  Rng shuffler(derive_seed(spec.seed, 0xf10e));
  shuffler.shuffle(table.rows);

  InferOptions options;
  options.label_column = spec.label_column;
  options.benign_label = spec.benign_label;
  options.min_category_freq = spec.min_category_freq;
  options.drop = spec.identifiers;
  options.categorical = spec.categorical;
  out.schema = infer_schema(table, options);
  return out;
}

}  // namespace flowguard
