#include "flowguard/constraints.hpp"
#include "flowguard/synthetic.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace flowguard;

namespace {

SyntheticClass make_class(const std::string& name, std::size_t count, double shift) {
  SyntheticCluster k;
  k.numeric["minIAT"] = {0.0, 10.0 + shift, std::nullopt, std::nullopt};
  k.numeric["maxIAT"] = {0.0, 10.0 + shift, 5.0 + shift, 2.0};
  k.numeric["bytes"] = {0.0, 1000.0, std::nullopt, std::nullopt};
  k.categorical.push_back({{"proto", "port"}, {{{"tcp", "80"}, 3.0}, {{"udp", "53"}, 1.0}}});
  return {name, count, {k}};
}

SyntheticSpec four_class_spec(std::vector<std::size_t> counts) {
  SyntheticSpec spec;
  spec.numeric = {{"minIAT", 0}, {"maxIAT", 2}, {"bytes", 1}};
  spec.categorical = {"proto", "port"};
  spec.identifiers = {"src_ip"};
  spec.order_pairs = {{"minIAT", "maxIAT"}};
  spec.seed = 99;
  const std::vector<std::string> names{"Benign", "POAHPS", "DDoS", "C&C"};
  for (std::size_t i = 0; i < counts.size(); ++i) spec.classes.push_back(make_class(names[i], counts[i], 2.0 * i));
  return spec;
}

std::map<std::string, std::size_t> label_counts(const SyntheticData& d) {
  std::map<std::string, std::size_t> out;
  for (const auto& row : d.table.rows) ++out[row.back()];
  return out;
}

}  // namespace

TEST(Synthetic, SingleBenignClass) {
  const auto d = generate_synthetic(four_class_spec({5}));
  ASSERT_EQ(d.table.rows.size(), 5u);
  for (const auto& row : d.table.rows) EXPECT_EQ(row.back(), "Benign");
  EXPECT_EQ(d.schema.classes, (std::vector<std::string>{"Benign"}));
}

TEST(Synthetic, ImbalanceProfileCountsAreExact) {
  const auto d = generate_synthetic(four_class_spec({4712, 5396, 144, 67}));
  const auto counts = label_counts(d);
  EXPECT_EQ(counts.at("Benign"), 4712u);
  EXPECT_EQ(counts.at("POAHPS"), 5396u);
  EXPECT_EQ(counts.at("DDoS"), 144u);
  EXPECT_EQ(counts.at("C&C"), 67u);
  EXPECT_EQ(d.schema.classes, (std::vector<std::string>{"Benign", "POAHPS", "DDoS", "C&C"}));
  EXPECT_EQ(d.schema.find("src_ip")->kind, FeatureKind::drop);
  EXPECT_EQ(d.schema.find("port")->kind, FeatureKind::categorical);
  EXPECT_EQ(d.schema.find("maxIAT")->decimals, 2);
}

TEST(Synthetic, SeedDeterminesOutput) {
  const auto a = generate_synthetic(four_class_spec({50, 50}));
  const auto b = generate_synthetic(four_class_spec({50, 50}));
  EXPECT_EQ(a.table.rows, b.table.rows);
  auto spec = four_class_spec({50, 50});
  spec.seed = 100;
  EXPECT_NE(generate_synthetic(spec).table.rows, a.table.rows);
}

TEST(Synthetic, OrderConstraintsHoldOnHundredThousandRows) {
  // minIAT has no decimals while maxIAT has two: the projection has to floor.
  const auto d = generate_synthetic(four_class_spec({25000, 25000, 25000, 25000}));
  ASSERT_EQ(d.table.rows.size(), 100000u);
  const auto data = encode(type_table(d.table, d.schema), d.schema);
  const std::vector<DomainConstraint> domain{OrderPair{"minIAT", "maxIAT"}};
  const Validator validator(domain, derive_class_constraints(data, {{"proto", "port"}}));
  const auto lo = static_cast<Eigen::Index>(data.column_index("minIAT"));
  const auto hi = static_cast<Eigen::Index>(data.column_index("maxIAT"));
  std::size_t violations = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto row = data.values.row(static_cast<Eigen::Index>(r));
    if (data.labels[r] == data.benign) {
      violations += row(lo) > row(hi) ? 1 : 0;
    } else {
      violations += validator.is_valid(row, data.labels[r]) ? 0 : 1;
    }
  }
  EXPECT_EQ(violations, 0u);
}

TEST(Synthetic, ClustersMixByWeight) {
  auto spec = four_class_spec({20000});
  auto& cls = spec.classes[0];
  SyntheticCluster far = cls.clusters[0];
  far.numeric["bytes"] = {5000.0, 6000.0, std::nullopt, std::nullopt};
  cls.clusters[0].weight = 3.0;
  far.weight = 1.0;
  cls.clusters.push_back(far);
  const auto d = generate_synthetic(spec);
  const auto col = *d.table.column("bytes");
  std::size_t high = 0;
  for (const auto& row : d.table.rows) high += std::stod(row[col]) >= 5000.0 ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(high) / 20000.0, 0.25, 0.02);
}

TEST(Synthetic, TruncatedNormalStaysInBounds) {
  const auto d = generate_synthetic(four_class_spec({5000}));
  const auto col = *d.table.column("maxIAT");
  for (const auto& row : d.table.rows) {
    const double v = std::stod(row[col]);
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 10.0);
  }
}

TEST(Synthetic, InvalidSpecsRejected) {
  auto no_benign = four_class_spec({10, 10});
  no_benign.classes[0].name = "Other";
  EXPECT_THROW(no_benign.validate(), ConfigError);

  auto cycle = four_class_spec({10});
  cycle.order_pairs.push_back({"maxIAT", "minIAT"});
  EXPECT_THROW(cycle.validate(), ConfigError);

  auto unknown = four_class_spec({10});
  unknown.order_pairs.push_back({"minIAT", "nope"});
  EXPECT_THROW(unknown.validate(), ConfigError);

  auto missing = four_class_spec({10});
  missing.classes[0].clusters[0].numeric.erase("bytes");
  EXPECT_THROW(missing.validate(), ConfigError);

  auto uncovered = four_class_spec({10});
  uncovered.categorical.push_back("service");
  EXPECT_THROW(uncovered.validate(), ConfigError);

  auto duplicate = four_class_spec({10, 10});
  duplicate.classes[1].name = "Benign";
  EXPECT_THROW(duplicate.validate(), ConfigError);
}

TEST(Synthetic, JsonClustersOverrideSharedFields) {
  const json doc = json::parse(R"({
    "seed": 1,
    "numeric_features": [{"name": "a", "decimals": 1}],
    "categorical_features": ["p"],
    "classes": [
      {"name": "Benign", "count": 10, "numeric": {"a": {"lo": 0, "hi": 1}},
       "categorical": [{"features": ["p"], "combinations": [{"values": ["x"]}]}]},
      {"name": "A", "count": 10, "numeric": {"a": {"lo": 0, "hi": 1}},
       "categorical": [{"features": ["p"], "combinations": [{"values": ["y"]}]}],
       "clusters": [{"weight": 1}, {"weight": 2, "numeric": {"a": {"lo": 5, "hi": 6, "mean": 5.5, "sd": 0.1}}}]}
    ]})");
  const auto spec = synthetic_spec_from_json(doc);
  ASSERT_EQ(spec.classes[1].clusters.size(), 2u);
  EXPECT_EQ(spec.classes[1].clusters[0].numeric.at("a").hi, 1.0);
  EXPECT_EQ(spec.classes[1].clusters[1].numeric.at("a").lo, 5.0);
  EXPECT_EQ(*spec.classes[1].clusters[1].numeric.at("a").sd, 0.1);
  EXPECT_EQ(spec.classes[1].clusters[1].categorical.size(), 1u);
  EXPECT_THROW(synthetic_spec_from_json(json::parse(R"({"classes": []})")), ConfigError);
}

TEST(Synthetic, BundledBenchmarkSpecLoads) {
  const auto spec = load_synthetic_spec(std::string(BENCHMARK_DIR) + "/iot_synthetic.json");
  std::size_t total = 0;
  for (const auto& c : spec.classes) total += c.count;
  EXPECT_GT(total, 15000u);
  EXPECT_LT(total, 25000u);
  EXPECT_EQ(spec.classes.size(), 4u);
  EXPECT_EQ(spec.classes[0].name, spec.benign_label);
}
