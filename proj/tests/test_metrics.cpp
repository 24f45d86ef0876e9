#include "flowguard/metrics.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace flowguard;
using namespace flowguard::testing;

namespace {

const std::vector<std::string> kTwo{"Benign", "DoS"};

ConfusionMatrix from_pairs(const std::vector<std::pair<int, int>>& pairs, const std::vector<std::string>& classes) {
  std::vector<int> t, p;
  for (const auto& [a, b] : pairs) {
    t.push_back(a);
    p.push_back(b);
  }
  return confusion(t, p, classes);
}

}  // namespace

TEST(Confusion, Counts) {
  const std::vector<std::string> truth{"A", "A", "B"}, pred{"A", "B", "B"};
  const auto cm = confusion(truth, pred, {"A", "B"});
  EXPECT_EQ(cm.counts, (std::vector<std::vector<std::size_t>>{{1, 1}, {0, 1}}));
  const auto empty = confusion(std::vector<std::string>{}, std::vector<std::string>{}, {"A", "B"});
  EXPECT_EQ(empty.total(), 0u);
  EXPECT_EQ(empty.counts, (std::vector<std::vector<std::size_t>>{{0, 0}, {0, 0}}));
  const std::vector<std::string> bad{"C"};
  EXPECT_ANY_THROW(confusion(bad, bad, {"A", "B"}));
  EXPECT_ANY_THROW(confusion(truth, bad, {"A", "B"}));
}

TEST(MaliciousAccuracy, WorkedValues) {
  // Three true positives, two misses: 3/5.
  const auto cm = from_pairs({{1, 1}, {1, 1}, {1, 1}, {1, 0}, {1, 0}, {0, 1}}, kTwo);
  EXPECT_DOUBLE_EQ(*accuracy_malicious_only(cm, "Benign"), 0.6);
  std::vector<std::pair<int, int>> dos;
  for (int i = 0; i < 10; ++i) dos.push_back({1, i < 7 ? 1 : 0});
  for (int i = 0; i < 5; ++i) dos.push_back({0, 1});
  EXPECT_DOUBLE_EQ(*accuracy_malicious_only(from_pairs(dos, kTwo), "Benign"), 0.7);
  EXPECT_EQ(*accuracy_malicious_only(from_pairs({{1, 0}, {1, 0}}, kTwo), "Benign"), 0.0);
  EXPECT_FALSE(accuracy_malicious_only(from_pairs({{0, 0}}, kTwo), "Benign").has_value());
}

TEST(MacroF1, WorkedValues) {
  // Class A: P = R = 1. Class B: P = R = 0.5, with a third class absorbing B's miss and supplying its false positive.
  const std::vector<std::string> abc{"A", "B", "C"};
  const auto cm = from_pairs({{0, 0}, {1, 1}, {1, 2}, {2, 1}}, abc);
  EXPECT_DOUBLE_EQ(*precision(cm, 1), 0.5);
  EXPECT_DOUBLE_EQ(*recall(cm, 1), 0.5);
  // C has P = R = 0, so the mean over three classes is (1 + 0.5 + 0) / 3.
  EXPECT_DOUBLE_EQ(*macro_f1(cm), 0.5);
  // Restricted to the two classes of the worked example.
  const auto two = from_pairs({{0, 0}, {0, 0}, {1, 1}, {1, 0}, {0, 1}, {1, 1}}, {"A", "B"});
  EXPECT_NEAR(*macro_f1(two), (2.0 / 3.0 + 2.0 / 3.0) / 2.0, 1e-15);
  ConfusionMatrix manual({"A", "B"});
  manual.counts = {{2, 0}, {0, 0}};
  EXPECT_DOUBLE_EQ(*macro_f1(manual), 1.0);
  EXPECT_DOUBLE_EQ(*macro_f1(from_pairs({{0, 0}, {1, 1}}, kTwo)), 1.0);
  EXPECT_FALSE(macro_f1(ConfusionMatrix({"A"})).has_value());
}

TEST(MacroF1, PairOfClassesAveragesTheirF1) {
  // A has (P, R) = (1, 1) and B has (0.5, 0.5); C only supplies B's error partners.
  ConfusionMatrix cm({"A", "B", "C"});
  cm.counts = {{3, 0, 0}, {0, 1, 1}, {0, 1, 0}};
  EXPECT_DOUBLE_EQ(*f1(cm, 0), 1.0);
  EXPECT_DOUBLE_EQ(*f1(cm, 1), 0.5);
  EXPECT_DOUBLE_EQ((*f1(cm, 0) + *f1(cm, 1)) / 2.0, 0.75);
  EXPECT_DOUBLE_EQ(*macro_f1(cm), 0.5);
}

TEST(Fpr, WorkedValues) {
  std::vector<std::pair<int, int>> rows;
  for (int i = 0; i < 100; ++i) rows.push_back({0, i < 5 ? 1 : 0});
  EXPECT_DOUBLE_EQ(*fpr(from_pairs(rows, kTwo), "Benign"), 0.05);
  EXPECT_EQ(*fpr(from_pairs({{0, 0}}, kTwo), "Benign"), 0.0);
  EXPECT_FALSE(fpr(from_pairs({{1, 1}}, kTwo), "Benign").has_value());
}

TEST(Metrics, MatchBruteForceOnRandomCases) {
  Rng rng(41);
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(5));
    const std::size_t n = rng.below(60);
    std::vector<int> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
      p[i] = rng.uniform() < 0.5 ? t[i] : static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    }
    std::vector<std::string> names;
    for (int c = 0; c < k; ++c) names.push_back("c" + std::to_string(c));
    const int benign = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    const auto cm = confusion(t, p, names);
    const auto b = brute_metrics(t, p, k, benign);
    const auto& bn = names[static_cast<std::size_t>(benign)];
    ASSERT_TRUE(same_rate(accuracy(cm), b.accuracy));
    ASSERT_TRUE(same_rate(accuracy_malicious_only(cm, bn), b.malicious_accuracy));
    ASSERT_TRUE(same_rate(macro_f1(cm), b.macro_f1));
    ASSERT_TRUE(same_rate(fpr(cm, bn), b.fpr));
    for (int c = 0; c < k; ++c) {
      ASSERT_TRUE(same_rate(precision(cm, static_cast<std::size_t>(c)), b.precision[static_cast<std::size_t>(c)]));
      ASSERT_TRUE(same_rate(recall(cm, static_cast<std::size_t>(c)), b.recall[static_cast<std::size_t>(c)]));
    }
  }
}

TEST(Metrics, ReportJsonMarksUndefinedRates) {
  const auto report = evaluate_metrics(from_pairs({{1, 1}, {1, 0}}, kTwo), "Benign");
  const auto doc = metrics_to_json(report);
  EXPECT_TRUE(doc.at("fpr").is_null());
  EXPECT_EQ(doc.at("malicious_accuracy"), 0.5);
  EXPECT_EQ(doc.at("per_class").size(), 2u);
  EXPECT_EQ(doc.at("confusion").at("counts"), (json{{0, 0}, {1, 1}}));
}
