#include "flowguard/boosting.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace flowguard;
using namespace flowguard::testing;

namespace {

EncodedDataset blobs(std::uint64_t seed, std::size_t n, int classes, double spread) {
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), 4);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    for (Eigen::Index j = 0; j < 4; ++j) {
      x(static_cast<Eigen::Index>(i), j) = rng.normal() * spread + (j % 2 == 0 ? y[i] : -y[i]);
    }
  }
  std::vector<std::string> names;
  for (int k = 0; k < classes; ++k) names.push_back("k" + std::to_string(k));
  return numeric_dataset(x, y, names);
}

BoostParams with_growth(Growth g, int rounds, double gamma) {
  BoostParams p = g == Growth::level_wise ? BoostParams::hist_defaults() : BoostParams::goss_defaults();
  p.n_estimators = rounds;
  p.gamma = gamma;
  return p;
}

Eigen::MatrixXd raw_matrix(const BoostModel& m, const EncodedDataset& d) {
  const auto outputs = static_cast<Eigen::Index>(m.base_score().size());
  Eigen::MatrixXd s(static_cast<Eigen::Index>(d.size()), outputs);
  for (std::size_t r = 0; r < d.size(); ++r) {
    const auto raw = m.raw_scores(d.values.row(static_cast<Eigen::Index>(r)));
    for (Eigen::Index c = 0; c < outputs; ++c) s(static_cast<Eigen::Index>(r), c) = raw[static_cast<std::size_t>(c)];
  }
  return s;
}

}  // namespace

TEST(Boosting, ZeroRoundsPredictsTheMajorityPrior) {
  for (int classes : {2, 3}) {
    auto d = blobs(1, 300, classes, 1.0);
    for (std::size_t i = 0; i < 200; ++i) d.labels[i] = classes - 1;
    auto p = BoostParams::hist_defaults();
    p.n_estimators = 0;
    const auto m = train_boosting(d, p, 1);
    for (std::size_t r = 0; r < d.size(); ++r) {
      ASSERT_EQ(m->predict_index(d.values.row(static_cast<Eigen::Index>(r))), classes - 1);
    }
  }
}

TEST(Boosting, LossNeverIncreasesWithoutGamma) {
  for (Growth g : {Growth::level_wise, Growth::leaf_wise}) {
    for (int classes : {2, 4}) {
      for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto d = blobs(seed, 500, classes, 1.5);
        const auto m = train_boosting(d, with_growth(g, 10, 0.0), seed);
        const auto& h = m->loss_history();
        ASSERT_EQ(h.size(), 11u);
        for (std::size_t i = 1; i < h.size(); ++i) ASSERT_LE(h[i], h[i - 1]) << "round " << i;
        // The recorded loss is the loss of the saved model.
        EXPECT_NEAR(cross_entropy(raw_matrix(*m, d), d.labels), h.back(), 1e-9);
      }
    }
  }
}

TEST(Boosting, LossNeverIncreasesWithGamma) {
  for (Growth g : {Growth::level_wise, Growth::leaf_wise}) {
    const auto d = blobs(5, 400, 3, 1.0);
    const auto m = train_boosting(d, with_growth(g, 10, 0.01), 5);
    const auto& h = m->loss_history();
    for (std::size_t i = 1; i < h.size(); ++i) ASSERT_LE(h[i], h[i - 1]);
  }
}

TEST(Boosting, SeparableDataFitWithinFiveRounds) {
  Matrix x(40, 1);
  std::vector<int> y(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    x(i, 0) = static_cast<double>(i);
    y[static_cast<std::size_t>(i)] = i >= 20 ? 1 : 0;
  }
  const auto d = numeric_dataset(x, y, {"A", "B"});
  for (Growth g : {Growth::level_wise, Growth::leaf_wise}) {
    auto p = with_growth(g, 5, 0.0);
    p.learning_rate = 0.2;
    p.colsample = 1.0;
    p.top_rate = 1.0;
    p.min_samples_leaf = 1;
    const auto m = train_boosting(d, p, 1);
    for (std::size_t r = 0; r < d.size(); ++r) {
      ASSERT_EQ(m->predict_index(d.values.row(static_cast<Eigen::Index>(r))), y[r]);
    }
  }
}

TEST(Boosting, LeafCapTwoGivesStumps) {
  const auto d = blobs(7, 300, 3, 1.0);
  auto p = with_growth(Growth::leaf_wise, 6, 0.0);
  p.max_leaves = 2;
  const auto m = train_boosting(d, p, 7);
  for (const auto& round : m->rounds()) {
    ASSERT_EQ(round.size(), 3u);
    for (const auto& tree : round) EXPECT_LE(tree.leaf_count(), 2u);
  }
}

TEST(Boosting, DepthCapsHold) {
  const auto d = blobs(8, 600, 2, 2.0);
  auto p = with_growth(Growth::level_wise, 5, 0.0);
  p.max_depth = 3;
  const auto level = train_boosting(d, p, 8);
  for (const auto& round : level->rounds()) EXPECT_LE(round[0].depth(), 3);
  auto q = with_growth(Growth::leaf_wise, 5, 0.0);
  q.max_depth = 2;
  q.max_leaves = 32;
  q.min_samples_leaf = 1;
  const auto leaf = train_boosting(d, q, 8);
  for (const auto& round : leaf->rounds()) {
    EXPECT_LE(round[0].depth(), 2);
    EXPECT_LE(round[0].leaf_count(), 4u);
  }
}

TEST(Boosting, SamplingDisabledIgnoresOtherRate) {
  const auto d = blobs(9, 300, 3, 1.0);
  auto a = with_growth(Growth::leaf_wise, 5, 0.0);
  a.top_rate = 1.0;
  a.other_rate = 0.1;
  auto b = a;
  b.other_rate = 0.5;
  EXPECT_EQ(train_boosting(d, a, 3)->to_json()["rounds"], train_boosting(d, b, 3)->to_json()["rounds"]);
  auto sampled = a;
  sampled.top_rate = 0.2;
  EXPECT_NE(train_boosting(d, sampled, 3)->to_json()["rounds"], train_boosting(d, a, 3)->to_json()["rounds"]);
}

TEST(Boosting, ProbabilitiesAreADistribution) {
  for (int classes : {2, 3}) {
    const auto d = blobs(10, 200, classes, 1.0);
    const auto m = train_boosting(d, with_growth(Growth::level_wise, 5, 0.0), 1);
    for (std::size_t r = 0; r < 20; ++r) {
      const auto p = m->probabilities(d.values.row(static_cast<Eigen::Index>(r)));
      ASSERT_EQ(p.size(), static_cast<std::size_t>(classes));
      double sum = 0.0;
      for (double v : p) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-12);
      EXPECT_EQ(m->predict_index(d.values.row(static_cast<Eigen::Index>(r))), argmax(p));
    }
  }
}

TEST(Boosting, ThreadCountDoesNotChangeTheModel) {
  const auto d = blobs(11, 400, 3, 1.0);
  for (Growth g : {Growth::level_wise, Growth::leaf_wise}) {
    const auto p = with_growth(g, 4, 0.01);
    EXPECT_EQ(train_boosting(d, p, 4, 1)->to_json().dump(), train_boosting(d, p, 4, 3)->to_json().dump());
  }
}

TEST(CrossEntropy, MatchesDirectFormula) {
  Eigen::MatrixXd logit(2, 1);
  logit << 0.0, 2.0;
  const std::vector<int> y{1, 0};
  const double expected = (std::log(2.0) + std::log(1.0 + std::exp(2.0))) / 2.0;
  EXPECT_NEAR(cross_entropy(logit, y), expected, 1e-12);
  Eigen::MatrixXd soft(1, 3);
  soft << 1.0, 2.0, 3.0;
  const std::vector<int> z{0};
  EXPECT_NEAR(cross_entropy(soft, z), -std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0))),
              1e-12);
}

TEST(FeatureBins, EqualFrequencyAndMonotone) {
  Matrix x(1000, 2);
  for (Eigen::Index i = 0; i < 1000; ++i) {
    x(i, 0) = static_cast<double>(i);
    x(i, 1) = static_cast<double>(i % 3);
  }
  const auto bins = FeatureBins::fit(x, 10);
  EXPECT_LE(bins.bins(0), 10u);
  EXPECT_EQ(bins.bins(1), 3u);
  std::vector<int> counts(bins.bins(0), 0);
  int previous = 0;
  for (Eigen::Index i = 0; i < 1000; ++i) {
    const int b = bins.bin(0, x(i, 0));
    ASSERT_GE(b, previous);
    previous = b;
    ++counts[static_cast<std::size_t>(b)];
  }
  for (int c : counts) EXPECT_NEAR(c, 100, 2);
  for (std::size_t b = 0; b < bins.edges[0].size(); ++b) {
    EXPECT_EQ(bins.bin(0, bins.edges[0][b]), static_cast<int>(b));
  }
}

TEST(BoostParams, Validation) {
  EXPECT_THROW(BoostParams::from_json(json{{"learning_rate", 0.0}}, Growth::level_wise), ConfigError);
  EXPECT_THROW(BoostParams::from_json(json{{"max_leaves", 8}}, Growth::level_wise), ConfigError);
  EXPECT_THROW(BoostParams::from_json(json{{"colsample", 1.5}}, Growth::leaf_wise), ConfigError);
  EXPECT_THROW(BoostParams::from_json(json{{"n_bins", 1000}}, Growth::leaf_wise), ConfigError);
  EXPECT_THROW(BoostParams::from_json(json{{"top_rate", 0.8}, {"other_rate", 0.5}}, Growth::leaf_wise), ConfigError);
  const auto goss = BoostParams::from_json(json::object(), Growth::leaf_wise);
  EXPECT_EQ(goss.top_rate, 0.2);
  EXPECT_EQ(goss.other_rate, 0.1);
  EXPECT_EQ(goss.max_leaves, 32);
  EXPECT_EQ(goss.max_depth, 16);
  EXPECT_EQ(goss.min_samples_leaf, 16u);
  EXPECT_EQ(BoostParams::from_json(json::object(), Growth::level_wise).max_depth, 8);
}
