#include "flowguard/attack.hpp"
#include "flowguard/external_predictor.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace flowguard;
using namespace flowguard::testing;

namespace {

std::string fake(const std::string& args) { return std::string(FAKE_PREDICTOR) + " " + args; }

EncodedDataset small_holdout(std::size_t rows) {
  Matrix x(static_cast<Eigen::Index>(rows), 2);
  std::vector<int> y(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    x(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    x(static_cast<Eigen::Index>(i), 1) = static_cast<double>(i % 7);
    y[i] = i % 2 == 0 ? 0 : 1;
  }
  return numeric_dataset(x, y, {"Benign", "DoS"});
}

}  // namespace

TEST(ExternalPredictor, FixedLabel) {
  const ExternalPredictor p(fake("fixed DoS"));
  const auto d = small_holdout(20);
  for (Eigen::Index i = 0; i < 20; ++i) EXPECT_EQ(p.predict(d.values.row(i)), "DoS");
  EXPECT_FALSE(p.concurrent());
}

TEST(ExternalPredictor, ResponsesStayInRequestOrder) {
  const ExternalPredictor p(fake("echo-index"));
  RowVector row(1);
  for (int i = 0; i < 10000; ++i) {
    row(0) = i;
    ASSERT_EQ(p.predict(row), std::to_string(i));
  }
}

TEST(ExternalPredictor, MalformedResponseFailsWithRowIndex) {
  const auto d = small_holdout(10);
  SubsetConfig s;
  s.numeric = {{"x0"}};
  const auto patterns = fit_patterns(d, s, "holdout");
  // Two answers cover the baseline and first attempt of row 1; row 1's second attempt gets garbage.
  const ExternalPredictor p(fake("malformed 2 DoS"));
  AttackConfig c;
  c.max_attempts = 3;
  try {
    run_evasion_attack(d, p, patterns, {}, c);
    FAIL() << "expected a predictor failure";
  } catch (const RuntimeFailure& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("malformed"), std::string::npos) << msg;
  }
}

TEST(ExternalPredictor, ExitedProcessFails) {
  const ExternalPredictor p(fake("exit 1 DoS"));
  RowVector row = RowVector::Zero(2);
  EXPECT_EQ(p.predict(row), "DoS");
  EXPECT_THROW(p.predict(row), RuntimeFailure);
}

TEST(ExternalPredictor, UnknownClassRejected) {
  const ExternalPredictor p(fake("fixed Worm"), {"Benign", "DoS"});
  EXPECT_THROW(p.predict(RowVector::Zero(2)), RuntimeFailure);
}

TEST(ExternalPredictor, EmptyCommandRejected) { EXPECT_THROW(ExternalPredictor(""), ConfigError); }

TEST(ExternalPredictor, DrivesAFullAttack) {
  const auto d = small_holdout(30);
  SubsetConfig s;
  s.numeric = {{"x0"}};
  const auto patterns = fit_patterns(d, s, "holdout");
  const ExternalPredictor p(fake("fixed DoS"), d.classes);
  AttackConfig c;
  c.max_attempts = 4;
  c.threads = 4;  // ignored for a non-concurrent predictor
  const auto r = run_evasion_attack(d, p, patterns, {}, c);
  EXPECT_EQ(r.trace.queries, 15u * 4u);
  EXPECT_EQ(r.trace.accuracy.back(), 1.0);
}
