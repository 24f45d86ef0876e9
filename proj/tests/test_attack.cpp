#include "flowguard/attack.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <atomic>

using namespace flowguard;
using namespace flowguard::testing;

namespace {

class FixedPredictor : public Predictor {
 public:
  explicit FixedPredictor(std::string label) : label_(std::move(label)) {}
  std::string predict(RowRef) const override {
    ++calls;
    return label_;
  }
  mutable std::atomic<std::size_t> calls{0};

 private:
  std::string label_;
};

/// Benign once column 0 leaves [lo, hi]; otherwise the class whose index is column 1.
class WindowPredictor : public Predictor {
 public:
  WindowPredictor(std::vector<std::string> classes, double lo, double hi)
      : classes_(std::move(classes)), lo_(lo), hi_(hi) {}
  std::string predict(RowRef row) const override {
    if (row(0) < lo_ || row(0) > hi_) return classes_[0];
    return classes_[static_cast<std::size_t>(row(1))];
  }

 private:
  std::vector<std::string> classes_;
  double lo_, hi_;
};

class ThrowingPredictor : public Predictor {
 public:
  std::string predict(RowRef) const override { throw std::runtime_error("boom"); }
};

// Column 0 spreads over [0, 100] for every attack class; column 1 holds the class index.
EncodedDataset spread_data(std::size_t per_class, int classes, std::uint64_t seed = 1) {
  Rng rng(seed);
  const std::size_t n = per_class * static_cast<std::size_t>(classes);
  Matrix x(static_cast<Eigen::Index>(n), 2);
  std::vector<int> y(n);
  std::vector<std::string> names{"Benign"};
  for (int c = 1; c < classes; ++c) names.push_back("A" + std::to_string(c));
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
    x(static_cast<Eigen::Index>(i), 0) = std::round(rng.uniform(0.0, 100.0));
    x(static_cast<Eigen::Index>(i), 1) = y[i];
  }
  auto d = numeric_dataset(x, y, names);
  for (auto& c : d.columns) c.decimals = 0;
  return d;
}

SubsetConfig first_column(double epsilon = 0.3) {
  SubsetConfig s;
  s.numeric = {{"x0"}};
  s.epsilon = epsilon;
  return s;
}

AttackConfig full(AttackGoal goal, std::uint64_t seed = 5) {
  AttackConfig c;
  c.goal = goal;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Attack, NeverFooledOracleUsesTheWholeBudget) {
  auto d = spread_data(20, 2);
  const auto patterns = fit_patterns(d, first_column(), "train");
  const FixedPredictor oracle("A1");
  for (AttackGoal goal : {AttackGoal::untargeted, AttackGoal::targeted}) {
    oracle.calls = 0;
    const auto r = run_evasion_attack(d, oracle, patterns, {}, full(goal));
    EXPECT_EQ(r.trace.queries, 30u * 20u);
    // One unbudgeted baseline query per malicious row.
    EXPECT_EQ(oracle.calls.load(), 31u * 20u);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] == d.benign) continue;
      EXPECT_EQ(r.adversarial.provenance[i].attempts, 30);
      EXPECT_FALSE(r.adversarial.provenance[i].evaded);
    }
    EXPECT_EQ(r.trace.accuracy.front(), 1.0);
    EXPECT_EQ(r.trace.accuracy.back(), 1.0);
  }
}

TEST(Attack, EveryRowIsPerturbedEvenWhenAlreadyEvading) {
  const auto d = spread_data(10, 3);
  const auto patterns = fit_patterns(d, first_column(), "train");
  const FixedPredictor benign("Benign");
  const auto r = run_evasion_attack(d, benign, patterns, {}, full(AttackGoal::targeted));
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& p = r.adversarial.provenance[i];
    if (d.labels[i] == d.benign) {
      EXPECT_FALSE(p.perturbed);
      EXPECT_EQ(r.adversarial.data.values.row(static_cast<Eigen::Index>(i)), d.values.row(static_cast<Eigen::Index>(i)));
    } else {
      EXPECT_TRUE(p.perturbed);
      EXPECT_EQ(p.attempts, 1);
      EXPECT_TRUE(p.evaded);
    }
  }
  EXPECT_EQ(r.trace.accuracy.front(), 0.0);
}

TEST(Attack, BudgetIsNeverExceeded) {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int classes = 2 + static_cast<int>(rng.below(3));
    const auto d = spread_data(15, classes, trial);
    const auto patterns = fit_patterns(d, first_column(0.05 + 0.2 * rng.uniform()), "train");
    std::vector<std::string> names = d.classes;
    const WindowPredictor model(names, 5.0 + rng.uniform(0.0, 10.0), 95.0 - rng.uniform(0.0, 10.0));
    auto config = full(rng.uniform() < 0.5 ? AttackGoal::targeted : AttackGoal::untargeted, trial);
    config.max_attempts = 1 + static_cast<int>(rng.below(40));
    const auto r = run_evasion_attack(d, model, patterns, {}, config);
    std::size_t total = 0;
    for (const auto& p : r.adversarial.provenance) {
      ASSERT_LE(p.attempts, config.max_attempts);
      total += static_cast<std::size_t>(p.attempts);
    }
    EXPECT_EQ(total, r.trace.queries);
  }
}

TEST(Attack, TraceIsMonotoneAndMatchesProvenance) {
  const auto d = spread_data(50, 3);
  const auto patterns = fit_patterns(d, first_column(0.1), "train");
  const WindowPredictor model(d.classes, 20.0, 80.0);
  const auto r = run_evasion_attack(d, model, patterns, {}, full(AttackGoal::untargeted));
  ASSERT_EQ(r.trace.accuracy.size(), 31u);
  for (std::size_t k = 1; k < r.trace.accuracy.size(); ++k) {
    EXPECT_LE(r.trace.accuracy[k], r.trace.accuracy[k - 1]);
    EXPECT_GE(r.trace.cumulative_evasions[k], r.trace.cumulative_evasions[k - 1]);
  }
  std::size_t evaded = 0, baseline_correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.labels[i] == d.benign) continue;
    evaded += r.adversarial.provenance[i].evaded ? 1 : 0;
    const auto row = d.values.row(static_cast<Eigen::Index>(i));
    baseline_correct += model.predict(row) == d.classes[static_cast<std::size_t>(d.labels[i])] ? 1 : 0;
  }
  EXPECT_EQ(r.trace.cumulative_evasions.back(), evaded);
  EXPECT_DOUBLE_EQ(r.trace.accuracy.front(), static_cast<double>(baseline_correct) / 100.0);
  EXPECT_GT(evaded, 0u);
}

TEST(Attack, EvadedRowsAreKeptAndFailuresFollowTheKeepSetting) {
  const auto d = spread_data(30, 2);
  const auto patterns = fit_patterns(d, first_column(0.02), "train");
  const WindowPredictor model(d.classes, 10.0, 90.0);
  auto keep = full(AttackGoal::untargeted);
  keep.max_attempts = 3;
  auto restore = keep;
  restore.keep_final_attempt = false;
  const auto a = run_evasion_attack(d, model, patterns, {}, keep);
  const auto b = run_evasion_attack(d, model, patterns, {}, restore);
  std::size_t restored = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& p = a.adversarial.provenance[i];
    if (!p.perturbed) continue;
    const auto ia = static_cast<Eigen::Index>(i);
    if (p.evaded) {
      EXPECT_EQ(a.adversarial.data.values.row(ia), b.adversarial.data.values.row(ia));
      EXPECT_EQ(model.predict(a.adversarial.data.values.row(ia)), "Benign");
    } else {
      EXPECT_EQ(b.adversarial.data.values.row(ia), d.values.row(ia));
      restored += a.adversarial.data.values.row(ia) != d.values.row(ia) ? 1 : 0;
    }
  }
  EXPECT_GT(restored, 0u);
}

TEST(Attack, SimpleModeQueriesOnce) {
  const auto d = spread_data(20, 3);
  const auto patterns = fit_patterns(d, first_column(), "train");
  const FixedPredictor oracle("A1");
  auto c = full(AttackGoal::targeted);
  c.mode = AttackMode::simple;
  const auto r = run_evasion_attack(d, oracle, patterns, {}, c);
  EXPECT_EQ(r.trace.queries, 40u);
  EXPECT_EQ(r.trace.accuracy.size(), 2u);
}

TEST(Attack, TargetedNeedsABenignVerdict) {
  EXPECT_TRUE(evasion_success("DoS", "Benign", AttackGoal::targeted, "Benign"));
  EXPECT_FALSE(evasion_success("DoS", "C&C", AttackGoal::targeted, "Benign"));
  EXPECT_TRUE(evasion_success("DoS", "C&C", AttackGoal::untargeted, "Benign"));
  EXPECT_FALSE(evasion_success("DoS", "DoS", AttackGoal::untargeted, "Benign"));

  // A predictor that only ever confuses attack classes fools the untargeted goal alone.
  const auto d = spread_data(20, 3);
  const auto patterns = fit_patterns(d, first_column(), "train");
  const FixedPredictor confuse("A2");
  const auto u = run_evasion_attack(d, confuse, patterns, {}, full(AttackGoal::untargeted));
  const auto t = run_evasion_attack(d, confuse, patterns, {}, full(AttackGoal::targeted));
  EXPECT_EQ(u.trace.accuracy.back(), 0.5);
  EXPECT_EQ(t.trace.accuracy.back(), 1.0);
}

TEST(Attack, BinaryGoalsAreIdentical) {
  const auto d = spread_data(40, 2);
  const auto patterns = fit_patterns(d, first_column(), "train");
  const WindowPredictor model(d.classes, 30.0, 70.0);
  const auto u = run_evasion_attack(d, model, patterns, {}, full(AttackGoal::untargeted));
  const auto t = run_evasion_attack(d, model, patterns, {}, full(AttackGoal::targeted));
  EXPECT_EQ(u.adversarial.data.values, t.adversarial.data.values);
  EXPECT_EQ(provenance_to_json(u.adversarial), provenance_to_json(t.adversarial));
  EXPECT_EQ(trace_to_json(u.trace), trace_to_json(t.trace));
  EXPECT_EQ(normalized(full(AttackGoal::targeted), d).goal, AttackGoal::untargeted);
}

TEST(Attack, ThreadCountDoesNotChangeResults) {
  const auto d = spread_data(60, 4);
  const auto patterns = fit_patterns(d, first_column(0.1), "train");
  const WindowPredictor model(d.classes, 15.0, 85.0);
  auto one = full(AttackGoal::targeted, 17);
  auto many = one;
  many.threads = 4;
  const auto a = run_evasion_attack(d, model, patterns, {}, one);
  const auto b = run_evasion_attack(d, model, patterns, {}, many);
  EXPECT_EQ(a.adversarial.data.values, b.adversarial.data.values);
  EXPECT_EQ(trace_to_json(a.trace), trace_to_json(b.trace));
}

TEST(Attack, AdversarialRowsPassTheValidator) {
  Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_case(rng);
    const auto patterns = fit_patterns(c.data, c.subsets, "train");
    const Validator validator(c.domain, derive_class_constraints(c.data, c.subsets.categorical));
    const FixedPredictor oracle(c.data.classes[1]);
    auto config = full(AttackGoal::targeted, trial);
    config.max_attempts = 5;
    const auto r = run_evasion_attack(c.data, oracle, patterns, c.domain, config);
    for (std::size_t i = 0; i < c.data.size(); ++i) {
      if (c.data.labels[i] == c.data.benign) continue;
      const auto result = validator.check(r.adversarial.data.values.row(static_cast<Eigen::Index>(i)), c.data.labels[i]);
      ASSERT_TRUE(result.valid()) << "trial " << trial << ": " << result.violations[0].constraint;
    }
  }
}

TEST(Attack, PredictorFailureIsARuntimeFailure) {
  const auto d = spread_data(5, 2);
  const auto patterns = fit_patterns(d, first_column(), "train");
  EXPECT_THROW(run_evasion_attack(d, ThrowingPredictor{}, patterns, {}, full(AttackGoal::untargeted)), RuntimeFailure);
}

TEST(Attack, MissingPatternsRejected) {
  const auto d = spread_data(5, 3);
  auto patterns = fit_patterns(d, first_column(), "train");
  patterns.erase(2);
  EXPECT_THROW(run_evasion_attack(d, FixedPredictor("A1"), patterns, {}, full(AttackGoal::untargeted)), DataError);
  EXPECT_THROW(augment_training_set(d, patterns, {}, 1), DataError);
}

TEST(Augment, DoublesMaliciousRowsAndKeepsBenign) {
  Rng rng(37);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_case(rng);
    const auto patterns = fit_patterns(c.data, c.subsets, "train");
    const auto out = augment_training_set(c.data, patterns, c.domain, trial);
    const auto before = c.data.class_counts();
    const auto after = out.class_counts();
    for (std::size_t k = 0; k < before.size(); ++k) {
      ASSERT_EQ(after[k], static_cast<int>(k) == c.data.benign ? before[k] : 2 * before[k]);
    }
    ASSERT_EQ(out.values.topRows(c.data.values.rows()), c.data.values);
    const Validator validator(c.domain, derive_class_constraints(c.data, c.subsets.categorical));
    for (std::size_t r = c.data.size(); r < out.size(); ++r) {
      ASSERT_TRUE(validator.is_valid(out.values.row(static_cast<Eigen::Index>(r)), out.labels[r]));
    }
  }
}

TEST(AttackConfig, JsonAndErrors) {
  const auto c = AttackConfig::from_json(json{{"mode", "simple"}, {"goal", "targeted"}, {"max_attempts", 7}});
  EXPECT_EQ(c.mode, AttackMode::simple);
  EXPECT_EQ(c.goal, AttackGoal::targeted);
  EXPECT_EQ(AttackConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_THROW(AttackConfig::from_json(json{{"max_attempts", 0}}), ConfigError);
  EXPECT_THROW(AttackConfig::from_json(json{{"mode", "greedy"}}), ConfigError);
  EXPECT_THROW(AttackConfig::from_json(json{{"budget", 3}}), ConfigError);
  EXPECT_THROW(attack_goal_from_string("benign"), ConfigError);
}

TEST(AttackOutput, TraceCsvAndProvenance) {
  const auto d = spread_data(10, 2);
  const auto patterns = fit_patterns(d, first_column(), "train");
  auto c = full(AttackGoal::untargeted);
  c.max_attempts = 2;
  const auto r = run_evasion_attack(d, FixedPredictor("A1"), patterns, {}, c);
  const auto dir = scratch_dir("attack_output");
  write_trace_csv(dir / "trace.csv", r.trace);
  EXPECT_EQ(read_file(dir / "trace.csv"),
            "attempt,accuracy,cumulative_evasions\n0,1.000000,0\n1,1.000000,0\n2,1.000000,0\n");
  write_adversarial_set(dir / "adv.csv", r.adversarial, "label");
  const auto prov = json::parse(read_file(dir / "adv.csv.provenance.json"));
  EXPECT_EQ(prov.at("rows").size(), d.size());
  EXPECT_EQ(prov.at("rows")[0].at("status"), "original");
  EXPECT_EQ(prov.at("rows")[1].at("attempts"), 2);
}
