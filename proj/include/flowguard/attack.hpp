#pragma once

#include "flowguard/model.hpp"
#include "flowguard/patterns.hpp"

namespace flowguard {

/// `simple` perturbs each malicious row once; `full` keeps perturbing until
/// the goal is met or the attempt budget runs out.
enum class AttackMode { simple, full };
enum class AttackGoal { untargeted, targeted };

std::string_view to_string(AttackGoal goal);
AttackGoal attack_goal_from_string(std::string_view text);

struct AttackConfig {
  AttackMode mode = AttackMode::full;
  AttackGoal goal = AttackGoal::untargeted;
  int max_attempts = 30;
  std::uint64_t seed = 0;
  /// On budget exhaustion keep the last attempt; false restores the original row.
  bool keep_final_attempt = true;
  int threads = 1;

  static AttackConfig from_json(const json& doc);
  json to_json() const;
};

/// With two classes every misclassification is a benign prediction, so both
/// goals collapse to untargeted.
AttackConfig normalized(AttackConfig config, const EncodedDataset& data);

bool evasion_success(std::string_view truth, std::string_view predicted, AttackGoal goal, std::string_view benign);

struct Provenance {
  bool perturbed = false;
  int attempts = 0;
  bool evaded = false;
};

struct AdversarialSet {
  EncodedDataset data;
  std::vector<Provenance> provenance;
};

struct AttackTrace {
  AttackGoal goal = AttackGoal::untargeted;
  int max_attempts = 0;
  std::size_t malicious_rows = 0;
  /// Index k: share of malicious rows whose goal was not met by any query up
  /// to k (k = 0 is the unperturbed baseline).
  std::vector<double> accuracy;
  /// Index k: rows that evaded at some attempt in [1, k].
  std::vector<std::size_t> cumulative_evasions;
  std::size_t queries = 0;
  std::vector<std::string> classes;
  std::vector<std::size_t> evasions_per_class;
};

/// Appends one perturbed copy of every malicious row; benign rows are untouched.
EncodedDataset augment_training_set(const EncodedDataset& train, const PatternSet& patterns,
                                    const std::vector<DomainConstraint>& domain, std::uint64_t seed);

struct AttackResult {
  AdversarialSet adversarial;
  AttackTrace trace;
};

/// Black-box evasion of every malicious row of `holdout`. Each row draws from
/// its own stream, so results do not depend on the thread count.
AttackResult run_evasion_attack(const EncodedDataset& holdout, const Predictor& predictor, const PatternSet& patterns,
                                const std::vector<DomainConstraint>& domain, const AttackConfig& config);

json provenance_to_json(const AdversarialSet& set);
json trace_to_json(const AttackTrace& trace);
void write_trace_csv(const std::filesystem::path& path, const AttackTrace& trace);
/// Encoded CSV plus `<path>.provenance.json`.
void write_adversarial_set(const std::filesystem::path& path, const AdversarialSet& set, std::string_view label_column);

}  // namespace flowguard
