#pragma once

#include "flowguard/attack.hpp"
#include "flowguard/constraints.hpp"
#include "flowguard/metrics.hpp"
#include "flowguard/model.hpp"
#include "flowguard/patterns.hpp"

#include <filesystem>
#include <optional>

namespace flowguard {

enum class Scenario { binary, multiclass };

struct ModelSpec {
  Family family = Family::random_forest;
  /// Parameter grid: object of value lists or a list of explicit combinations.
  json grid = json::object();
};

/// Everything one experiment needs. Relative paths resolve against `base_dir`.
struct RunConfig {
  std::filesystem::path base_dir;
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> synthetic;
  std::optional<std::filesystem::path> schema;
  InferOptions infer;
  Scenario scenario = Scenario::multiclass;
  double holdout_ratio = 0.3;
  std::vector<DomainConstraint> constraints;
  SubsetConfig subsets;
  std::vector<ModelSpec> models;
  int cv_folds = 5;
  AttackConfig attack;
  std::uint64_t seed = 0;
  int threads = 1;
  std::filesystem::path output_dir = "out";

  /// Checks referenced files and cross-field consistency.
  void validate() const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

RunConfig run_config_from_json(const json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
json run_config_to_json(const RunConfig& config);

/// Raw rows and schema for a config: the CSV (with a given or inferred
/// schema) or a freshly generated synthetic table.
struct PreparedData {
  FeatureSchema schema;
  EncodedDataset data;
};
PreparedData prepare_dataset(const RunConfig& config);

/// Per-stage seeds, all derived from the master seed.
struct StageSeeds {
  std::uint64_t split, augment, train, attack;
  explicit StageSeeds(std::uint64_t master);
};

struct EvaluationCell {
  Family family;
  std::string training;   // "regular" | "adversarial"
  std::string condition;  // "clean" | "untargeted" | "targeted"
  MetricsReport metrics;
};

struct PipelineResult {
  std::vector<EvaluationCell> cells;
  std::size_t augmented_rows = 0;
  std::size_t augmented_violations = 0;
  std::size_t adversarial_rows = 0;
  std::size_t adversarial_violations = 0;
  std::optional<std::size_t> most_robust;
  json report;

  const EvaluationCell& cell(Family family, std::string_view training, std::string_view condition) const;
};

/// Runs the five stages and writes every artifact under `config.output_dir`.
/// An INCOMPLETE marker names the failing stage if any stage throws.
PipelineResult run_pipeline(const RunConfig& config);

std::string render_text_report(const PipelineResult& result);

/// Index of the cell group with the highest under-attack malicious accuracy,
/// ties by clean macro-F1. `cells` holds clean/untargeted/targeted triples.
std::optional<std::size_t> select_most_robust(const std::vector<EvaluationCell>& cells);

std::string_view to_string(Scenario scenario);

}  // namespace flowguard
