#pragma once

#include "flowguard/flowdata.hpp"

#include <memory>
#include <optional>

namespace flowguard {

/// Black-box classifier over encoded rows. Implementations must be pure and
/// safe to call concurrently unless `concurrent()` says otherwise.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string predict(RowRef row) const = 0;
  virtual bool concurrent() const { return true; }
};

enum class Family { decision_tree, random_forest, hist_gbdt, goss_gbdt, isolation_forest };

std::string_view family_name(Family family);
Family family_from_string(std::string_view name);
bool is_supervised(Family family);

class Model : public Predictor {
 public:
  Model(std::vector<std::string> classes, int benign, std::uint64_t layout)
      : classes_(std::move(classes)), benign_(benign), layout_(layout) {}

  virtual Family family() const = 0;
  virtual int predict_index(RowRef row) const = 0;
  std::string predict(RowRef row) const override { return classes_[static_cast<std::size_t>(predict_index(row))]; }
  std::vector<int> predict_all(const Matrix& x, int threads = 1) const;

  /// Complete versioned document, readable by `model_from_json`.
  json to_json() const;
  /// Effective hyperparameters, defaults filled in.
  virtual json params() const = 0;

  const std::vector<std::string>& classes() const { return classes_; }
  int benign() const { return benign_; }
  std::uint64_t layout() const { return layout_; }

 protected:
  virtual json payload() const = 0;

  std::vector<std::string> classes_;
  int benign_;
  std::uint64_t layout_;
};

/// `params` may omit keys (defaults apply); unknown keys are a ConfigError.
std::unique_ptr<Model> train_model(Family family, const json& params, const EncodedDataset& train, std::uint64_t seed,
                                   int threads = 1);
/// Parses `params` for `family` without training; throws ConfigError on bad keys or values.
void check_params(Family family, const json& params);
std::unique_ptr<Model> model_from_json(const json& doc);
std::unique_ptr<Model> load_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const Model& model);

struct ContaminationResult {
  EncodedDataset data;
  /// False when the malicious fraction was already at or below the target.
  bool reached = true;
};

/// Downsamples malicious classes proportionally so the malicious fraction is
/// close to `target`; benign rows are kept.
ContaminationResult subsample_for_contamination(const EncodedDataset& train, double target, std::uint64_t seed);

/// Fold index per row. Each class is shuffled and dealt round-robin.
std::vector<int> stratified_folds(std::span<const int> labels, int classes, int folds, std::uint64_t seed);

/// Cartesian product of a JSON object of value arrays (or a list of explicit
/// combinations). Keys are expanded in lexicographic order, the last varying fastest.
std::vector<json> expand_grid(const json& grid);
/// Grid used when a configuration names a family without one.
json default_grid(Family family);

struct GridSearchResult {
  std::vector<json> combinations;
  std::vector<std::vector<double>> fold_scores;
  std::vector<double> mean_scores;
  std::size_t best = 0;
  std::unique_ptr<Model> model;
};

/// Stratified k-fold search scored by macro-F1; ties keep the earliest
/// combination. The winner is retrained on all of `train`.
GridSearchResult grid_search_cv(Family family, const json& grid, const EncodedDataset& train, int folds,
                                std::uint64_t seed, int threads = 1);

json grid_result_to_json(const GridSearchResult& result);

// Shared by the model implementations.
std::uint64_t parse_layout(const json& doc);
std::string layout_hex(std::uint64_t layout);
void reject_unknown_keys(const json& params, std::initializer_list<std::string_view> known, std::string_view family);

}  // namespace flowguard
