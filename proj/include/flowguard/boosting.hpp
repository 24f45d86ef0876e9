#pragma once

#include "flowguard/model.hpp"
#include "flowguard/tree.hpp"

namespace flowguard {

enum class Growth { level_wise, leaf_wise };

struct BoostParams {
  Growth growth = Growth::level_wise;
  int n_estimators = 100;
  double learning_rate = 0.1;
  int max_depth = 8;
  /// Leaf cap for leaf-wise growth.
  int max_leaves = 32;
  /// Minimum loss reduction to keep a split.
  double gamma = 0.01;
  /// Fraction of columns drawn per tree.
  double colsample = 0.8;
  double reg_lambda = 1.0;
  std::size_t min_samples_leaf = 1;
  int n_bins = 256;
  /// Gradient-based one-side sampling; inactive when top_rate is 1.
  double top_rate = 1.0;
  double other_rate = 0.1;

  static BoostParams hist_defaults();
  static BoostParams goss_defaults();
  static BoostParams from_json(const json& doc, Growth growth);
  json to_json() const;
};

/// Equal-frequency bin edges per column. Bin b holds values in
/// (edges[b-1], edges[b]]; the last bin is unbounded above.
struct FeatureBins {
  std::vector<std::vector<double>> edges;

  static FeatureBins fit(const Matrix& x, int max_bins);
  int bin(std::size_t column, double value) const;
  std::size_t bins(std::size_t column) const { return edges[column].size() + 1; }
};

class BoostModel : public Model {
 public:
  BoostModel(std::vector<std::string> classes, int benign, std::uint64_t layout, BoostParams params,
             std::vector<double> base_score, std::vector<std::vector<Tree>> rounds, std::vector<double> loss_history);

  Family family() const override {
    return params_.growth == Growth::level_wise ? Family::hist_gbdt : Family::goss_gbdt;
  }
  int predict_index(RowRef row) const override;
  /// base + learning_rate * sum of stage outputs; one entry per output
  /// (a single logit in the two-class case).
  std::vector<double> raw_scores(RowRef row) const;
  std::vector<double> probabilities(RowRef row) const;
  json params() const override { return params_.to_json(); }

  const std::vector<std::vector<Tree>>& rounds() const { return rounds_; }
  /// Training log-loss before the first round and after each round.
  const std::vector<double>& loss_history() const { return loss_history_; }
  const std::vector<double>& base_score() const { return base_score_; }

  static std::unique_ptr<BoostModel> from_json(const json& doc);

 protected:
  json payload() const override;

 private:
  BoostParams params_;
  std::vector<double> base_score_;
  std::vector<std::vector<Tree>> rounds_;
  std::vector<double> loss_history_;
};

/// Cross-entropy boosting: logistic for two classes, softmax with one tree
/// per class per round otherwise. A round whose trees would raise the
/// training loss has its leaf values halved until it does not.
std::unique_ptr<BoostModel> train_boosting(const EncodedDataset& train, const BoostParams& params, std::uint64_t seed,
                                           int threads = 1);

/// Mean cross-entropy of raw scores (n x outputs) against labels.
double cross_entropy(const Eigen::MatrixXd& scores, std::span<const int> labels);

}  // namespace flowguard
