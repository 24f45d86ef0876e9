#pragma once

#include "flowguard/model.hpp"
#include "flowguard/tree.hpp"

namespace flowguard {

struct IsolationParams {
  int n_estimators = 100;
  std::size_t max_samples = 256;
  /// Fraction of columns each tree may split on.
  double max_features = 0.9;
  double contamination = 0.4;
  /// Downsample malicious classes to `contamination` before fitting.
  bool subsample = true;

  static IsolationParams from_json(const json& doc);
  json to_json() const;
};

/// Expected path length of an unsuccessful search in a binary search tree of n keys.
double average_path_length(double n);

/// Two-class detector: predicts the non-benign class when the anomaly score
/// reaches the contamination threshold.
class IsolationModel : public Model {
 public:
  IsolationModel(std::vector<std::string> classes, int benign, std::uint64_t layout, IsolationParams params,
                 std::vector<Tree> trees, std::size_t sample_size, double threshold);

  Family family() const override { return Family::isolation_forest; }
  int predict_index(RowRef row) const override;
  /// 2^(-mean path length / c(sample size)), in (0, 1].
  double score(RowRef row) const;
  double threshold() const { return threshold_; }
  json params() const override { return params_.to_json(); }
  const std::vector<Tree>& trees() const { return trees_; }

  static std::unique_ptr<IsolationModel> from_json(const json& doc);

 protected:
  json payload() const override;

 private:
  IsolationParams params_;
  std::vector<Tree> trees_;
  std::size_t sample_size_;
  double threshold_;
};

/// Labels only drive the optional contamination subsampling; trees never see them.
std::unique_ptr<IsolationModel> train_isolation_forest(const EncodedDataset& train, const IsolationParams& params,
                                                       std::uint64_t seed, int threads = 1);

/// k-th largest score with k = ceil(contamination * n), clamped to [1, n].
double contamination_threshold(std::vector<double> scores, double contamination);

}  // namespace flowguard
