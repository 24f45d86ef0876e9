#pragma once

#include "flowguard/common.hpp"

#include "json.hpp"

#include <span>
#include <vector>

namespace flowguard {

using json = nlohmann::json;

/// Split node when `column >= 0` (value <= threshold goes left), leaf otherwise.
/// Leaves hold class counts (classification), a single weight (boosting), or
/// the node size (isolation).
struct TreeNode {
  int column = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> value;

  bool is_leaf() const { return column < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  /// Index of the leaf reached by `row`, together with its depth.
  std::pair<int, int> descend(RowRef row) const;
  const TreeNode& leaf(RowRef row) const { return nodes[static_cast<std::size_t>(descend(row).first)]; }
  int depth() const;
  std::size_t leaf_count() const;

  json to_json() const;
  static Tree from_json(const json& doc);
};

double gini(std::span<const double> counts);
/// Impurity decrease of splitting `parent` into `left` and parent - left, weighted by node sizes.
double gini_gain(std::span<const double> parent, std::span<const double> left);

struct TreeParams {
  int max_depth = 16;
  std::size_t min_samples_leaf = 1;
  /// Features examined per split; 0 means all.
  std::size_t max_features = 0;
};

/// Column-major view of the training matrix plus per-column value ranks, shared by all trees of a forest.
struct TreeTrainingData {
  Eigen::MatrixXd x;
  std::vector<int> y;
  int n_classes = 0;
  /// Per column: sorted unique values and each row's rank among them.
  std::vector<std::vector<double>> unique_values;
  std::vector<std::vector<std::uint32_t>> ranks;

  TreeTrainingData(const Matrix& values, std::vector<int> labels, int classes);
};

/// Greedy CART with Gini impurity. `rows` may repeat (bootstrap multiplicity).
Tree train_cart(const TreeTrainingData& data, std::span<const std::size_t> rows, const TreeParams& params, Rng& rng);

/// Class index with the largest entry; ties go to the lowest index.
int argmax(std::span<const double> values);

}  // namespace flowguard
