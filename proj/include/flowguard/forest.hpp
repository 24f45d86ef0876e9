#pragma once

#include "flowguard/model.hpp"
#include "flowguard/tree.hpp"

namespace flowguard {

/// "all", "sqrt", "log2", or a fraction in (0, 1] of the column count.
struct FeatureCount {
  std::string rule = "all";
  double fraction = 1.0;

  std::size_t resolve(std::size_t columns) const;
  json to_json() const;
  static FeatureCount from_json(const json& doc);
};

struct DecisionTreeParams {
  int max_depth = 16;
  std::size_t min_samples_leaf = 1;
  FeatureCount max_features;

  static DecisionTreeParams from_json(const json& doc);
  json to_json() const;
};

struct RandomForestParams {
  int n_estimators = 100;
  int max_depth = 16;
  std::size_t min_samples_leaf = 2;
  FeatureCount max_features{"sqrt", 1.0};
  bool bootstrap = true;

  static RandomForestParams from_json(const json& doc);
  json to_json() const;
};

class DecisionTreeModel : public Model {
 public:
  DecisionTreeModel(std::vector<std::string> classes, int benign, std::uint64_t layout, DecisionTreeParams params,
                    Tree tree);

  Family family() const override { return Family::decision_tree; }
  int predict_index(RowRef row) const override;
  json params() const override { return params_.to_json(); }
  const Tree& tree() const { return tree_; }

  static std::unique_ptr<DecisionTreeModel> from_json(const json& doc);

 protected:
  json payload() const override;

 private:
  DecisionTreeParams params_;
  Tree tree_;
};

class RandomForestModel : public Model {
 public:
  RandomForestModel(std::vector<std::string> classes, int benign, std::uint64_t layout, RandomForestParams params,
                    std::vector<Tree> trees);

  Family family() const override { return Family::random_forest; }
  /// Majority vote; ties go to the lowest class index.
  int predict_index(RowRef row) const override;
  /// Per-tree votes, in tree order.
  std::vector<int> tree_predictions(RowRef row) const;
  json params() const override { return params_.to_json(); }
  const std::vector<Tree>& trees() const { return trees_; }

  static std::unique_ptr<RandomForestModel> from_json(const json& doc);

 protected:
  json payload() const override;

 private:
  RandomForestParams params_;
  std::vector<Tree> trees_;
};

std::unique_ptr<DecisionTreeModel> train_decision_tree(const EncodedDataset& train, const DecisionTreeParams& params,
                                                       std::uint64_t seed);
std::unique_ptr<RandomForestModel> train_random_forest(const EncodedDataset& train, const RandomForestParams& params,
                                                       std::uint64_t seed, int threads = 1);

}  // namespace flowguard
