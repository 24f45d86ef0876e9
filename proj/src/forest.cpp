#include "flowguard/forest.hpp"

#include <cmath>
#include <numeric>

namespace flowguard {

std::size_t FeatureCount::resolve(std::size_t columns) const {
  double n = static_cast<double>(columns);
  if (rule == "sqrt") {
    n = std::floor(std::sqrt(n));
  } else if (rule == "log2") {
    n = std::floor(std::log2(std::max(n, 1.0)));
  } else if (rule == "fraction") {
    n = std::floor(fraction * n);
  }
  return std::clamp<std::size_t>(static_cast<std::size_t>(n), 1, std::max<std::size_t>(columns, 1));
}

json FeatureCount::to_json() const {
  if (rule == "fraction") return fraction;
  return rule;
}

FeatureCount FeatureCount::from_json(const json& doc) {
  FeatureCount out;
  if (doc.is_string()) {
    out.rule = doc.get<std::string>();
    if (out.rule != "all" && out.rule != "sqrt" && out.rule != "log2") {
      throw ConfigError("max_features must be \"all\", \"sqrt\", \"log2\" or a fraction, got \"" + out.rule + "\"");
    }
  } else if (doc.is_number()) {
    out.rule = "fraction";
    out.fraction = doc.get<double>();
    if (!(out.fraction > 0.0 && out.fraction <= 1.0)) throw ConfigError("max_features fraction must lie in (0, 1]");
  } else {
    throw ConfigError("max_features must be a string or a number");
  }
  return out;
}

namespace {

int positive_int(const json& doc, const char* key, int fallback, int minimum = 1) {
  if (!doc.contains(key)) return fallback;
  if (!doc.at(key).is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
  const int v = doc.at(key).get<int>();
  if (v < minimum) throw ConfigError(std::string(key) + " must be at least " + std::to_string(minimum));
  return v;
}

}  // namespace

DecisionTreeParams DecisionTreeParams::from_json(const json& doc) {
  reject_unknown_keys(doc, {"criterion", "max_depth", "min_samples_leaf", "max_features"}, "decision_tree");
  DecisionTreeParams p;
  if (doc.contains("criterion") && doc.at("criterion") != "gini") throw ConfigError("only the gini criterion is supported");
  p.max_depth = positive_int(doc, "max_depth", p.max_depth);
  p.min_samples_leaf = static_cast<std::size_t>(positive_int(doc, "min_samples_leaf", static_cast<int>(p.min_samples_leaf)));
  if (doc.contains("max_features")) p.max_features = FeatureCount::from_json(doc.at("max_features"));
  return p;
}

json DecisionTreeParams::to_json() const {
  return {{"criterion", "gini"},
          {"max_depth", max_depth},
          {"min_samples_leaf", min_samples_leaf},
          {"max_features", max_features.to_json()}};
}

RandomForestParams RandomForestParams::from_json(const json& doc) {
  reject_unknown_keys(doc, {"criterion", "n_estimators", "max_depth", "min_samples_leaf", "max_features", "bootstrap"},
                      "random_forest");
  RandomForestParams p;
  if (doc.contains("criterion") && doc.at("criterion") != "gini") throw ConfigError("only the gini criterion is supported");
  p.n_estimators = positive_int(doc, "n_estimators", p.n_estimators);
  p.max_depth = positive_int(doc, "max_depth", p.max_depth);
  p.min_samples_leaf = static_cast<std::size_t>(positive_int(doc, "min_samples_leaf", static_cast<int>(p.min_samples_leaf)));
  if (doc.contains("max_features")) p.max_features = FeatureCount::from_json(doc.at("max_features"));
  if (doc.contains("bootstrap")) {
    if (!doc.at("bootstrap").is_boolean()) throw ConfigError("bootstrap must be a boolean");
    p.bootstrap = doc.at("bootstrap").get<bool>();
  }
  return p;
}

json RandomForestParams::to_json() const {
  return {{"criterion", "gini"},
          {"n_estimators", n_estimators},
          {"max_depth", max_depth},
          {"min_samples_leaf", min_samples_leaf},
          {"max_features", max_features.to_json()},
          {"bootstrap", bootstrap}};
}

DecisionTreeModel::DecisionTreeModel(std::vector<std::string> classes, int benign, std::uint64_t layout,
                                     DecisionTreeParams params, Tree tree)
    : Model(std::move(classes), benign, layout), params_(std::move(params)), tree_(std::move(tree)) {}

int DecisionTreeModel::predict_index(RowRef row) const { return argmax(tree_.leaf(row).value); }

json DecisionTreeModel::payload() const { return {{"tree", tree_.to_json()}}; }

std::unique_ptr<DecisionTreeModel> DecisionTreeModel::from_json(const json& doc) {
  return std::make_unique<DecisionTreeModel>(doc.at("classes").get<std::vector<std::string>>(), doc.at("benign").get<int>(),
                                             parse_layout(doc), DecisionTreeParams::from_json(doc.at("params")),
                                             Tree::from_json(doc.at("tree")));
}

RandomForestModel::RandomForestModel(std::vector<std::string> classes, int benign, std::uint64_t layout,
                                     RandomForestParams params, std::vector<Tree> trees)
    : Model(std::move(classes), benign, layout), params_(std::move(params)), trees_(std::move(trees)) {}

std::vector<int> RandomForestModel::tree_predictions(RowRef row) const {
  std::vector<int> out;
  out.reserve(trees_.size());
  for (const auto& t : trees_) out.push_back(argmax(t.leaf(row).value));
  return out;
}

int RandomForestModel::predict_index(RowRef row) const {
  std::vector<double> votes(classes_.size(), 0.0);
  for (const auto& t : trees_) votes[static_cast<std::size_t>(argmax(t.leaf(row).value))] += 1.0;
  return argmax(votes);
}

json RandomForestModel::payload() const {
  json trees = json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"trees", std::move(trees)}};
}

std::unique_ptr<RandomForestModel> RandomForestModel::from_json(const json& doc) {
  std::vector<Tree> trees;
  for (const auto& t : doc.at("trees")) trees.push_back(Tree::from_json(t));
  return std::make_unique<RandomForestModel>(doc.at("classes").get<std::vector<std::string>>(), doc.at("benign").get<int>(),
                                             parse_layout(doc), RandomForestParams::from_json(doc.at("params")),
                                             std::move(trees));
}

std::unique_ptr<DecisionTreeModel> train_decision_tree(const EncodedDataset& train, const DecisionTreeParams& params,
                                                       std::uint64_t seed) {
  if (train.size() == 0) throw DataError("cannot train on an empty dataset");
  const TreeTrainingData data(train.values, train.labels, static_cast<int>(train.classes.size()));
  std::vector<std::size_t> rows(train.size());
  std::iota(rows.begin(), rows.end(), 0);
  TreeParams tp{params.max_depth, params.min_samples_leaf,
                params.max_features.resolve(static_cast<std::size_t>(train.values.cols()))};
  Rng rng(derive_seed(seed, 0));
  return std::make_unique<DecisionTreeModel>(train.classes, train.benign, layout_fingerprint(train.columns), params,
                                             train_cart(data, rows, tp, rng));
}

std::unique_ptr<RandomForestModel> train_random_forest(const EncodedDataset& train, const RandomForestParams& params,
                                                       std::uint64_t seed, int threads) {
  if (train.size() == 0) throw DataError("cannot train on an empty dataset");
  const TreeTrainingData data(train.values, train.labels, static_cast<int>(train.classes.size()));
  const TreeParams tp{params.max_depth, params.min_samples_leaf,
                      params.max_features.resolve(static_cast<std::size_t>(train.values.cols()))};
  const std::size_t n = train.size();
  std::vector<Tree> trees(static_cast<std::size_t>(params.n_estimators));
  parallel_for(trees.size(), threads, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      for (auto& r : rows) r = rng.below(n);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    trees[t] = train_cart(data, rows, tp, rng);
  });
  return std::make_unique<RandomForestModel>(train.classes, train.benign, layout_fingerprint(train.columns), params,
                                             std::move(trees));
}

}  // namespace flowguard
