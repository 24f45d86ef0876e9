#include "flowguard/isolation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace flowguard {

IsolationParams IsolationParams::from_json(const json& doc) {
  reject_unknown_keys(doc, {"n_estimators", "max_samples", "max_features", "contamination", "subsample"},
                      "isolation_forest");
  IsolationParams p;
  if (doc.contains("n_estimators")) p.n_estimators = doc.at("n_estimators").get<int>();
  if (doc.contains("max_samples")) {
    const int v = doc.at("max_samples").get<int>();
    if (v < 1) throw ConfigError("max_samples must be at least 1");
    p.max_samples = static_cast<std::size_t>(v);
  }
  if (doc.contains("max_features")) p.max_features = doc.at("max_features").get<double>();
  if (doc.contains("contamination")) p.contamination = doc.at("contamination").get<double>();
  if (doc.contains("subsample")) p.subsample = doc.at("subsample").get<bool>();
  if (p.n_estimators < 1) throw ConfigError("n_estimators must be at least 1");
  if (!(p.max_features > 0.0 && p.max_features <= 1.0)) throw ConfigError("max_features must lie in (0, 1]");
  if (!(p.contamination > 0.0 && p.contamination <= 0.5)) {
    throw ConfigError("contamination must lie in (0, 0.5]; more anomalies than normal rows cannot be isolated");
  }
  return p;
}

json IsolationParams::to_json() const {
  return {{"n_estimators", n_estimators},
          {"max_samples", max_samples},
          {"max_features", max_features},
          {"contamination", contamination},
          {"subsample", subsample}};
}

double average_path_length(double n) {
  if (n <= 1.0) return 0.0;
  if (n <= 2.0) return 1.0;
  constexpr double euler = 0.5772156649015329;
  return 2.0 * (std::log(n - 1.0) + euler) - 2.0 * (n - 1.0) / n;
}

double contamination_threshold(std::vector<double> scores, double contamination) {
  if (scores.empty()) throw DataError("no scores to threshold");
  const auto n = scores.size();
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(contamination * static_cast<double>(n) - 1e-9)), 1, n);
  std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k - 1), scores.end(), std::greater<>());
  return scores[k - 1];
}

IsolationModel::IsolationModel(std::vector<std::string> classes, int benign, std::uint64_t layout, IsolationParams params,
                               std::vector<Tree> trees, std::size_t sample_size, double threshold)
    : Model(std::move(classes), benign, layout),
      params_(std::move(params)),
      trees_(std::move(trees)),
      sample_size_(sample_size),
      threshold_(threshold) {}

double IsolationModel::score(RowRef row) const {
  const double norm = average_path_length(static_cast<double>(sample_size_));
  if (norm <= 0.0) return 1.0;
  double total = 0.0;
  for (const auto& t : trees_) {
    const auto [leaf, depth] = t.descend(row);
    total += depth + average_path_length(t.nodes[static_cast<std::size_t>(leaf)].value[0]);
  }
  return std::exp2(-(total / static_cast<double>(trees_.size())) / norm);
}

int IsolationModel::predict_index(RowRef row) const { return score(row) >= threshold_ ? 1 - benign_ : benign_; }

json IsolationModel::payload() const {
  json trees = json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"trees", std::move(trees)}, {"sample_size", sample_size_}, {"threshold", threshold_}};
}

std::unique_ptr<IsolationModel> IsolationModel::from_json(const json& doc) {
  std::vector<Tree> trees;
  for (const auto& t : doc.at("trees")) trees.push_back(Tree::from_json(t));
  return std::make_unique<IsolationModel>(doc.at("classes").get<std::vector<std::string>>(), doc.at("benign").get<int>(),
                                          parse_layout(doc), IsolationParams::from_json(doc.at("params")),
                                          std::move(trees), doc.at("sample_size").get<std::size_t>(),
                                          doc.at("threshold").get<double>());
}

namespace {

struct IsolationBuilder {
  const Matrix& x;
  int height_limit;
  Rng& rng;
  std::vector<std::size_t> features;

  int grow(Tree& tree, std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (depth >= height_limit || rows.size() <= 1) {
      tree.nodes[static_cast<std::size_t>(id)].value = {static_cast<double>(rows.size())};
      return id;
    }
    rng.shuffle(features);
    int column = -1;
    double lo = 0.0, hi = 0.0;
    for (auto f : features) {
      lo = hi = x(static_cast<Eigen::Index>(rows[0]), static_cast<Eigen::Index>(f));
      for (auto r : rows) {
        const double v = x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (lo < hi) {
        column = static_cast<int>(f);
        break;
      }
    }
    if (column < 0) {
      tree.nodes[static_cast<std::size_t>(id)].value = {static_cast<double>(rows.size())};
      return id;
    }
    double p = rng.uniform(lo, hi);
    if (!(p < hi)) p = lo;
    std::vector<std::size_t> left, right;
    for (auto r : rows) (x(static_cast<Eigen::Index>(r), column) <= p ? left : right).push_back(r);
    rows.clear();
    const int l = grow(tree, left, depth + 1);
    const int rr = grow(tree, right, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.column = column;
    node.threshold = p;
    node.left = l;
    node.right = rr;
    return id;
  }
};

}  // namespace

std::unique_ptr<IsolationModel> train_isolation_forest(const EncodedDataset& train, const IsolationParams& params,
                                                       std::uint64_t seed, int threads) {
  if (train.classes.size() != 2) throw ConfigError("isolation forest needs a two-class (benign vs. malicious) dataset");
  if (!(params.contamination > 0.0 && params.contamination <= 0.5)) {
    throw ConfigError("contamination must lie in (0, 0.5]");
  }
  EncodedDataset data = params.subsample
                            ? subsample_for_contamination(train, params.contamination, derive_seed(seed, 0x5ab)).data
                            : train;
  const std::size_t n = data.size();
  if (n == 0) throw DataError("cannot train on an empty dataset");

  // Canonical row order, so the fitted trees do not depend on input order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto d = data.values.cols();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (Eigen::Index c = 0; c < d; ++c) {
      const double va = data.values(static_cast<Eigen::Index>(a), c);
      const double vb = data.values(static_cast<Eigen::Index>(b), c);
      if (va != vb) return va < vb;
    }
    return false;
  });
  Matrix x(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) x.row(static_cast<Eigen::Index>(i)) = data.values.row(static_cast<Eigen::Index>(order[i]));

  const std::size_t psi = std::min(params.max_samples, n);
  const int limit = static_cast<int>(std::ceil(std::log2(static_cast<double>(psi))));
  const auto columns = static_cast<std::size_t>(d);
  const std::size_t n_features =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(params.max_features * static_cast<double>(columns))), 1,
                              std::max<std::size_t>(columns, 1));

  std::vector<Tree> trees(static_cast<std::size_t>(params.n_estimators));
  parallel_for(trees.size(), threads, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t + 1));
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    for (std::size_t i = 0; i < psi; ++i) std::swap(rows[i], rows[i + rng.below(n - i)]);
    rows.resize(psi);
    std::vector<std::size_t> features(columns);
    std::iota(features.begin(), features.end(), 0);
    for (std::size_t i = 0; i < n_features; ++i) std::swap(features[i], features[i + rng.below(columns - i)]);
    features.resize(n_features);
    std::sort(features.begin(), features.end());
    IsolationBuilder builder{x, limit, rng, std::move(features)};
    builder.grow(trees[t], rows, 0);
  });

  auto model = std::make_unique<IsolationModel>(data.classes, data.benign, layout_fingerprint(data.columns), params,
                                                std::move(trees), psi, 0.0);
  std::vector<double> scores(n);
  parallel_for(n, threads, [&](std::size_t r) { scores[r] = model->score(x.row(static_cast<Eigen::Index>(r))); });
  const double threshold = contamination_threshold(scores, params.contamination);
  return std::make_unique<IsolationModel>(data.classes, data.benign, layout_fingerprint(data.columns), params,
                                          std::vector<Tree>(model->trees()), psi, threshold);
}

}  // namespace flowguard
