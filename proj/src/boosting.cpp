#include "flowguard/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace flowguard {

BoostParams BoostParams::hist_defaults() {
  BoostParams p;
  p.growth = Growth::level_wise;
  p.max_depth = 8;
  p.max_leaves = 0;
  p.min_samples_leaf = 1;
  p.top_rate = 1.0;
  return p;
}

BoostParams BoostParams::goss_defaults() {
  BoostParams p;
  p.growth = Growth::leaf_wise;
  p.max_depth = 16;
  p.max_leaves = 32;
  p.min_samples_leaf = 16;
  p.top_rate = 0.2;
  p.other_rate = 0.1;
  return p;
}

namespace {

double number(const json& doc, const char* key, double fallback) {
  if (!doc.contains(key)) return fallback;
  if (!doc.at(key).is_number()) throw ConfigError(std::string(key) + " must be a number");
  return doc.at(key).get<double>();
}

int integer(const json& doc, const char* key, int fallback, int minimum) {
  if (!doc.contains(key)) return fallback;
  if (!doc.at(key).is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
  const int v = doc.at(key).get<int>();
  if (v < minimum) throw ConfigError(std::string(key) + " must be at least " + std::to_string(minimum));
  return v;
}

}  // namespace

BoostParams BoostParams::from_json(const json& doc, Growth growth) {
  BoostParams p = growth == Growth::level_wise ? hist_defaults() : goss_defaults();
  if (growth == Growth::level_wise) {
    reject_unknown_keys(doc, {"n_estimators", "learning_rate", "max_depth", "gamma", "colsample", "reg_lambda",
                              "min_samples_leaf", "n_bins"},
                        "hist_gbdt");
  } else {
    reject_unknown_keys(doc, {"n_estimators", "learning_rate", "max_depth", "max_leaves", "gamma", "colsample",
                              "reg_lambda", "min_samples_leaf", "n_bins", "top_rate", "other_rate"},
                        "goss_gbdt");
  }
  p.n_estimators = integer(doc, "n_estimators", p.n_estimators, 0);
  p.learning_rate = number(doc, "learning_rate", p.learning_rate);
  p.max_depth = integer(doc, "max_depth", p.max_depth, 1);
  p.gamma = number(doc, "gamma", p.gamma);
  p.colsample = number(doc, "colsample", p.colsample);
  p.reg_lambda = number(doc, "reg_lambda", p.reg_lambda);
  p.min_samples_leaf = static_cast<std::size_t>(integer(doc, "min_samples_leaf", static_cast<int>(p.min_samples_leaf), 1));
  p.n_bins = integer(doc, "n_bins", p.n_bins, 2);
  if (growth == Growth::leaf_wise) {
    p.max_leaves = integer(doc, "max_leaves", p.max_leaves, 2);
    p.top_rate = number(doc, "top_rate", p.top_rate);
    p.other_rate = number(doc, "other_rate", p.other_rate);
  }
  if (!(p.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(p.gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  if (!(p.colsample > 0.0 && p.colsample <= 1.0)) throw ConfigError("colsample must lie in (0, 1]");
  if (!(p.reg_lambda >= 0.0)) throw ConfigError("reg_lambda must be non-negative");
  if (p.n_bins > 256) throw ConfigError("n_bins must not exceed 256");
  if (!(p.top_rate > 0.0 && p.top_rate <= 1.0)) throw ConfigError("top_rate must lie in (0, 1]");
  if (p.top_rate < 1.0 && !(p.other_rate > 0.0 && p.top_rate + p.other_rate <= 1.0)) {
    throw ConfigError("other_rate must be positive with top_rate + other_rate <= 1");
  }
  return p;
}

json BoostParams::to_json() const {
  json doc = {{"n_estimators", n_estimators}, {"learning_rate", learning_rate}, {"max_depth", max_depth},
              {"gamma", gamma},               {"colsample", colsample},         {"reg_lambda", reg_lambda},
              {"min_samples_leaf", min_samples_leaf}, {"n_bins", n_bins}};
  if (growth == Growth::leaf_wise) {
    doc["max_leaves"] = max_leaves;
    doc["top_rate"] = top_rate;
    doc["other_rate"] = other_rate;
  }
  return doc;
}

FeatureBins FeatureBins::fit(const Matrix& x, int max_bins) {
  FeatureBins out;
  const auto n = static_cast<std::size_t>(x.rows());
  out.edges.resize(static_cast<std::size_t>(x.cols()));
  std::vector<double> v(n);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (std::size_t r = 0; r < n; ++r) v[r] = x(static_cast<Eigen::Index>(r), c);
    std::sort(v.begin(), v.end());
    auto& edges = out.edges[static_cast<std::size_t>(c)];
    std::vector<double> uniq(v);
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    if (uniq.size() <= static_cast<std::size_t>(max_bins)) {
      if (!uniq.empty()) edges.assign(uniq.begin(), uniq.end() - 1);
      continue;
    }
    const auto bins = static_cast<std::size_t>(max_bins);
    for (std::size_t i = 1; i < bins; ++i) {
      const std::size_t pos = (i * n + bins - 1) / bins;
      const double edge = v[pos - 1];
      if (edge < v.back() && (edges.empty() || edge > edges.back())) edges.push_back(edge);
    }
  }
  return out;
}

int FeatureBins::bin(std::size_t column, double value) const {
  const auto& e = edges[column];
  return static_cast<int>(std::lower_bound(e.begin(), e.end(), value) - e.begin());
}

double cross_entropy(const Eigen::MatrixXd& scores, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(scores.rows());
  if (n == 0) return 0.0;
  double total = 0.0;
  if (scores.cols() == 1) {
    for (std::size_t r = 0; r < n; ++r) {
      const double f = scores(static_cast<Eigen::Index>(r), 0);
      const double softplus = std::max(f, 0.0) + std::log1p(std::exp(-std::abs(f)));
      total += softplus - (labels[r] == 1 ? f : 0.0);
    }
  } else {
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = scores.row(static_cast<Eigen::Index>(r));
      const double m = row.maxCoeff();
      const double lse = m + std::log((row.array() - m).exp().sum());
      total += lse - row(labels[r]);
    }
  }
  return total / static_cast<double>(n);
}

namespace {

using BinnedColumns = std::vector<std::vector<std::uint8_t>>;

struct Histogram {
  std::vector<double> g, h;
  std::vector<std::size_t> count;

  void resize(std::size_t n) {
    g.assign(n, 0.0);
    h.assign(n, 0.0);
    count.assign(n, 0);
  }
  void subtract_from(const Histogram& parent) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = parent.g[i] - g[i];
      h[i] = parent.h[i] - h[i];
      count[i] = parent.count[i] - count[i];
    }
  }
};

struct Candidate {
  int slot = -1;
  int bin = -1;
  double gain = 0.0;
  double gl = 0.0, hl = 0.0;
};

struct OpenLeaf {
  int node = 0;
  int depth = 0;
  std::vector<std::size_t> rows;
  double g = 0.0, h = 0.0;
  Histogram hist;
  Candidate best;
};

/// Grows one regression tree on gradient statistics over binned columns.
class TreeGrower {
 public:
  TreeGrower(const BinnedColumns& binned, const FeatureBins& bins, const BoostParams& params, std::span<const double> g,
             std::span<const double> h, std::vector<std::size_t> columns, int threads)
      : binned_(binned), bins_(bins), params_(params), g_(g), h_(h), columns_(std::move(columns)), threads_(threads) {
    offsets_.push_back(0);
    for (auto c : columns_) offsets_.push_back(offsets_.back() + bins_.bins(c));
  }

  Tree grow(std::vector<std::size_t> rows, std::vector<int>& split_bin) {
    Tree tree;
    split_bin.clear();
    OpenLeaf root;
    root.node = new_node(tree, split_bin);
    root.rows = std::move(rows);
    for (auto r : root.rows) {
      root.g += g_[r];
      root.h += h_[r];
    }
    build(root);
    evaluate(root);

    if (params_.growth == Growth::level_wise) {
      std::vector<OpenLeaf> level;
      level.push_back(std::move(root));
      while (!level.empty()) {
        std::vector<OpenLeaf> next;
        for (auto& leaf : level) {
          if (acceptable(leaf.best)) {
            auto [l, r] = split(tree, split_bin, leaf);
            evaluate(l);
            evaluate(r);
            next.push_back(std::move(l));
            next.push_back(std::move(r));
          } else {
            finalize(tree, leaf);
          }
        }
        level = std::move(next);
      }
    } else {
      std::vector<OpenLeaf> open;
      open.push_back(std::move(root));
      std::size_t leaves = 1;
      while (params_.max_leaves <= 0 || leaves < static_cast<std::size_t>(params_.max_leaves)) {
        int pick = -1;
        for (std::size_t i = 0; i < open.size(); ++i) {
          if (!acceptable(open[i].best)) continue;
          if (pick < 0 || open[i].best.gain > open[static_cast<std::size_t>(pick)].best.gain ||
              (open[i].best.gain == open[static_cast<std::size_t>(pick)].best.gain &&
               open[i].node < open[static_cast<std::size_t>(pick)].node)) {
            pick = static_cast<int>(i);
          }
        }
        if (pick < 0) break;
        OpenLeaf parent = std::move(open[static_cast<std::size_t>(pick)]);
        open.erase(open.begin() + pick);
        auto [l, r] = split(tree, split_bin, parent);
        evaluate(l);
        evaluate(r);
        open.push_back(std::move(l));
        open.push_back(std::move(r));
        ++leaves;
      }
      for (auto& leaf : open) finalize(tree, leaf);
    }
    return tree;
  }

 private:
  int new_node(Tree& tree, std::vector<int>& split_bin) {
    tree.nodes.emplace_back();
    split_bin.push_back(-1);
    return static_cast<int>(tree.nodes.size()) - 1;
  }

  bool parallel(std::size_t rows) const { return threads_ > 1 && rows * columns_.size() >= (1u << 16); }

  void build(OpenLeaf& leaf) {
    leaf.hist.resize(offsets_.back());
    parallel_for(columns_.size(), parallel(leaf.rows.size()) ? threads_ : 1, [&](std::size_t s) {
      const auto& col = binned_[columns_[s]];
      const std::size_t base = offsets_[s];
      for (auto r : leaf.rows) {
        const std::size_t i = base + col[r];
        leaf.hist.g[i] += g_[r];
        leaf.hist.h[i] += h_[r];
        ++leaf.hist.count[i];
      }
    });
  }

  void evaluate(OpenLeaf& leaf) {
    leaf.best = Candidate{};
    const std::size_t min_leaf = params_.min_samples_leaf;
    if (leaf.depth >= params_.max_depth || leaf.rows.size() < 2 * min_leaf) return;
    const double lambda = params_.reg_lambda;
    const double parent_score = leaf.g * leaf.g / (leaf.h + lambda);
    std::vector<Candidate> per_slot(columns_.size());
    parallel_for(columns_.size(), parallel(leaf.rows.size()) ? threads_ : 1, [&](std::size_t s) {
      const std::size_t base = offsets_[s];
      const std::size_t nb = offsets_[s + 1] - base;
      double gl = 0.0, hl = 0.0;
      std::size_t cl = 0;
      Candidate best;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        gl += leaf.hist.g[base + b];
        hl += leaf.hist.h[base + b];
        cl += leaf.hist.count[base + b];
        const std::size_t cr = leaf.rows.size() - cl;
        if (cl < min_leaf) continue;
        if (cr < min_leaf) break;
        const double gr = leaf.g - gl;
        const double hr = leaf.h - hl;
        const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_score);
        if (gain > best.gain) best = {static_cast<int>(s), static_cast<int>(b), gain, gl, hl};
      }
      per_slot[s] = best;
    });
    for (const auto& c : per_slot) {
      if (c.slot >= 0 && c.gain > leaf.best.gain) leaf.best = c;
    }
  }

  bool acceptable(const Candidate& c) const { return c.slot >= 0 && c.gain > 0.0 && c.gain >= params_.gamma; }

  std::pair<OpenLeaf, OpenLeaf> split(Tree& tree, std::vector<int>& split_bin, OpenLeaf& parent) {
    const auto slot = static_cast<std::size_t>(parent.best.slot);
    const std::size_t column = columns_[slot];
    const auto bin = static_cast<std::uint8_t>(parent.best.bin);
    OpenLeaf l, r;
    const auto& col = binned_[column];
    for (auto row : parent.rows) (col[row] <= bin ? l : r).rows.push_back(row);
    l.depth = r.depth = parent.depth + 1;
    l.g = parent.best.gl;
    l.h = parent.best.hl;
    r.g = parent.g - l.g;
    r.h = parent.h - l.h;

    OpenLeaf& small = l.rows.size() <= r.rows.size() ? l : r;
    OpenLeaf& large = l.rows.size() <= r.rows.size() ? r : l;
    build(small);
    large.hist = small.hist;
    large.hist.subtract_from(parent.hist);
    parent.hist = Histogram{};
    parent.rows.clear();

    l.node = new_node(tree, split_bin);
    r.node = new_node(tree, split_bin);
    auto& node = tree.nodes[static_cast<std::size_t>(parent.node)];
    node.column = static_cast<int>(column);
    node.threshold = bins_.edges[column][bin];
    node.left = l.node;
    node.right = r.node;
    split_bin[static_cast<std::size_t>(parent.node)] = bin;
    return {std::move(l), std::move(r)};
  }

  void finalize(Tree& tree, const OpenLeaf& leaf) const {
    tree.nodes[static_cast<std::size_t>(leaf.node)].value = {-leaf.g / (leaf.h + params_.reg_lambda)};
  }

  const BinnedColumns& binned_;
  const FeatureBins& bins_;
  const BoostParams& params_;
  std::span<const double> g_, h_;
  std::vector<std::size_t> columns_;
  std::vector<std::size_t> offsets_;
  int threads_;
};

int binned_leaf(const Tree& tree, const std::vector<int>& split_bin, const BinnedColumns& binned, std::size_t row) {
  int node = 0;
  while (!tree.nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const auto& n = tree.nodes[static_cast<std::size_t>(node)];
    node = binned[static_cast<std::size_t>(n.column)][row] <= split_bin[static_cast<std::size_t>(node)] ? n.left : n.right;
  }
  return node;
}

double sigmoid(double f) { return f >= 0.0 ? 1.0 / (1.0 + std::exp(-f)) : std::exp(f) / (1.0 + std::exp(f)); }

void softmax(Eigen::Ref<Eigen::RowVectorXd> row) {
  const double m = row.maxCoeff();
  row = (row.array() - m).exp();
  row /= row.sum();
}

}  // namespace

BoostModel::BoostModel(std::vector<std::string> classes, int benign, std::uint64_t layout, BoostParams params,
                       std::vector<double> base_score, std::vector<std::vector<Tree>> rounds,
                       std::vector<double> loss_history)
    : Model(std::move(classes), benign, layout),
      params_(std::move(params)),
      base_score_(std::move(base_score)),
      rounds_(std::move(rounds)),
      loss_history_(std::move(loss_history)) {}

std::vector<double> BoostModel::raw_scores(RowRef row) const {
  std::vector<double> out(base_score_);
  std::vector<double> sum(out.size(), 0.0);
  for (const auto& round : rounds_) {
    for (std::size_t k = 0; k < round.size(); ++k) sum[k] += round[k].leaf(row).value[0];
  }
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += params_.learning_rate * sum[k];
  return out;
}

std::vector<double> BoostModel::probabilities(RowRef row) const {
  const auto raw = raw_scores(row);
  if (raw.size() == 1) {
    const double p = sigmoid(raw[0]);
    return {1.0 - p, p};
  }
  Eigen::RowVectorXd v = Eigen::Map<const Eigen::RowVectorXd>(raw.data(), static_cast<Eigen::Index>(raw.size()));
  softmax(v);
  return {v.data(), v.data() + v.size()};
}

int BoostModel::predict_index(RowRef row) const {
  const auto raw = raw_scores(row);
  if (raw.size() == 1) return raw[0] > 0.0 ? 1 : 0;
  return argmax(raw);
}

json BoostModel::payload() const {
  json rounds = json::array();
  for (const auto& round : rounds_) {
    json trees = json::array();
    for (const auto& t : round) trees.push_back(t.to_json());
    rounds.push_back(std::move(trees));
  }
  return {{"base_score", base_score_}, {"rounds", std::move(rounds)}, {"loss_history", loss_history_}};
}

std::unique_ptr<BoostModel> BoostModel::from_json(const json& doc) {
  const Growth growth = doc.at("family") == "hist_gbdt" ? Growth::level_wise : Growth::leaf_wise;
  std::vector<std::vector<Tree>> rounds;
  for (const auto& round : doc.at("rounds")) {
    auto& trees = rounds.emplace_back();
    for (const auto& t : round) trees.push_back(Tree::from_json(t));
  }
  return std::make_unique<BoostModel>(doc.at("classes").get<std::vector<std::string>>(), doc.at("benign").get<int>(),
                                      parse_layout(doc), BoostParams::from_json(doc.at("params"), growth),
                                      doc.at("base_score").get<std::vector<double>>(), std::move(rounds),
                                      doc.at("loss_history").get<std::vector<double>>());
}

std::unique_ptr<BoostModel> train_boosting(const EncodedDataset& train, const BoostParams& params, std::uint64_t seed,
                                           int threads) {
  const std::size_t n = train.size();
  const std::size_t k_classes = train.classes.size();
  if (n == 0) throw DataError("cannot train on an empty dataset");
  if (k_classes < 2) throw DataError("boosting needs at least two classes");
  const std::size_t outputs = k_classes == 2 ? 1 : k_classes;
  const auto ncols = static_cast<std::size_t>(train.values.cols());

  const auto bins = FeatureBins::fit(train.values, params.n_bins);
  BinnedColumns binned(ncols, std::vector<std::uint8_t>(n));
  for (std::size_t c = 0; c < ncols; ++c) {
    for (std::size_t r = 0; r < n; ++r) {
      binned[c][r] = static_cast<std::uint8_t>(bins.bin(c, train.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
    }
  }

  const auto counts = train.class_counts();
  std::vector<double> base(outputs);
  const auto prior = [&](std::size_t c) {
    return std::clamp(static_cast<double>(counts[c]) / static_cast<double>(n), 1e-12, 1.0 - 1e-12);
  };
  if (outputs == 1) {
    base[0] = std::log(prior(1) / prior(0));
  } else {
    for (std::size_t c = 0; c < outputs; ++c) base[c] = std::log(prior(c));
  }

  Eigen::MatrixXd scores(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(outputs));
  for (std::size_t c = 0; c < outputs; ++c) scores.col(static_cast<Eigen::Index>(c)).setConstant(base[c]);
  std::vector<double> history{cross_entropy(scores, train.labels)};

  Rng rng(derive_seed(seed, 0));
  Rng sampler(derive_seed(seed, 1));
  const bool goss = params.growth == Growth::leaf_wise && params.top_rate < 1.0;
  const std::size_t draw = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(params.colsample * static_cast<double>(ncols))));

  Eigen::MatrixXd grad(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(outputs));
  Eigen::MatrixXd hess(grad.rows(), grad.cols());
  std::vector<double> g(n), h(n), weight(n, 1.0);
  std::vector<std::vector<Tree>> rounds;

  for (int round = 0; round < params.n_estimators; ++round) {
    for (std::size_t r = 0; r < n; ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      if (outputs == 1) {
        const double p = sigmoid(scores(ri, 0));
        grad(ri, 0) = p - (train.labels[r] == 1 ? 1.0 : 0.0);
        hess(ri, 0) = std::max(p * (1.0 - p), 1e-16);
      } else {
        Eigen::RowVectorXd p = scores.row(ri);
        softmax(p);
        for (std::size_t c = 0; c < outputs; ++c) {
          const auto ci = static_cast<Eigen::Index>(c);
          grad(ri, ci) = p(ci) - (train.labels[r] == static_cast<int>(c) ? 1.0 : 0.0);
          hess(ri, ci) = std::max(p(ci) * (1.0 - p(ci)), 1e-16);
        }
      }
    }

    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    std::fill(weight.begin(), weight.end(), 1.0);
    if (goss) {
      std::vector<double> magnitude(n);
      for (std::size_t r = 0; r < n; ++r) magnitude[r] = grad.row(static_cast<Eigen::Index>(r)).cwiseAbs().sum();
      std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return magnitude[a] > magnitude[b]; });
      const auto top = std::max<std::size_t>(1, static_cast<std::size_t>(params.top_rate * static_cast<double>(n)));
      const std::size_t other =
          std::min(n - top, static_cast<std::size_t>(params.other_rate * static_cast<double>(n)));
      std::vector<std::size_t> rest(rows.begin() + static_cast<std::ptrdiff_t>(top), rows.end());
      std::sort(rest.begin(), rest.end());
      for (std::size_t i = 0; i < other; ++i) std::swap(rest[i], rest[i + sampler.below(rest.size() - i)]);
      rows.resize(top);
      const double amplify = (1.0 - params.top_rate) / params.other_rate;
      for (std::size_t i = 0; i < other; ++i) {
        rows.push_back(rest[i]);
        weight[rest[i]] = amplify;
      }
      std::sort(rows.begin(), rows.end());
    }

    std::vector<Tree> trees;
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(scores.rows(), scores.cols());
    for (std::size_t c = 0; c < outputs; ++c) {
      for (auto r : rows) {
        g[r] = grad(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * weight[r];
        h[r] = hess(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * weight[r];
      }
      std::vector<std::size_t> columns(ncols);
      std::iota(columns.begin(), columns.end(), 0);
      if (draw < ncols) {
        rng.shuffle(columns);
        columns.resize(draw);
        std::sort(columns.begin(), columns.end());
      }
      TreeGrower grower(binned, bins, params, g, h, std::move(columns), threads);
      std::vector<int> split_bin;
      trees.push_back(grower.grow(rows, split_bin));
      for (std::size_t r = 0; r < n; ++r) {
        const int leaf = binned_leaf(trees.back(), split_bin, binned, r);
        delta(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            params.learning_rate * trees.back().nodes[static_cast<std::size_t>(leaf)].value[0];
      }
    }

    // Halve the round's contribution until the training loss does not rise.
    double scale = 1.0;
    double loss = cross_entropy(scores + delta, train.labels);
    for (int attempt = 0; loss > history.back() && attempt < 30; ++attempt) {
      scale *= 0.5;
      loss = cross_entropy(scores + scale * delta, train.labels);
    }
    if (loss > history.back()) {
      scale = 0.0;
      loss = history.back();
    }
    if (scale != 1.0) {
      for (auto& t : trees) {
        for (auto& node : t.nodes) {
          if (node.is_leaf()) node.value[0] *= scale;
        }
      }
    }
    scores += scale * delta;
    history.push_back(loss);
    rounds.push_back(std::move(trees));
  }

  return std::make_unique<BoostModel>(train.classes, train.benign, layout_fingerprint(train.columns), params, std::move(base),
                                      std::move(rounds), std::move(history));
}

}  // namespace flowguard
