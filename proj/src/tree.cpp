#include "flowguard/tree.hpp"

#include <algorithm>
#include <numeric>

namespace flowguard {

std::pair<int, int> Tree::descend(RowRef row) const {
  int node = 0;
  int depth = 0;
  while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(node)];
    node = row(n.column) <= n.threshold ? n.left : n.right;
    ++depth;
  }
  return {node, depth};
}

int Tree::depth() const {
  std::vector<int> depth(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    deepest = std::max(deepest, depth[i]);
    if (!n.is_leaf()) {
      depth[static_cast<std::size_t>(n.left)] = depth[i] + 1;
      depth[static_cast<std::size_t>(n.right)] = depth[i] + 1;
    }
  }
  return deepest;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

json Tree::to_json() const {
  json columns = json::array(), thresholds = json::array(), lefts = json::array(), rights = json::array(),
       values = json::array();
  for (const auto& n : nodes) {
    columns.push_back(n.column);
    thresholds.push_back(n.threshold);
    lefts.push_back(n.left);
    rights.push_back(n.right);
    values.push_back(n.is_leaf() ? json(n.value) : json::array());
  }
  return {{"column", std::move(columns)},
          {"threshold", std::move(thresholds)},
          {"left", std::move(lefts)},
          {"right", std::move(rights)},
          {"value", std::move(values)}};
}

Tree Tree::from_json(const json& doc) {
  Tree tree;
  const auto& columns = doc.at("column");
  tree.nodes.resize(columns.size());
  for (std::size_t i = 0; i < columns.size(); ++i) {
    auto& n = tree.nodes[i];
    n.column = columns[i].get<int>();
    n.threshold = doc.at("threshold")[i].get<double>();
    n.left = doc.at("left")[i].get<int>();
    n.right = doc.at("right")[i].get<int>();
    n.value = doc.at("value")[i].get<std::vector<double>>();
  }
  if (tree.nodes.empty()) throw std::invalid_argument("tree without nodes");
  return tree;
}

double gini(std::span<const double> counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (total <= 0.0) return 0.0;
  double sum_sq = 0.0;
  for (double c : counts) sum_sq += (c / total) * (c / total);
  return 1.0 - sum_sq;
}

double gini_gain(std::span<const double> parent, std::span<const double> left) {
  std::vector<double> right(parent.size());
  for (std::size_t k = 0; k < parent.size(); ++k) right[k] = parent[k] - left[k];
  const double w = std::accumulate(parent.begin(), parent.end(), 0.0);
  const double wl = std::accumulate(left.begin(), left.end(), 0.0);
  const double wr = w - wl;
  if (w <= 0.0) return 0.0;
  return gini(parent) - (wl / w) * gini(left) - (wr / w) * gini(right);
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

TreeTrainingData::TreeTrainingData(const Matrix& values, std::vector<int> labels, int classes)
    : x(values), y(std::move(labels)), n_classes(classes) {
  const auto n = static_cast<std::size_t>(x.rows());
  unique_values.resize(static_cast<std::size_t>(x.cols()));
  ranks.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    auto& u = unique_values[static_cast<std::size_t>(c)];
    u.assign(x.col(c).data(), x.col(c).data() + n);
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    auto& r = ranks[static_cast<std::size_t>(c)];
    r.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = static_cast<std::uint32_t>(std::lower_bound(u.begin(), u.end(), x(static_cast<Eigen::Index>(i), c)) - u.begin());
    }
  }
}

namespace {

struct Split {
  int column = -1;
  double threshold = 0.0;
  double gain = -1.0;
};

class CartBuilder {
 public:
  CartBuilder(const TreeTrainingData& data, const TreeParams& params, Rng& rng)
      : data_(data), params_(params), rng_(rng), k_(static_cast<std::size_t>(data.n_classes)) {
    features_.resize(static_cast<std::size_t>(data.x.cols()));
    std::iota(features_.begin(), features_.end(), 0);
  }

  Tree build(std::span<const std::size_t> rows) {
    std::vector<std::uint32_t> multiplicity(static_cast<std::size_t>(data_.x.rows()), 0);
    for (std::size_t r : rows) ++multiplicity[r];
    std::vector<std::size_t> unique;
    std::vector<double> weights;
    for (std::size_t r = 0; r < multiplicity.size(); ++r) {
      if (multiplicity[r]) {
        unique.push_back(r);
        weights.push_back(multiplicity[r]);
      }
    }
    weight_.assign(multiplicity.size(), 0.0);
    for (std::size_t i = 0; i < unique.size(); ++i) weight_[unique[i]] = weights[i];
    Tree tree;
    grow(tree, unique, 0);
    return tree;
  }

 private:
  int grow(Tree& tree, std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    std::vector<double> counts(k_, 0.0);
    for (std::size_t r : rows) counts[static_cast<std::size_t>(data_.y[r])] += weight_[r];
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) <= 1;
    const auto min_leaf = static_cast<double>(std::max<std::size_t>(1, params_.min_samples_leaf));

    Split best;
    if (!pure && depth < params_.max_depth && total >= 2.0 * min_leaf) best = find_split(rows, counts, min_leaf);
    if (best.column < 0) {
      tree.nodes[static_cast<std::size_t>(id)].value = std::move(counts);
      return id;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (data_.x(static_cast<Eigen::Index>(r), best.column) <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(tree, left, depth + 1);
    const int rr = grow(tree, right, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.column = best.column;
    node.threshold = best.threshold;
    node.left = l;
    node.right = rr;
    return id;
  }

  Split find_split(const std::vector<std::size_t>& rows, const std::vector<double>& parent, double min_leaf) {
    const std::size_t budget = params_.max_features == 0 ? features_.size()
                                                         : std::min(params_.max_features, features_.size());
    rng_.shuffle(features_);
    const double parent_gini = gini(parent);
    const double total = std::accumulate(parent.begin(), parent.end(), 0.0);
    Split best;
    std::size_t examined = 0;
    for (std::size_t fi = 0; fi < features_.size() && examined < budget; ++fi) {
      const std::size_t f = features_[fi];
      const auto& rank = data_.ranks[f];
      const auto& uniq = data_.unique_values[f];

      // Distinct ranks present in this node, with per-class weight, in ascending order.
      present_.clear();
      if (uniq.size() <= 2 * rows.size()) {
        hist_.assign(uniq.size() * k_, 0.0);
        seen_.assign(uniq.size(), 0);
        for (std::size_t r : rows) {
          const auto q = rank[r];
          hist_[q * k_ + static_cast<std::size_t>(data_.y[r])] += weight_[r];
          seen_[q] = 1;
        }
        for (std::size_t q = 0; q < uniq.size(); ++q) {
          if (seen_[q]) present_.push_back(static_cast<std::uint32_t>(q));
        }
        if (present_.size() < 2) continue;
        ++examined;
        scan(f, parent_gini, total, parent, min_leaf, [&](std::uint32_t q, std::size_t k) { return hist_[q * k_ + k]; },
             best);
      } else {
        sorted_.clear();
        for (std::size_t r : rows) sorted_.emplace_back(rank[r], r);
        std::sort(sorted_.begin(), sorted_.end());
        if (sorted_.front().first == sorted_.back().first) continue;
        ++examined;
        // Collapse into a compact histogram over the present ranks.
        hist_.clear();
        for (std::size_t i = 0; i < sorted_.size(); ++i) {
          if (i == 0 || sorted_[i].first != sorted_[i - 1].first) {
            present_.push_back(sorted_[i].first);
            hist_.resize(hist_.size() + k_, 0.0);
          }
          hist_[hist_.size() - k_ + static_cast<std::size_t>(data_.y[sorted_[i].second])] += weight_[sorted_[i].second];
        }
        scan_compact(f, present_, parent_gini, total, parent, min_leaf, best);
      }
    }
    return best;
  }

  template <class CountFn>
  void scan(std::size_t f, double parent_gini, double total, const std::vector<double>& parent, double min_leaf,
            CountFn count, Split& best) {
    left_.assign(k_, 0.0);
    double wl = 0.0;
    const auto& uniq = data_.unique_values[f];
    for (std::size_t i = 0; i + 1 < present_.size(); ++i) {
      for (std::size_t k = 0; k < k_; ++k) {
        const double c = count(present_[i], k);
        left_[k] += c;
        wl += c;
      }
      const double wr = total - wl;
      if (wl < min_leaf || wr < min_leaf) continue;
      const double gain = split_gain(parent_gini, total, parent, wl, wr);
      if (gain > best.gain) {
        best.gain = gain;
        best.column = static_cast<int>(f);
        best.threshold = midpoint(uniq[present_[i]], uniq[present_[i + 1]]);
      }
    }
  }

  void scan_compact(std::size_t f, const std::vector<std::uint32_t>& ranks, double parent_gini, double total,
                    const std::vector<double>& parent, double min_leaf, Split& best) {
    left_.assign(k_, 0.0);
    double wl = 0.0;
    const auto& uniq = data_.unique_values[f];
    for (std::size_t i = 0; i + 1 < ranks.size(); ++i) {
      for (std::size_t k = 0; k < k_; ++k) {
        const double c = hist_[i * k_ + k];
        left_[k] += c;
        wl += c;
      }
      const double wr = total - wl;
      if (wl < min_leaf || wr < min_leaf) continue;
      const double gain = split_gain(parent_gini, total, parent, wl, wr);
      if (gain > best.gain) {
        best.gain = gain;
        best.column = static_cast<int>(f);
        best.threshold = midpoint(uniq[ranks[i]], uniq[ranks[i + 1]]);
      }
    }
  }

  double split_gain(double parent_gini, double total, const std::vector<double>& parent, double wl, double wr) const {
    double sl = 0.0, sr = 0.0;
    for (std::size_t k = 0; k < k_; ++k) {
      const double l = left_[k];
      const double r = parent[k] - l;
      sl += l * l;
      sr += r * r;
    }
    const double gini_l = 1.0 - sl / (wl * wl);
    const double gini_r = 1.0 - sr / (wr * wr);
    return parent_gini - (wl / total) * gini_l - (wr / total) * gini_r;
  }

  static double midpoint(double a, double b) {
    const double mid = a + (b - a) / 2.0;
    return mid < b ? mid : a;
  }

  const TreeTrainingData& data_;
  const TreeParams& params_;
  Rng& rng_;
  std::size_t k_;
  std::vector<std::size_t> features_;
  std::vector<double> weight_;
  std::vector<double> hist_;
  std::vector<char> seen_;
  std::vector<std::uint32_t> present_;
  std::vector<std::pair<std::uint32_t, std::size_t>> sorted_;
  std::vector<double> left_;
};

}  // namespace

Tree train_cart(const TreeTrainingData& data, std::span<const std::size_t> rows, const TreeParams& params, Rng& rng) {
  if (rows.empty()) throw DataError("cannot train a tree on zero rows");
  if (params.max_depth < 1) throw ConfigError("max_depth must be at least 1");
  CartBuilder builder(data, params, rng);
  return builder.build(rows);
}

}  // namespace flowguard
