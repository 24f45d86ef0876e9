#include "flowguard/model.hpp"

#include "flowguard/boosting.hpp"
#include "flowguard/forest.hpp"
#include "flowguard/isolation.hpp"
#include "flowguard/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace flowguard {

namespace {

constexpr std::string_view kModelFormat = "flowguard-model";
constexpr int kModelVersion = 1;

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::decision_tree: return "decision_tree";
    case Family::random_forest: return "random_forest";
    case Family::hist_gbdt: return "hist_gbdt";
    case Family::goss_gbdt: return "goss_gbdt";
    case Family::isolation_forest: return "isolation_forest";
  }
  return "unknown";
}

Family family_from_string(std::string_view name) {
  for (auto f : {Family::decision_tree, Family::random_forest, Family::hist_gbdt, Family::goss_gbdt,
                 Family::isolation_forest}) {
    if (family_name(f) == name) return f;
  }
  throw ConfigError("unknown model family '" + std::string(name) + "'");
}

bool is_supervised(Family family) { return family != Family::isolation_forest; }

std::string layout_hex(std::uint64_t layout) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(layout));
  return buf;
}

std::uint64_t parse_layout(const json& doc) { return std::stoull(doc.at("layout").get<std::string>(), nullptr, 16); }

void reject_unknown_keys(const json& params, std::initializer_list<std::string_view> known, std::string_view family) {
  if (!params.is_object()) throw ConfigError(std::string(family) + " parameters must be a JSON object");
  for (const auto& [key, value] : params.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown " + std::string(family) + " parameter '" + key + "'");
    }
  }
}

std::vector<int> Model::predict_all(const Matrix& x, int threads) const {
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  parallel_for(out.size(), threads, [&](std::size_t r) { out[r] = predict_index(x.row(static_cast<Eigen::Index>(r))); });
  return out;
}

json Model::to_json() const {
  json doc = {{"format", kModelFormat},
              {"version", kModelVersion},
              {"family", family_name(family())},
              {"classes", classes_},
              {"benign", benign_},
              {"layout", layout_hex(layout_)},
              {"params", params()}};
  const json body = payload();
  for (const auto& [key, value] : body.items()) doc[key] = value;
  return doc;
}

std::unique_ptr<Model> train_model(Family family, const json& params, const EncodedDataset& train, std::uint64_t seed,
                                   int threads) {
  const json p = params.is_null() ? json::object() : params;
  switch (family) {
    case Family::decision_tree: return train_decision_tree(train, DecisionTreeParams::from_json(p), seed);
    case Family::random_forest: return train_random_forest(train, RandomForestParams::from_json(p), seed, threads);
    case Family::hist_gbdt: return train_boosting(train, BoostParams::from_json(p, Growth::level_wise), seed, threads);
    case Family::goss_gbdt: return train_boosting(train, BoostParams::from_json(p, Growth::leaf_wise), seed, threads);
    case Family::isolation_forest:
      return train_isolation_forest(train, IsolationParams::from_json(p), seed, threads);
  }
  throw ConfigError("unknown model family");
}

void check_params(Family family, const json& params) {
  const json p = params.is_null() ? json::object() : params;
  switch (family) {
    case Family::decision_tree: DecisionTreeParams::from_json(p); return;
    case Family::random_forest: RandomForestParams::from_json(p); return;
    case Family::hist_gbdt: BoostParams::from_json(p, Growth::level_wise); return;
    case Family::goss_gbdt: BoostParams::from_json(p, Growth::leaf_wise); return;
    case Family::isolation_forest: IsolationParams::from_json(p); return;
  }
  throw ConfigError("unknown model family");
}

std::unique_ptr<Model> model_from_json(const json& doc) {
  try {
    if (doc.at("format") != kModelFormat) throw DataError("not a model document");
    if (doc.at("version") != kModelVersion) {
      throw DataError("unsupported model version " + doc.at("version").dump());
    }
    switch (family_from_string(doc.at("family").get<std::string>())) {
      case Family::decision_tree: return DecisionTreeModel::from_json(doc);
      case Family::random_forest: return RandomForestModel::from_json(doc);
      case Family::hist_gbdt:
      case Family::goss_gbdt: return BoostModel::from_json(doc);
      case Family::isolation_forest: return IsolationModel::from_json(doc);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  }
  throw DataError("unknown model family");
}

std::unique_ptr<Model> load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

void save_model(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << model.to_json().dump() << '\n';
}

ContaminationResult subsample_for_contamination(const EncodedDataset& train, double target, std::uint64_t seed) {
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("contamination target must lie in (0, 1)");
  const auto counts = train.class_counts();
  const std::size_t benign = counts[static_cast<std::size_t>(train.benign)];
  if (benign == 0) throw DataError("contamination subsampling needs benign rows");
  const std::size_t malicious = train.size() - benign;
  const auto wanted =
      static_cast<std::size_t>(std::floor(target * static_cast<double>(benign) / (1.0 - target) + 0.5));
  if (wanted >= malicious) return {train, wanted == malicious};

  std::vector<std::size_t> mal_counts;
  std::vector<std::size_t> mal_classes;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (static_cast<int>(c) == train.benign) continue;
    mal_counts.push_back(counts[c]);
    mal_classes.push_back(c);
  }
  const auto alloc = largest_remainder(mal_counts, static_cast<double>(wanted) / static_cast<double>(malicious));

  std::vector<std::vector<std::size_t>> members(counts.size());
  for (std::size_t r = 0; r < train.size(); ++r) members[static_cast<std::size_t>(train.labels[r])].push_back(r);
  std::vector<char> keep(train.size(), 0);
  for (auto r : members[static_cast<std::size_t>(train.benign)]) keep[r] = 1;
  for (std::size_t i = 0; i < mal_classes.size(); ++i) {
    auto& m = members[mal_classes[i]];
    Rng rng(derive_seed(seed, mal_classes[i]));
    rng.shuffle(m);
    for (std::size_t j = 0; j < alloc[i]; ++j) keep[m[j]] = 1;
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < train.size(); ++r) {
    if (keep[r]) rows.push_back(r);
  }
  return {select_rows(train, rows), true};
}

std::vector<int> stratified_folds(std::span<const int> labels, int classes, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("need at least two folds");
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(classes));
  for (std::size_t r = 0; r < labels.size(); ++r) members[static_cast<std::size_t>(labels[r])].push_back(r);
  std::vector<int> fold(labels.size(), 0);
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& m = members[c];
    if (m.empty()) continue;
    if (m.size() < static_cast<std::size_t>(folds)) {
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(m.size()) + " rows, fewer than " +
                      std::to_string(folds) + " folds");
    }
    Rng rng(derive_seed(seed, c));
    rng.shuffle(m);
    for (std::size_t i = 0; i < m.size(); ++i) fold[m[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }
  return fold;
}

std::vector<json> expand_grid(const json& grid) {
  if (grid.is_array()) {
    if (grid.empty()) throw ConfigError("parameter grid is empty");
    std::vector<json> out;
    for (const auto& combo : grid) {
      if (!combo.is_object()) throw ConfigError("explicit grid entries must be objects");
      out.push_back(combo);
    }
    return out;
  }
  if (!grid.is_object()) throw ConfigError("parameter grid must be an object or a list of objects");
  std::vector<json> out{json::object()};
  for (const auto& [key, values] : grid.items()) {
    const json options = values.is_array() ? values : json::array({values});
    if (options.empty()) throw ConfigError("grid entry '" + key + "' has no values");
    std::vector<json> next;
    for (const auto& partial : out) {
      for (const auto& v : options) {
        json combo = partial;
        combo[key] = v;
        next.push_back(std::move(combo));
      }
    }
    out = std::move(next);
  }
  return out;
}

json default_grid(Family family) {
  switch (family) {
    case Family::decision_tree: return json::object();
    case Family::random_forest: return {{"min_samples_leaf", {2, 4}}};
    case Family::hist_gbdt:
    case Family::goss_gbdt: return {{"learning_rate", {0.01, 0.05, 0.1, 0.2}}, {"n_estimators", {80, 100, 120}}};
    case Family::isolation_forest: return {{"contamination", {0.4, 0.5}}};
  }
  return json::object();
}

GridSearchResult grid_search_cv(Family family, const json& grid, const EncodedDataset& train, int folds,
                                std::uint64_t seed, int threads) {
  GridSearchResult result;
  result.combinations = expand_grid(grid);
  const auto fold = stratified_folds(train.labels, static_cast<int>(train.classes.size()), folds, derive_seed(seed, 0xf01d));

  std::vector<EncodedDataset> fit_sets, score_sets;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> fit_rows, score_rows;
    for (std::size_t r = 0; r < fold.size(); ++r) (fold[r] == f ? score_rows : fit_rows).push_back(r);
    fit_sets.push_back(select_rows(train, fit_rows));
    score_sets.push_back(select_rows(train, score_rows));
  }

  const std::size_t combos = result.combinations.size();
  const auto k = static_cast<std::size_t>(folds);
  result.fold_scores.assign(combos, std::vector<double>(k, 0.0));
  parallel_for(combos * k, threads, [&](std::size_t task) {
    const std::size_t c = task / k;
    const std::size_t f = task % k;
    const auto model = train_model(family, result.combinations[c], fit_sets[f], seed, 1);
    const auto& holdout = score_sets[f];
    const auto predicted = model->predict_all(holdout.values);
    const auto cm = confusion(holdout.labels, predicted, train.classes);
    result.fold_scores[c][f] = macro_f1(cm).value_or(0.0);
  });

  for (std::size_t c = 0; c < combos; ++c) {
    const auto& s = result.fold_scores[c];
    result.mean_scores.push_back(std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(k));
    if (result.mean_scores[c] > result.mean_scores[result.best]) result.best = c;
  }
  result.model = train_model(family, result.combinations[result.best], train, seed, threads);
  return result;
}

json grid_result_to_json(const GridSearchResult& result) {
  json combos = json::array();
  for (std::size_t c = 0; c < result.combinations.size(); ++c) {
    combos.push_back({{"params", result.combinations[c]},
                      {"fold_scores", result.fold_scores[c]},
                      {"mean_score", result.mean_scores[c]}});
  }
  return {{"metric", "macro_f1"},
          {"combinations", std::move(combos)},
          {"best", result.best},
          {"best_params", result.combinations[result.best]}};
}

}  // namespace flowguard
