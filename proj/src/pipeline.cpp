#include "flowguard/pipeline.hpp"

#include "flowguard/synthetic.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace flowguard {

namespace fs = std::filesystem;

std::string_view to_string(Scenario scenario) { return scenario == Scenario::binary ? "binary" : "multiclass"; }

fs::path RunConfig::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

void RunConfig::validate() const {
  if (dataset.has_value() == synthetic.has_value()) throw ConfigError("set exactly one of \"dataset\" and \"synthetic\"");
  for (const auto* p : {&dataset, &synthetic, &schema}) {
    if (p->has_value() && !fs::exists(resolve(**p))) throw ConfigError("file not found: " + resolve(**p).string());
  }
  if (!(holdout_ratio > 0.0 && holdout_ratio < 1.0)) throw ConfigError("holdout ratio must lie in (0, 1)");
  if (models.empty()) throw ConfigError("no models configured");
  if (cv_folds < 2) throw ConfigError("cv_folds must be at least 2");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].family == Family::isolation_forest && scenario != Scenario::binary) {
      throw ConfigError("isolation_forest runs in the binary scenario only");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (models[j].family == models[i].family) {
        throw ConfigError("model family '" + std::string(family_name(models[i].family)) + "' listed twice");
      }
    }
    for (const auto& combination : expand_grid(models[i].grid)) check_params(models[i].family, combination);
  }
}

RunConfig run_config_from_json(const json& doc, const fs::path& base_dir) {
  static const std::vector<std::string> known = {"dataset",   "synthetic", "schema",   "infer",   "scenario",
                                                 "holdout",   "constraints", "patterns", "models", "cv_folds",
                                                 "attack",    "seed",      "threads",  "output_dir"};
  if (!doc.is_object()) throw ConfigError("run configuration must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown configuration key '" + key + "'");
  }
  try {
    RunConfig c;
    c.base_dir = base_dir;
    if (doc.contains("dataset")) c.dataset = doc.at("dataset").get<std::string>();
    if (doc.contains("synthetic")) c.synthetic = doc.at("synthetic").get<std::string>();
    if (doc.contains("schema")) c.schema = doc.at("schema").get<std::string>();
    if (doc.contains("infer")) {
      const auto& inf = doc.at("infer");
      for (const auto& [key, value] : inf.items()) {
        if (key != "label_column" && key != "benign_label" && key != "min_category_freq" && key != "drop" &&
            key != "categorical") {
          throw ConfigError("unknown infer option '" + key + "'");
        }
      }
      c.infer.label_column = inf.value("label_column", c.infer.label_column);
      c.infer.benign_label = inf.value("benign_label", c.infer.benign_label);
      c.infer.min_category_freq = inf.value("min_category_freq", c.infer.min_category_freq);
      c.infer.drop = inf.value("drop", c.infer.drop);
      c.infer.categorical = inf.value("categorical", c.infer.categorical);
    }
    if (doc.contains("scenario")) {
      const auto s = doc.at("scenario").get<std::string>();
      if (s == "binary") {
        c.scenario = Scenario::binary;
      } else if (s == "multiclass") {
        c.scenario = Scenario::multiclass;
      } else {
        throw ConfigError("scenario must be \"binary\" or \"multiclass\"");
      }
    }
    c.holdout_ratio = doc.value("holdout", c.holdout_ratio);
    if (doc.contains("constraints")) c.constraints = domain_constraints_from_json(doc.at("constraints"));
    if (doc.contains("patterns")) c.subsets = subset_config_from_json(doc.at("patterns"));
    if (!doc.contains("models") || !doc.at("models").is_object()) throw ConfigError("\"models\" must be an object");
    for (const auto& [name, spec] : doc.at("models").items()) {
      ModelSpec m;
      m.family = family_from_string(name);
      if (!spec.is_object()) throw ConfigError("model entry '" + name + "' must be an object");
      for (const auto& [key, value] : spec.items()) {
        if (key != "grid") throw ConfigError("unknown key '" + key + "' in model entry '" + name + "'");
      }
      m.grid = spec.contains("grid") ? spec.at("grid") : default_grid(m.family);
      c.models.push_back(std::move(m));
    }
    std::sort(c.models.begin(), c.models.end(),
              [](const ModelSpec& a, const ModelSpec& b) { return static_cast<int>(a.family) < static_cast<int>(b.family); });
    c.cv_folds = doc.value("cv_folds", c.cv_folds);
    if (doc.contains("attack")) c.attack = AttackConfig::from_json(doc.at("attack"));
    if (!doc.contains("seed")) throw ConfigError("\"seed\" is required");
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.threads = doc.value("threads", c.threads);
    c.output_dir = c.resolve(doc.value("output_dir", c.output_dir.string()));
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run configuration: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(doc, path.parent_path());
}

json run_config_to_json(const RunConfig& c) {
  json models = json::object();
  for (const auto& m : c.models) models[std::string(family_name(m.family))] = {{"grid", m.grid}};
  json doc = {{"scenario", to_string(c.scenario)},
              {"holdout", c.holdout_ratio},
              {"constraints", domain_constraints_to_json(c.constraints)},
              {"patterns", subset_config_to_json(c.subsets)},
              {"models", std::move(models)},
              {"cv_folds", c.cv_folds},
              {"attack", c.attack.to_json()},
              {"seed", c.seed}};
  if (c.dataset) doc["dataset"] = c.dataset->generic_string();
  if (c.synthetic) doc["synthetic"] = c.synthetic->generic_string();
  if (c.schema) doc["schema"] = c.schema->generic_string();
  return doc;
}

StageSeeds::StageSeeds(std::uint64_t master)
    : split(derive_seed(master, 1)), augment(derive_seed(master, 2)), train(derive_seed(master, 3)),
      attack(derive_seed(master, 4)) {}

PreparedData prepare_dataset(const RunConfig& config) {
  RawTable table;
  FeatureSchema schema;
  if (config.synthetic) {
    auto generated = generate_synthetic(load_synthetic_spec(config.resolve(*config.synthetic)));
    table = std::move(generated.table);
    schema = std::move(generated.schema);
  } else {
    table = read_csv_table(config.resolve(*config.dataset));
    schema = config.schema ? load_schema(config.resolve(*config.schema)) : infer_schema(table, config.infer);
  }
  if (config.schema && config.synthetic) schema = load_schema(config.resolve(*config.schema));
  EncodedDataset data = encode(type_table(table, schema), schema);
  if (config.scenario == Scenario::binary) data = to_binary(data);
  return {std::move(schema), std::move(data)};
}

const EvaluationCell& PipelineResult::cell(Family family, std::string_view training, std::string_view condition) const {
  for (const auto& c : cells) {
    if (c.family == family && c.training == training && c.condition == condition) return c;
  }
  throw DataError("no evaluation cell " + std::string(family_name(family)) + "/" + std::string(training) + "/" +
                  std::string(condition));
}

std::optional<std::size_t> select_most_robust(const std::vector<EvaluationCell>& cells) {
  std::optional<std::size_t> best;
  auto key = [&](std::size_t i) {
    return std::pair{cells[i + 1].metrics.malicious_accuracy.value_or(-1.0), cells[i].metrics.macro_f1.value_or(-1.0)};
  };
  for (std::size_t i = 0; i + 2 < cells.size(); i += 3) {
    if (!best || key(i) > key(*best)) best = i;
  }
  return best;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string percent(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << *v * 100.0;
  return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::size_t count_violations(const Validator& validator, const AdversarialSet& set) {
  std::size_t bad = 0;
  for (std::size_t r = 0; r < set.data.size(); ++r) {
    if (!set.provenance[r].perturbed) continue;
    if (!validator.is_valid(set.data.values.row(static_cast<Eigen::Index>(r)), set.data.labels[r])) ++bad;
  }
  return bad;
}

json class_counts_json(const EncodedDataset& data) {
  json out = json::object();
  const auto counts = data.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) out[data.classes[c]] = counts[c];
  return out;
}

}  // namespace

std::string render_text_report(const PipelineResult& result) {
  std::ostringstream out;
  out << "Malicious-only accuracy (%), macro-F1 (%) and benign FPR (%) per model\n\n";
  out << std::left << std::setw(18) << "model" << std::setw(13) << "training" << std::right << std::setw(10) << "clean"
      << std::setw(12) << "untargeted" << std::setw(10) << "targeted" << std::setw(10) << "macro-F1" << std::setw(8)
      << "FPR" << '\n';
  for (std::size_t i = 0; i + 2 < result.cells.size(); i += 3) {
    const auto& clean = result.cells[i];
    out << std::left << std::setw(18) << family_name(clean.family) << std::setw(13) << clean.training << std::right
        << std::setw(10) << percent(clean.metrics.malicious_accuracy) << std::setw(12)
        << percent(result.cells[i + 1].metrics.malicious_accuracy) << std::setw(10)
        << percent(result.cells[i + 2].metrics.malicious_accuracy) << std::setw(10) << percent(clean.metrics.macro_f1)
        << std::setw(8) << percent(clean.metrics.fpr) << '\n';
  }
  out << "\nPerturbed rows failing validation: " << result.augmented_violations << " of " << result.augmented_rows
      << " (augmented), " << result.adversarial_violations << " of " << result.adversarial_rows << " (adversarial)\n";
  if (result.most_robust) {
    const auto& c = result.cells[*result.most_robust];
    out << "Most robust: " << family_name(c.family) << " (" << c.training << " training)\n";
  }
  return out.str();
}

PipelineResult run_pipeline(const RunConfig& config) {
  config.validate();
  const fs::path out = config.output_dir;
  fs::create_directories(out / "models");
  fs::create_directories(out / "attacks");
  const fs::path marker = out / "INCOMPLETE";
  std::string stage = "preprocess";
  write_text(marker, stage + "\n");

  const StageSeeds seeds(config.seed);
  PipelineResult result;
  auto fail = [&](const std::string& what) { write_text(marker, stage + "\n" + what + "\n"); };
  try {
    // 1. Preprocess and split.
    const auto prepared = prepare_dataset(config);
    const std::string label_column = prepared.schema.label_column;
    const auto split = stratified_split(prepared.data, 1.0 - config.holdout_ratio, seeds.split);
    const auto& train = split.train;
    const auto& holdout = split.holdout;
    save_schema(out / "schema.json", prepared.schema);
    write_encoded_csv(out / "train.csv", train, label_column);
    write_encoded_csv(out / "holdout.csv", holdout, label_column);

    // 2. Train-side patterns and adversarial augmentation.
    stage = "augment";
    write_text(marker, stage + "\n");
    const auto train_patterns = fit_patterns(train, config.subsets, "train");
    write_json(out / "patterns_train.json", patterns_to_json(train_patterns));
    const auto augmented = augment_training_set(train, train_patterns, config.constraints, seeds.augment);
    write_encoded_csv(out / "train_augmented.csv", augmented, label_column);
    {
      const Validator validator(config.constraints, derive_class_constraints(train, config.subsets.categorical));
      for (std::size_t r = train.size(); r < augmented.size(); ++r) {
        ++result.augmented_rows;
        if (!validator.is_valid(augmented.values.row(static_cast<Eigen::Index>(r)), augmented.labels[r])) {
          ++result.augmented_violations;
        }
      }
    }

    // 3. Grid search and training on the regular and augmented sets.
    stage = "train";
    write_text(marker, stage + "\n");
    struct Trained {
      Family family;
      std::string training;
      std::unique_ptr<Model> model;
      json cv;
    };
    std::vector<Trained> trained;
    for (const auto& spec : config.models) {
      for (const auto* which : {"regular", "adversarial"}) {
        const auto& set = std::string(which) == "regular" ? train : augmented;
        auto search = grid_search_cv(spec.family, spec.grid, set, config.cv_folds, seeds.train, config.threads);
        const std::string name = std::string(family_name(spec.family)) + "_" + which;
        save_model(out / "models" / (name + ".json"), *search.model);
        const json cv = grid_result_to_json(search);
        write_json(out / "models" / (name + ".cv.json"), cv);
        trained.push_back({spec.family, which, std::move(search.model), cv});
      }
    }

    // 4. Holdout-side patterns and attacks against every model.
    stage = "attack";
    write_text(marker, stage + "\n");
    const auto holdout_patterns = fit_patterns(holdout, config.subsets, "holdout");
    write_json(out / "patterns_holdout.json", patterns_to_json(holdout_patterns));
    const Validator holdout_validator(config.constraints, derive_class_constraints(holdout, config.subsets.categorical));
    json attacks = json::array();
    std::vector<std::array<AdversarialSet, 2>> adversarial(trained.size());
    for (std::size_t m = 0; m < trained.size(); ++m) {
      const auto& t = trained[m];
      const std::string name = std::string(family_name(t.family)) + "_" + t.training;
      for (std::size_t g = 0; g < 2; ++g) {
        AttackConfig ac = config.attack;
        ac.goal = g == 0 ? AttackGoal::untargeted : AttackGoal::targeted;
        ac.seed = seeds.attack;
        ac.threads = config.threads;
        auto attack = run_evasion_attack(holdout, *t.model, holdout_patterns, config.constraints, ac);
        const std::string stem = name + "_" + (g == 0 ? "untargeted" : "targeted");
        write_adversarial_set(out / "attacks" / (stem + ".csv"), attack.adversarial, label_column);
        write_trace_csv(out / "attacks" / (stem + ".trace.csv"), attack.trace);
        const std::size_t bad = count_violations(holdout_validator, attack.adversarial);
        result.adversarial_violations += bad;
        for (const auto& p : attack.adversarial.provenance) result.adversarial_rows += p.perturbed ? 1 : 0;
        json entry = {{"model", name}, {"requested_goal", g == 0 ? "untargeted" : "targeted"}, {"violations", bad}};
        entry["trace"] = trace_to_json(attack.trace);
        attacks.push_back(std::move(entry));
        adversarial[m][g] = std::move(attack.adversarial);
      }
    }

    // 5. Evaluation and summary.
    stage = "evaluate";
    write_text(marker, stage + "\n");
    json cells = json::array();
    json models = json::array();
    for (std::size_t m = 0; m < trained.size(); ++m) {
      const auto& t = trained[m];
      const EncodedDataset* sets[3] = {&holdout, &adversarial[m][0].data, &adversarial[m][1].data};
      const char* conditions[3] = {"clean", "untargeted", "targeted"};
      for (int c = 0; c < 3; ++c) {
        const auto predicted = t.model->predict_all(sets[c]->values, config.threads);
        const auto cm = confusion(sets[c]->labels, predicted, holdout.classes);
        EvaluationCell cell{t.family, t.training, conditions[c], evaluate_metrics(cm, holdout.benign_label())};
        cells.push_back({{"model", family_name(t.family)},
                         {"training", t.training},
                         {"condition", conditions[c]},
                         {"metrics", metrics_to_json(cell.metrics)}});
        result.cells.push_back(std::move(cell));
      }
      models.push_back({{"model", family_name(t.family)},
                        {"training", t.training},
                        {"best_params", t.cv.at("best_params")},
                        {"cv_macro_f1", t.cv.at("combinations")[t.cv.at("best").get<std::size_t>()].at("mean_score")}});
    }
    result.most_robust = select_most_robust(result.cells);

    json& report = result.report;
    report["config"] = run_config_to_json(config);
    report["dataset"] = {{"rows", prepared.data.size()},
                         {"train_rows", train.size()},
                         {"holdout_rows", holdout.size()},
                         {"augmented_rows", augmented.size()},
                         {"columns", prepared.data.values.cols()},
                         {"classes", prepared.data.classes},
                         {"train_counts", class_counts_json(train)},
                         {"holdout_counts", class_counts_json(holdout)}};
    report["realism"] = {{"augmented_rows", result.augmented_rows},
                         {"augmented_violations", result.augmented_violations},
                         {"adversarial_rows", result.adversarial_rows},
                         {"adversarial_violations", result.adversarial_violations}};
    report["models"] = std::move(models);
    report["cells"] = std::move(cells);
    report["attacks"] = std::move(attacks);
    if (result.most_robust) {
      const auto i = *result.most_robust;
      report["most_robust"] = {{"model", family_name(result.cells[i].family)},
                               {"training", result.cells[i].training},
                               {"untargeted_malicious_accuracy", optional_json(result.cells[i + 1].metrics.malicious_accuracy)},
                               {"clean_macro_f1", optional_json(result.cells[i].metrics.macro_f1)}};
    }
    write_json(out / "report.json", report);
    write_text(out / "report.txt", render_text_report(result));
  } catch (const ConfigError& e) {
    fail(e.what());
    throw ConfigError("stage " + stage + ": " + e.what());
  } catch (const DataError& e) {
    fail(e.what());
    throw DataError("stage " + stage + ": " + e.what());
  } catch (const std::exception& e) {
    fail(e.what());
    throw RuntimeFailure("stage " + stage + ": " + e.what());
  }
  fs::remove(marker);
  return result;
}

}  // namespace flowguard
