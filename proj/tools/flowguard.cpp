// flowguard command-line interface.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime failure.

#include "flowguard/attack.hpp"
#include "flowguard/external_predictor.hpp"
#include "flowguard/pipeline.hpp"
#include "flowguard/synthetic.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace flowguard;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("--config", c.config, "JSON configuration file");
  if (config_required) opt->required();
  cmd->add_option("--seed", c.seed, "Override the configured master seed");
  cmd->add_option("--out", c.out, "Output path");
  cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
}

RunConfig run_config(const Common& c) {
  RunConfig config = load_run_config(c.config);
  if (c.seed) config.seed = *c.seed;
  if (c.threads > 0) config.threads = c.threads;
  if (!c.out.empty()) config.output_dir = c.out;
  return config;
}

void write_json(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

fs::path require_out(const Common& c) {
  if (c.out.empty()) throw ConfigError("--out is required");
  return c.out;
}

EncodedDataset read_data(const RunConfig& config, const std::string& data, const std::string& schema) {
  return read_encoded_csv(data, load_schema(schema), config.scenario == Scenario::binary);
}

std::unique_ptr<Predictor> open_predictor(const std::string& model, const std::string& command,
                                          const std::vector<std::string>& classes) {
  if (model.empty() == command.empty()) throw ConfigError("pass exactly one of --model and --predictor");
  if (!model.empty()) return load_model(model);
  return std::make_unique<ExternalPredictor>(command, classes);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained adversarial evaluation of tree-based network intrusion detectors"};
  app.require_subcommand(1);

  Common synth_opts;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic flow dataset and its schema");
  add_common(synth, synth_opts);

  Common pre_opts;
  auto* preprocess = app.add_subcommand("preprocess", "Encode the configured dataset and split train/holdout");
  add_common(preprocess, pre_opts);

  Common fit_opts;
  std::string fit_data, fit_schema, fit_name = "train";
  auto* fit = app.add_subcommand("fit-patterns", "Fit per-class perturbation patterns on an encoded set");
  add_common(fit, fit_opts);
  fit->add_option("--data", fit_data, "Encoded CSV")->required();
  fit->add_option("--schema", fit_schema, "Schema JSON")->required();
  fit->add_option("--name", fit_name, "Name recorded as the fitting set");

  Common train_opts;
  std::string train_data, train_schema, train_family;
  auto* train = app.add_subcommand("train", "Grid-search and train one model family");
  add_common(train, train_opts);
  train->add_option("--data", train_data, "Encoded training CSV")->required();
  train->add_option("--schema", train_schema, "Schema JSON")->required();
  train->add_option("--family", train_family, "Model family from the configuration")->required();

  Common aug_opts;
  std::string aug_data, aug_schema, aug_patterns;
  auto* augment = app.add_subcommand("augment", "Append one perturbed copy of every malicious row");
  add_common(augment, aug_opts);
  augment->add_option("--data", aug_data, "Encoded training CSV")->required();
  augment->add_option("--schema", aug_schema, "Schema JSON")->required();
  augment->add_option("--patterns", aug_patterns, "Patterns fitted on the same set")->required();

  Common atk_opts;
  std::string atk_data, atk_schema, atk_patterns, atk_model, atk_command, atk_goal = "untargeted";
  auto* attack = app.add_subcommand("attack", "Run a budgeted evasion attack on a holdout set");
  add_common(attack, atk_opts);
  attack->add_option("--data", atk_data, "Encoded holdout CSV")->required();
  attack->add_option("--schema", atk_schema, "Schema JSON")->required();
  attack->add_option("--patterns", atk_patterns, "Patterns fitted on the holdout set")->required();
  attack->add_option("--model", atk_model, "Model JSON");
  attack->add_option("--predictor", atk_command, "Shell command speaking the NDJSON predictor protocol");
  attack->add_option("--goal", atk_goal, "untargeted or targeted");

  Common eval_opts;
  std::string eval_data, eval_schema, eval_model, eval_command;
  auto* evaluate = app.add_subcommand("evaluate", "Score a model on an encoded set");
  add_common(evaluate, eval_opts);
  evaluate->add_option("--data", eval_data, "Encoded CSV")->required();
  evaluate->add_option("--schema", eval_schema, "Schema JSON")->required();
  evaluate->add_option("--model", eval_model, "Model JSON");
  evaluate->add_option("--predictor", eval_command, "Shell command speaking the NDJSON predictor protocol");

  Common run_opts;
  auto* run = app.add_subcommand("run", "Run the full experiment and write reports");
  add_common(run, run_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      auto spec = load_synthetic_spec(synth_opts.config);
      if (synth_opts.seed) spec.seed = *synth_opts.seed;
      const auto out = require_out(synth_opts);
      fs::create_directories(out);
      const auto data = generate_synthetic(spec);
      write_csv_table(out / "data.csv", data.table);
      save_schema(out / "schema.json", data.schema);
      std::cout << "wrote " << data.table.rows.size() << " rows to " << (out / "data.csv").string() << '\n';
    } else if (*preprocess) {
      const auto config = run_config(pre_opts);
      config.validate();
      const auto out = require_out(pre_opts);
      fs::create_directories(out);
      const auto prepared = prepare_dataset(config);
      const auto split = stratified_split(prepared.data, 1.0 - config.holdout_ratio, StageSeeds(config.seed).split);
      save_schema(out / "schema.json", prepared.schema);
      write_encoded_csv(out / "train.csv", split.train, prepared.schema.label_column);
      write_encoded_csv(out / "holdout.csv", split.holdout, prepared.schema.label_column);
      std::cout << "train " << split.train.size() << " rows, holdout " << split.holdout.size() << " rows\n";
    } else if (*fit) {
      const auto config = run_config(fit_opts);
      const auto data = read_data(config, fit_data, fit_schema);
      write_json(require_out(fit_opts), patterns_to_json(fit_patterns(data, config.subsets, fit_name)));
    } else if (*augment) {
      const auto config = run_config(aug_opts);
      const auto schema = load_schema(aug_schema);
      const auto data = read_data(config, aug_data, aug_schema);
      const auto patterns = patterns_from_json(read_json(aug_patterns));
      const auto out = augment_training_set(data, patterns, config.constraints, StageSeeds(config.seed).augment);
      write_encoded_csv(require_out(aug_opts), out, schema.label_column);
    } else if (*train) {
      const auto config = run_config(train_opts);
      const auto family = family_from_string(train_family);
      const auto it = std::find_if(config.models.begin(), config.models.end(),
                                   [&](const ModelSpec& m) { return m.family == family; });
      if (it == config.models.end()) throw ConfigError("family '" + train_family + "' is not configured");
      const auto data = read_data(config, train_data, train_schema);
      auto search = grid_search_cv(family, it->grid, data, config.cv_folds, StageSeeds(config.seed).train, config.threads);
      const fs::path out = require_out(train_opts);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      save_model(out, *search.model);
      write_json(out.string() + ".cv.json", grid_result_to_json(search));
    } else if (*attack) {
      const auto config = run_config(atk_opts);
      const auto schema = load_schema(atk_schema);
      const auto data = read_data(config, atk_data, atk_schema);
      const auto patterns = patterns_from_json(read_json(atk_patterns));
      const auto predictor = open_predictor(atk_model, atk_command, data.classes);
      AttackConfig ac = config.attack;
      ac.goal = attack_goal_from_string(atk_goal);
      ac.seed = StageSeeds(config.seed).attack;
      ac.threads = config.threads;
      const auto result = run_evasion_attack(data, *predictor, patterns, config.constraints, ac);
      const fs::path out = require_out(atk_opts);
      fs::create_directories(out);
      write_adversarial_set(out / "adversarial.csv", result.adversarial, schema.label_column);
      write_trace_csv(out / "trace.csv", result.trace);
      write_json(out / "trace.json", trace_to_json(result.trace));
      std::cout << "queries " << result.trace.queries << ", accuracy after attack "
                << format_fixed(result.trace.accuracy.back(), 4) << '\n';
    } else if (*evaluate) {
      const auto config = run_config(eval_opts);
      const auto data = read_data(config, eval_data, eval_schema);
      const auto predictor = open_predictor(eval_model, eval_command, data.classes);
      std::vector<std::string> truth, predicted;
      for (std::size_t r = 0; r < data.size(); ++r) {
        truth.push_back(data.classes[static_cast<std::size_t>(data.labels[r])]);
        predicted.push_back(predictor->predict(data.values.row(static_cast<Eigen::Index>(r))));
      }
      const auto report = evaluate_metrics(confusion(truth, predicted, data.classes), data.benign_label());
      const json doc = metrics_to_json(report);
      if (eval_opts.out.empty()) {
        std::cout << doc.dump(2) << '\n';
      } else {
        write_json(eval_opts.out, doc);
      }
    } else if (*run) {
      const auto result = run_pipeline(run_config(run_opts));
      std::cout << render_text_report(result);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
