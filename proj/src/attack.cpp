#include "flowguard/attack.hpp"

#include <fstream>

namespace flowguard {

std::string_view to_string(AttackGoal goal) { return goal == AttackGoal::untargeted ? "untargeted" : "targeted"; }

AttackGoal attack_goal_from_string(std::string_view text) {
  if (text == "untargeted") return AttackGoal::untargeted;
  if (text == "targeted" || text == "targeted-benign") return AttackGoal::targeted;
  throw ConfigError("attack goal must be \"untargeted\" or \"targeted\", got \"" + std::string(text) + "\"");
}

AttackConfig AttackConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("attack configuration must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "mode" && key != "goal" && key != "max_attempts" && key != "seed" && key != "keep_final_attempt") {
      throw ConfigError("unknown attack setting '" + key + "'");
    }
  }
  AttackConfig c;
  if (doc.contains("mode")) {
    const auto mode = doc.at("mode").get<std::string>();
    if (mode == "simple") {
      c.mode = AttackMode::simple;
    } else if (mode == "full") {
      c.mode = AttackMode::full;
    } else {
      throw ConfigError("attack mode must be \"simple\" or \"full\"");
    }
  }
  if (doc.contains("goal")) c.goal = attack_goal_from_string(doc.at("goal").get<std::string>());
  if (doc.contains("max_attempts")) c.max_attempts = doc.at("max_attempts").get<int>();
  if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
  if (doc.contains("keep_final_attempt")) c.keep_final_attempt = doc.at("keep_final_attempt").get<bool>();
  if (c.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
  return c;
}

json AttackConfig::to_json() const {
  return {{"mode", mode == AttackMode::simple ? "simple" : "full"},
          {"goal", to_string(goal)},
          {"max_attempts", max_attempts},
          {"seed", seed},
          {"keep_final_attempt", keep_final_attempt}};
}

AttackConfig normalized(AttackConfig config, const EncodedDataset& data) {
  if (data.is_binary()) config.goal = AttackGoal::untargeted;
  if (config.mode == AttackMode::simple) config.max_attempts = 1;
  return config;
}

bool evasion_success(std::string_view truth, std::string_view predicted, AttackGoal goal, std::string_view benign) {
  return goal == AttackGoal::untargeted ? predicted != truth : predicted == benign;
}

namespace {

void check_patterns(const EncodedDataset& data, const PatternSet& patterns) {
  const auto layout = layout_fingerprint(data.columns);
  const auto counts = data.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (static_cast<int>(c) == data.benign || counts[c] == 0) continue;
    const auto it = patterns.find(static_cast<int>(c));
    if (it == patterns.end() || it->second.class_name != data.classes[c]) {
      throw DataError("no pattern sequence for class '" + data.classes[c] + "'");
    }
    if (it->second.layout != layout) throw DataError("patterns were fitted on a different column layout");
  }
}

}  // namespace

EncodedDataset augment_training_set(const EncodedDataset& train, const PatternSet& patterns,
                                    const std::vector<DomainConstraint>& domain, std::uint64_t seed) {
  check_patterns(train, patterns);
  const Perturber perturber(train.columns, domain);
  std::vector<std::size_t> malicious;
  for (std::size_t r = 0; r < train.size(); ++r) {
    if (train.labels[r] != train.benign) malicious.push_back(r);
  }
  EncodedDataset out = train;
  out.values.conservativeResize(static_cast<Eigen::Index>(train.size() + malicious.size()), Eigen::NoChange);
  for (std::size_t i = 0; i < malicious.size(); ++i) {
    const std::size_t r = malicious[i];
    Rng rng(derive_seed(seed, r));
    out.values.row(static_cast<Eigen::Index>(train.size() + i)) =
        perturber.perturb(train.values.row(static_cast<Eigen::Index>(r)), train.labels[r], patterns, rng);
    out.labels.push_back(train.labels[r]);
  }
  return out;
}

namespace {

struct RowOutcome {
  RowVector row;
  Provenance provenance;
  /// First query index (0 = baseline) at which the goal was met; -1 if never.
  int first_goal = -1;
  int queries = 0;
};

}  // namespace

AttackResult run_evasion_attack(const EncodedDataset& holdout, const Predictor& predictor, const PatternSet& patterns,
                                const std::vector<DomainConstraint>& domain, const AttackConfig& raw_config) {
  const AttackConfig config = normalized(raw_config, holdout);
  if (config.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
  check_patterns(holdout, patterns);
  const Perturber perturber(holdout.columns, domain);
  const std::string& benign = holdout.benign_label();

  std::vector<std::size_t> malicious;
  for (std::size_t r = 0; r < holdout.size(); ++r) {
    if (holdout.labels[r] != holdout.benign) malicious.push_back(r);
  }

  std::vector<RowOutcome> outcomes(malicious.size());
  const int threads = predictor.concurrent() ? config.threads : 1;
  parallel_for(malicious.size(), threads, [&](std::size_t i) {
    const std::size_t r = malicious[i];
    const int cls = holdout.labels[r];
    const std::string& truth = holdout.classes[static_cast<std::size_t>(cls)];
    const RowVector original = holdout.values.row(static_cast<Eigen::Index>(r));
    auto query = [&](const RowVector& row) {
      try {
        return predictor.predict(row);
      } catch (const std::exception& e) {
        throw RuntimeFailure("predictor failed on row " + std::to_string(r) + ": " + e.what());
      }
    };

    RowOutcome out;
    if (evasion_success(truth, query(original), config.goal, benign)) out.first_goal = 0;
    Rng rng(derive_seed(config.seed, r));
    RowVector current = original;
    for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
      current = perturber.perturb(current, cls, patterns, rng);
      ++out.queries;
      if (evasion_success(truth, query(current), config.goal, benign)) {
        out.provenance.evaded = true;
        if (out.first_goal < 0) out.first_goal = attempt;
        break;
      }
    }
    out.provenance.perturbed = true;
    out.provenance.attempts = out.queries;
    out.row = out.provenance.evaded || config.keep_final_attempt ? current : original;
    outcomes[i] = std::move(out);
  });

  AttackResult result;
  auto& adv = result.adversarial;
  adv.data = holdout;
  adv.provenance.assign(holdout.size(), Provenance{});
  auto& trace = result.trace;
  trace.goal = config.goal;
  trace.max_attempts = config.max_attempts;
  trace.malicious_rows = malicious.size();
  trace.classes = holdout.classes;
  trace.evasions_per_class.assign(holdout.classes.size(), 0);
  const auto attempts = static_cast<std::size_t>(config.max_attempts);
  std::vector<std::size_t> goal_by(attempts + 1, 0);
  trace.cumulative_evasions.assign(attempts + 1, 0);
  for (std::size_t i = 0; i < malicious.size(); ++i) {
    const std::size_t r = malicious[i];
    const auto& out = outcomes[i];
    adv.data.values.row(static_cast<Eigen::Index>(r)) = out.row;
    adv.provenance[r] = out.provenance;
    trace.queries += static_cast<std::size_t>(out.queries);
    if (out.first_goal >= 0) ++goal_by[static_cast<std::size_t>(out.first_goal)];
    if (out.provenance.evaded) {
      ++trace.cumulative_evasions[static_cast<std::size_t>(out.provenance.attempts)];
      ++trace.evasions_per_class[static_cast<std::size_t>(holdout.labels[r])];
    }
  }
  std::size_t met = 0;
  for (std::size_t k = 0; k <= attempts; ++k) {
    met += goal_by[k];
    if (k > 0) trace.cumulative_evasions[k] += trace.cumulative_evasions[k - 1];
    trace.accuracy.push_back(malicious.empty() ? 1.0
                                               : 1.0 - static_cast<double>(met) / static_cast<double>(malicious.size()));
  }
  return result;
}

json provenance_to_json(const AdversarialSet& set) {
  json rows = json::array();
  for (const auto& p : set.provenance) {
    if (!p.perturbed) {
      rows.push_back({{"status", "original"}});
    } else {
      rows.push_back({{"status", "perturbed"}, {"attempts", p.attempts}, {"evaded", p.evaded}});
    }
  }
  return {{"rows", std::move(rows)}};
}

json trace_to_json(const AttackTrace& trace) {
  json per_class = json::object();
  for (std::size_t c = 0; c < trace.classes.size(); ++c) per_class[trace.classes[c]] = trace.evasions_per_class[c];
  return {{"goal", to_string(trace.goal)},
          {"max_attempts", trace.max_attempts},
          {"malicious_rows", trace.malicious_rows},
          {"queries", trace.queries},
          {"accuracy", trace.accuracy},
          {"cumulative_evasions", trace.cumulative_evasions},
          {"evasions_per_class", std::move(per_class)}};
}

void write_trace_csv(const std::filesystem::path& path, const AttackTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "attempt,accuracy,cumulative_evasions\n";
  for (std::size_t k = 0; k < trace.accuracy.size(); ++k) {
    out << k << ',' << format_fixed(trace.accuracy[k], 6) << ',' << trace.cumulative_evasions[k] << '\n';
  }
}

void write_adversarial_set(const std::filesystem::path& path, const AdversarialSet& set, std::string_view label_column) {
  write_encoded_csv(path, set.data, label_column);
  std::ofstream out(path.string() + ".provenance.json", std::ios::binary);
  if (!out) throw DataError("cannot write provenance for " + path.string());
  out << provenance_to_json(set).dump() << '\n';
}

}  // namespace flowguard
