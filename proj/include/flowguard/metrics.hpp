#pragma once

#include "json.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flowguard {

using json = nlohmann::json;

/// counts[i][j]: rows of true class i predicted as class j.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> counts;

  explicit ConfusionMatrix(std::vector<std::string> class_names = {});
  std::size_t total() const;
  std::size_t support(std::size_t cls) const;
  std::size_t predicted(std::size_t cls) const;
  int index(std::string_view name) const;
};

ConfusionMatrix confusion(std::span<const std::string> truth, std::span<const std::string> predicted,
                          const std::vector<std::string>& classes);
ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          const std::vector<std::string>& classes);

// Undefined rates (empty denominators) come back as nullopt.
std::optional<double> accuracy(const ConfusionMatrix& cm);
std::optional<double> accuracy_malicious_only(const ConfusionMatrix& cm, std::string_view benign);
std::optional<double> precision(const ConfusionMatrix& cm, std::size_t cls);
std::optional<double> recall(const ConfusionMatrix& cm, std::size_t cls);
std::optional<double> f1(const ConfusionMatrix& cm, std::size_t cls);
/// Mean F1 over classes with at least one true row; a zero precision or
/// recall denominator counts as 0. nullopt when no class has support.
std::optional<double> macro_f1(const ConfusionMatrix& cm);
std::optional<double> fpr(const ConfusionMatrix& cm, std::string_view benign);

struct ClassMetrics {
  std::string name;
  std::size_t support = 0;
  std::optional<double> precision, recall, f1;
};

struct MetricsReport {
  std::optional<double> malicious_accuracy;
  std::optional<double> accuracy;
  std::optional<double> macro_f1;
  std::optional<double> fpr;
  std::vector<ClassMetrics> per_class;
  ConfusionMatrix matrix;
};

MetricsReport evaluate_metrics(const ConfusionMatrix& cm, std::string_view benign);
json metrics_to_json(const MetricsReport& report);
json confusion_to_json(const ConfusionMatrix& cm);

}  // namespace flowguard
