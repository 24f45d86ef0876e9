#include "flowguard/metrics.hpp"

#include "flowguard/common.hpp"

#include <algorithm>

namespace flowguard {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_names)
    : classes(std::move(class_names)), counts(classes.size(), std::vector<std::size_t>(classes.size(), 0)) {}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (auto c : row) n += c;
  }
  return n;
}

std::size_t ConfusionMatrix::support(std::size_t cls) const {
  std::size_t n = 0;
  for (auto c : counts[cls]) n += c;
  return n;
}

std::size_t ConfusionMatrix::predicted(std::size_t cls) const {
  std::size_t n = 0;
  for (const auto& row : counts) n += row[cls];
  return n;
}

int ConfusionMatrix::index(std::string_view name) const {
  const auto it = std::find(classes.begin(), classes.end(), name);
  return it == classes.end() ? -1 : static_cast<int>(it - classes.begin());
}

ConfusionMatrix confusion(std::span<const std::string> truth, std::span<const std::string> predicted,
                          const std::vector<std::string>& classes) {
  if (truth.size() != predicted.size()) throw DataError("label sequences differ in length");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = cm.index(truth[i]);
    const int p = cm.index(predicted[i]);
    if (t < 0) throw DataError("label '" + truth[i] + "' is not in the class list");
    if (p < 0) throw DataError("label '" + predicted[i] + "' is not in the class list");
    ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return cm;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          const std::vector<std::string>& classes) {
  if (truth.size() != predicted.size()) throw DataError("label sequences differ in length");
  ConfusionMatrix cm(classes);
  const auto k = static_cast<int>(classes.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= k || predicted[i] < 0 || predicted[i] >= k) {
      throw DataError("class index out of range at row " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return cm;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::size_t benign_index(const ConfusionMatrix& cm, std::string_view benign) {
  const int b = cm.index(benign);
  if (b < 0) throw DataError("benign label '" + std::string(benign) + "' is not in the class list");
  return static_cast<std::size_t>(b);
}

}  // namespace

std::optional<double> accuracy(const ConfusionMatrix& cm) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < cm.classes.size(); ++i) correct += cm.counts[i][i];
  return ratio(correct, cm.total());
}

std::optional<double> accuracy_malicious_only(const ConfusionMatrix& cm, std::string_view benign) {
  const auto b = benign_index(cm, benign);
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < cm.classes.size(); ++i) {
    if (i == b) continue;
    correct += cm.counts[i][i];
    total += cm.support(i);
  }
  return ratio(correct, total);
}

std::optional<double> precision(const ConfusionMatrix& cm, std::size_t cls) {
  return ratio(cm.counts[cls][cls], cm.predicted(cls));
}

std::optional<double> recall(const ConfusionMatrix& cm, std::size_t cls) {
  return ratio(cm.counts[cls][cls], cm.support(cls));
}

std::optional<double> f1(const ConfusionMatrix& cm, std::size_t cls) {
  const auto p = precision(cm, cls);
  const auto r = recall(cm, cls);
  if (!p || !r) return std::nullopt;
  if (*p + *r == 0.0) return 0.0;
  return 2.0 * *p * *r / (*p + *r);
}

std::optional<double> macro_f1(const ConfusionMatrix& cm) {
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < cm.classes.size(); ++i) {
    if (cm.support(i) == 0) continue;
    ++present;
    const double p = precision(cm, i).value_or(0.0);
    const double r = recall(cm, i).value_or(0.0);
    sum += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  if (present == 0) return std::nullopt;
  return sum / static_cast<double>(present);
}

std::optional<double> fpr(const ConfusionMatrix& cm, std::string_view benign) {
  const auto b = benign_index(cm, benign);
  const std::size_t rows = cm.support(b);
  return ratio(rows - cm.counts[b][b], rows);
}

MetricsReport evaluate_metrics(const ConfusionMatrix& cm, std::string_view benign) {
  MetricsReport report;
  report.matrix = cm;
  report.malicious_accuracy = accuracy_malicious_only(cm, benign);
  report.accuracy = accuracy(cm);
  report.macro_f1 = macro_f1(cm);
  report.fpr = fpr(cm, benign);
  for (std::size_t i = 0; i < cm.classes.size(); ++i) {
    report.per_class.push_back({cm.classes[i], cm.support(i), precision(cm, i), recall(cm, i), f1(cm, i)});
  }
  return report;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json confusion_to_json(const ConfusionMatrix& cm) {
  return {{"classes", cm.classes}, {"counts", cm.counts}};
}

json metrics_to_json(const MetricsReport& report) {
  json per_class = json::array();
  for (const auto& c : report.per_class) {
    per_class.push_back({{"class", c.name},
                         {"support", c.support},
                         {"precision", optional_json(c.precision)},
                         {"recall", optional_json(c.recall)},
                         {"f1", optional_json(c.f1)}});
  }
  return {{"malicious_accuracy", optional_json(report.malicious_accuracy)},
          {"accuracy", optional_json(report.accuracy)},
          {"macro_f1", optional_json(report.macro_f1)},
          {"fpr", optional_json(report.fpr)},
          {"per_class", std::move(per_class)},
          {"confusion", confusion_to_json(report.matrix)}};
}

}  // namespace flowguard
