#pragma once

#include "flowguard/model.hpp"

#include <cstdio>
#include <mutex>

namespace flowguard {

/// Runs `command` under /bin/sh and talks newline-delimited JSON over its
/// standard streams: one `{"features": [...]}` request per prediction, one
/// `{"label": "<class>"}` response per request, in order.
class ExternalPredictor : public Predictor {
 public:
  /// When `classes` is non-empty, labels outside it are protocol violations.
  explicit ExternalPredictor(const std::string& command, std::vector<std::string> classes = {});
  ~ExternalPredictor() override;
  ExternalPredictor(const ExternalPredictor&) = delete;
  ExternalPredictor& operator=(const ExternalPredictor&) = delete;

  std::string predict(RowRef row) const override;
  bool concurrent() const override { return false; }

 private:
  std::vector<std::string> classes_;
  int pid_ = -1;
  int to_child_ = -1;
  std::FILE* from_child_ = nullptr;
  mutable std::mutex mutex_;
};

}  // namespace flowguard
