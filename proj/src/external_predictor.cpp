#include "flowguard/external_predictor.hpp"

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>

#include <sys/wait.h>
#include <unistd.h>

namespace flowguard {

ExternalPredictor::ExternalPredictor(const std::string& command, std::vector<std::string> classes)
    : classes_(std::move(classes)) {
  if (command.empty()) throw ConfigError("external predictor command is empty");
  std::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0) throw RuntimeFailure(std::string("pipe: ") + std::strerror(errno));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw RuntimeFailure(std::string("pipe: ") + std::strerror(errno));
  }
  pid_ = fork();
  if (pid_ < 0) throw RuntimeFailure(std::string("fork: ") + std::strerror(errno));
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = fdopen(out_pipe[0], "r");
  if (!from_child_) throw RuntimeFailure("cannot read from external predictor");
}

ExternalPredictor::~ExternalPredictor() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_) std::fclose(from_child_);
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 100; ++i) {
      if (waitpid(pid_, &status, WNOHANG) != 0) return;
      usleep(10000);
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
  }
}

std::string ExternalPredictor::predict(RowRef row) const {
  std::lock_guard lock(mutex_);
  const std::vector<double> features(row.data(), row.data() + row.size());
  const std::string request = json{{"features", features}}.dump() + "\n";
  std::size_t written = 0;
  while (written < request.size()) {
    const auto n = write(to_child_, request.data() + written, request.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw RuntimeFailure("external predictor closed its input");
    }
    written += static_cast<std::size_t>(n);
  }

  std::string line;
  for (int ch; (ch = std::fgetc(from_child_)) != '\n';) {
    if (ch == EOF) throw RuntimeFailure("external predictor exited without answering");
    line.push_back(static_cast<char>(ch));
  }
  json response;
  try {
    response = json::parse(line);
  } catch (const json::exception&) {
    throw RuntimeFailure("malformed predictor response: " + line.substr(0, 200));
  }
  if (!response.is_object() || response.size() != 1 || !response.contains("label") || !response["label"].is_string()) {
    throw RuntimeFailure("malformed predictor response: " + line.substr(0, 200));
  }
  auto label = response["label"].get<std::string>();
  if (!classes_.empty() && std::find(classes_.begin(), classes_.end(), label) == classes_.end()) {
    throw RuntimeFailure("predictor answered unknown class '" + label + "'");
  }
  return label;
}

}  // namespace flowguard
