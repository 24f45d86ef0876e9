#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowguard {

/// Dense sample matrix, one flow per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using RowRef = Eigen::Ref<const RowVector>;

/// Base of every error the library raises. `exit_code()` is what the CLI returns.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 3; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 1; }
};

class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

// SplitMix64 finalizer; used to derive independent RNG streams.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream);

/// Seeded generator with platform-independent distributions.
///
/// The standard distributions are implementation-defined, so sampling goes
/// through hand-written transforms of the raw mt19937_64 output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n must be positive.
  std::size_t below(std::size_t n);
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) { shuffle(std::span<T>(items)); }

 private:
  std::mt19937_64 engine_;
};

double round_to_decimals(double value, int decimals);
/// Fixed-point text with `decimals` places.
std::string format_fixed(double value, int decimals);
/// Shortest text that parses back to the same double.
std::string format_double(double value);
/// Parses the whole of `text` as a finite double.
bool parse_double(std::string_view text, double& out);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception
/// (by index) is rethrown after all workers join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

std::uint64_t fnv1a(std::string_view text, std::uint64_t hash = 1469598103934665603ULL);

}  // namespace flowguard
