#pragma once

#include <cstdint>
#include <initializer_list>

namespace coid {

// Counter-based random stream. Every draw is a pure function of
// (key, counter), so a stream can be re-created anywhere from its key and
// results never depend on thread scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  /// Key derived from a parent key and a list of labels (instance index,
  /// agent id, step number, ...).
  static std::uint64_t derive(std::uint64_t parent, std::initializer_list<std::uint64_t> labels);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace coid
