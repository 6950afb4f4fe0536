#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "coid/tensor.hpp"

namespace coid {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named trainable tensors plus Adam moment estimates.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    ad::Tensor param;
    Matrix m;  // first moment
    Matrix v;  // second moment
  };

  const ad::Tensor& add(const std::string& name, Matrix init);
  /// Uniform in +-sqrt(6 / (fan_in + fan_out)), fan_in = rows.
  const ad::Tensor& add_glorot(const std::string& name, Index rows, Index cols, RngStream& rng);
  const ad::Tensor& add_zeros(const std::string& name, Index rows, Index cols);

  const ad::Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t value_count() const;

  void zero_grad();
  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  /// Deep copy (fresh parameter nodes, same values and optimizer state).
  ParamStore clone() const;

  nlohmann::json to_json() const;
  static ParamStore from_json(const nlohmann::json& j);

 private:
  std::vector<Entry> entries_;
  std::int64_t step_ = 0;
};

/// One bias-corrected Adam update from the accumulated gradients, then clears them.
/// Throws NumericError when no parameter carries a gradient or a gradient is non-finite.
void adam_step(ParamStore& store, const AdamConfig& cfg);

std::uint64_t config_hash(const nlohmann::json& config);

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ParamStore params;
  nlohmann::json config;
  nlohmann::json extra;  // training bookkeeping (epoch, best val loss, ...)
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace coid
