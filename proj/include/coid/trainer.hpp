#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <nlohmann/json.hpp>
#include <vector>

#include "coid/dataset.hpp"
#include "coid/model.hpp"
#include "coid/param_store.hpp"

namespace coid {

struct TrainConfig {
  int epochs = 60;
  double lr = 1e-3;
  int batch_size = 8;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochLog {
  int epoch = 0;  // 1-based
  std::int64_t step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when there is no validation split
};

struct TrainState {
  ParamStore params;
  ParamStore best;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_done = 0;
  std::vector<EpochLog> log;

  nlohmann::json bookkeeping() const;  // everything but the tensors
  void restore_bookkeeping(const nlohmann::json& j);
};

/// Model inputs and ground truth for one instance.
struct PreparedInstance {
  std::uint64_t seed = 0;
  PreparedGraph a;
  PreparedGraph b;
  Matrix y_star;
  bool empty() const { return a.size() == 0 || b.size() == 0; }
};

PreparedInstance prepare(const Instance& inst);
std::vector<PreparedInstance> prepare_all(const std::vector<Instance>& instances, int workers = 1);

// Sequential mini-batch training. Instance order, dropout masks and consensus
// signatures are all keyed by the run seed, so two runs with the same seed
// produce identical loss curves.
class Trainer {
 public:
  Trainer(const CoidModel& model, TrainConfig cfg, std::uint64_t seed);

  TrainState init() const;

  /// Loss of one instance; `train` enables dropout.
  ad::Tensor instance_loss(const ParamStore& store, const PreparedInstance& inst, bool train,
                           std::uint64_t key) const;
  /// Mean evaluation-mode loss over non-empty instances (NaN when there are none).
  double mean_loss(const ParamStore& store, const std::vector<PreparedInstance>& set) const;

  /// Runs epochs epochs_done+1 .. cfg.epochs. Throws DataError when the
  /// training split has no usable instance.
  void run(TrainState& state, const std::vector<PreparedInstance>& train,
           const std::vector<PreparedInstance>& val,
           const std::function<void(const EpochLog&, const TrainState&)>& on_epoch = {}) const;

  /// Key of the stochastic streams used for an instance at a given step.
  std::uint64_t train_key(std::int64_t step, std::uint64_t instance_seed) const;
  std::vector<std::size_t> epoch_order(int epoch, std::size_t n) const;

 private:
  const CoidModel& model_;
  TrainConfig cfg_;
  std::uint64_t seed_;
};

}  // namespace coid
