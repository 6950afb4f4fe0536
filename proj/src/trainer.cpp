#include "coid/trainer.hpp"

#include <cmath>
#include <numeric>

#include "coid/error.hpp"
#include "coid/parallel.hpp"

namespace coid {

namespace {

enum StreamLabel : std::uint64_t { kInit = 11, kShuffle = 12, kStep = 13, kValidation = 14 };

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (!(lr >= 0.0)) throw ConfigError("train: lr must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs}, {"lr", cfg.lr}, {"batch_size", cfg.batch_size}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "epochs") cfg.epochs = value.get<int>();
      else if (key == "lr") cfg.lr = value.get<double>();
      else if (key == "batch_size") cfg.batch_size = value.get<int>();
      else throw ConfigError("train config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

namespace {

nlohmann::json nullable(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }
double from_nullable(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

nlohmann::json TrainState::bookkeeping() const {
  nlohmann::json log_json = nlohmann::json::array();
  for (const auto& e : log)
    log_json.push_back({{"epoch", e.epoch}, {"step", e.step}, {"train_loss", nullable(e.train_loss)},
                        {"val_loss", nullable(e.val_loss)}});
  return {{"epochs_done", epochs_done}, {"best_val", nullable(best_val)}, {"log", log_json}};
}

void TrainState::restore_bookkeeping(const nlohmann::json& j) {
  try {
    epochs_done = j.at("epochs_done").get<int>();
    best_val = j.at("best_val").is_null() ? std::numeric_limits<double>::infinity() : j.at("best_val").get<double>();
    log.clear();
    for (const auto& e : j.at("log"))
      log.push_back({e.at("epoch").get<int>(), e.at("step").get<std::int64_t>(),
                     from_nullable(e.at("train_loss")), from_nullable(e.at("val_loss"))});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint bookkeeping: ") + e.what());
  }
}

PreparedInstance prepare(const Instance& inst) {
  PreparedInstance p;
  p.seed = inst.seed;
  p.a = PreparedGraph::from(inst.view_a);
  p.b = PreparedGraph::from(inst.view_b);
  p.y_star = ground_truth_matrix(p.a.size(), p.b.size(), inst.gt_pairs);
  return p;
}

std::vector<PreparedInstance> prepare_all(const std::vector<Instance>& instances, int workers) {
  std::vector<PreparedInstance> out(instances.size());
  parallel_for(instances.size(), workers, [&](std::size_t i) { out[i] = prepare(instances[i]); });
  return out;
}

Trainer::Trainer(const CoidModel& model, TrainConfig cfg, std::uint64_t seed)
    : model_(model), cfg_(cfg), seed_(seed) {
  cfg_.validate();
}

TrainState Trainer::init() const {
  TrainState s;
  s.params = model_.init_params(RngStream::derive(seed_, {kInit}));
  s.best = s.params.clone();
  return s;
}

ad::Tensor Trainer::instance_loss(const ParamStore& store, const PreparedInstance& inst, bool train,
                                  std::uint64_t key) const {
  const ForwardResult f = model_.forward(store, inst.a, inst.b, train, key);
  return matching_loss(f.s, inst.y_star, model_.config().loss_target);
}

double Trainer::mean_loss(const ParamStore& store, const std::vector<PreparedInstance>& set) const {
  const ad::NoGrad no_grad;
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& inst : set) {
    if (inst.empty()) continue;
    total += instance_loss(store, inst, false, RngStream::derive(seed_, {kValidation, inst.seed})).item();
    ++count;
  }
  return count > 0 ? total / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

std::uint64_t Trainer::train_key(std::int64_t step, std::uint64_t instance_seed) const {
  return RngStream::derive(seed_, {kStep, static_cast<std::uint64_t>(step), instance_seed});
}

std::vector<std::size_t> Trainer::epoch_order(int epoch, std::size_t n) const {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(RngStream::derive(seed_, {kShuffle, static_cast<std::uint64_t>(epoch)}));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

void Trainer::run(TrainState& state, const std::vector<PreparedInstance>& train,
                  const std::vector<PreparedInstance>& val,
                  const std::function<void(const EpochLog&, const TrainState&)>& on_epoch) const {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (!train[i].empty()) usable.push_back(i);
  if (usable.empty()) throw DataError("training split has no instance with two non-empty views");
  model_.check_compatible(state.params);

  const AdamConfig adam{cfg_.lr};
  for (int epoch = state.epochs_done + 1; epoch <= cfg_.epochs; ++epoch) {
    const auto order = epoch_order(epoch, usable.size());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg_.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg_.batch_size));
      const double weight = 1.0 / static_cast<double>(end - start);
      state.params.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const auto& inst = train[usable[order[k]]];
        const auto loss = instance_loss(state.params, inst, true, train_key(state.params.step(), inst.seed));
        if (!std::isfinite(loss.item())) throw NumericError("non-finite training loss");
        epoch_loss += loss.item();
        ad::backward(ad::scale(loss, weight));
      }
      adam_step(state.params, adam);
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.step = state.params.step();
    entry.train_loss = epoch_loss / static_cast<double>(usable.size());
    entry.val_loss = mean_loss(state.params, val);
    const double score = std::isfinite(entry.val_loss) ? entry.val_loss : entry.train_loss;
    if (score < state.best_val) {
      state.best_val = score;
      state.best = state.params.clone();
    }
    state.epochs_done = epoch;
    state.log.push_back(entry);
    if (on_epoch) on_epoch(entry, state);
  }
}

}  // namespace coid
