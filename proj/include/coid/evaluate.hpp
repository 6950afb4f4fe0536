#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

#include "coid/dataset.hpp"
#include "coid/metrics.hpp"
#include "coid/model.hpp"
#include "coid/trainer.hpp"

namespace coid {

struct EvalOptions {
  std::uint64_t seed = 0;  // keys the consensus signatures
  int workers = 1;         // never changes results
};

/// Stream key of one instance at evaluation time.
std::uint64_t eval_key(std::uint64_t eval_seed, std::uint64_t instance_seed);

/// Final score matrices plus ground truth, ready for thresholding.
struct ScoredSet {
  std::vector<Matrix> scores;
  std::vector<PairList> gt;
};

PairList gt_pairs(const PreparedInstance& inst);

ScoredSet score_instances(const CoidModel& model, const ParamStore& store,
                          const std::vector<PreparedInstance>& instances, const EvalOptions& opts);

/// Micro-averaged counts at one threshold.
PrPoint evaluate_scores(const ScoredSet& set, double theta, RowStatistic stat = RowStatistic::kSoftmax,
                        bool mutual = false, std::int64_t* empty_retrievals = nullptr);
std::vector<PrPoint> sweep_theta(const ScoredSet& set, const std::vector<double>& grid,
                                 RowStatistic stat = RowStatistic::kSoftmax, bool mutual = false);

/// Report at `theta`, without a curve.
MetricsReport report_at(const ScoredSet& set, double theta, RowStatistic stat = RowStatistic::kSoftmax,
                        bool mutual = false);

/// Metrics at the model's configured theta.
MetricsReport evaluate(const CoidModel& model, const ParamStore& store,
                       const std::vector<PreparedInstance>& instances, const EvalOptions& opts);

/// Metrics at the configured theta plus the curve over theta_grid(theta_max, steps) and its AUC.
MetricsReport pr_curve(const CoidModel& model, const ParamStore& store,
                       const std::vector<PreparedInstance>& instances, const EvalOptions& opts,
                       double theta_max = 0.5, int steps = 50);

enum class NoiseKind { kDepth, kGps };

struct NoiseLevelResult {
  double level = 0.0;
  MetricsReport report;
};

// Regenerates `split` of the dataset at each noise level with unchanged seeds
// and evaluates the model on it.
std::vector<NoiseLevelResult> sweep_noise(NoiseKind kind, const std::vector<double>& levels,
                                          const DatasetConfig& data, Split split, const CoidModel& model,
                                          const ParamStore& store, const EvalOptions& opts);

struct BaselineConfig {
  double appearance_theta = 0.0;  // row-std threshold of the appearance softmax
  double gps_gate = 4.0;          // m, pairs farther apart are dropped
};

nlohmann::json to_json(const BaselineConfig& cfg);
BaselineConfig baseline_config_from_json(const nlohmann::json& j);

/// S = X X'^T on raw features.
ScoredSet appearance_scores(const std::vector<PreparedInstance>& instances);
MetricsReport appearance_baseline(const std::vector<PreparedInstance>& instances, double theta);

/// Hungarian assignment on world-position distances, gated at `gate` metres.
PairList gps_assignment(const Matrix& world_a, const Matrix& world_b, double gate);
MetricsReport gps_baseline(const std::vector<PreparedInstance>& instances, double gate);

/// Picks the appearance threshold and the GPS gate that maximise F1 on `tuning`.
BaselineConfig tune_baselines(const std::vector<PreparedInstance>& tuning);

}  // namespace coid
