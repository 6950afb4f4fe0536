#include "coid/evaluate.hpp"

#include "coid/error.hpp"
#include "coid/hungarian.hpp"
#include "coid/parallel.hpp"

namespace coid {

std::uint64_t eval_key(std::uint64_t eval_seed, std::uint64_t instance_seed) {
  return RngStream::derive(eval_seed, {0xE7A1, instance_seed});
}

PairList gt_pairs(const PreparedInstance& inst) {
  PairList out;
  for (Index i = 0; i < inst.y_star.rows(); ++i)
    for (Index j = 0; j < inst.y_star.cols(); ++j)
      if (inst.y_star(i, j) != 0.0) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
  return out;
}

ScoredSet score_instances(const CoidModel& model, const ParamStore& store,
                          const std::vector<PreparedInstance>& instances, const EvalOptions& opts) {
  model.check_compatible(store);
  ScoredSet set;
  set.scores.resize(instances.size());
  set.gt.resize(instances.size());
  parallel_for(instances.size(), opts.workers, [&](std::size_t k) {
    const ad::NoGrad no_grad;
    const auto& inst = instances[k];
    const Matrix s = model.forward(store, inst.a, inst.b, false, eval_key(opts.seed, inst.seed)).s.value();
    if (!s.allFinite()) throw NumericError("non-finite scores on instance " + std::to_string(inst.seed));
    set.scores[k] = s;
    set.gt[k] = gt_pairs(inst);
  });
  return set;
}

PrPoint evaluate_scores(const ScoredSet& set, double theta, RowStatistic stat, bool mutual,
                        std::int64_t* empty_retrievals) {
  PrPoint p;
  p.theta = theta;
  std::int64_t empty = 0;
  for (std::size_t k = 0; k < set.scores.size(); ++k) {
    const MatchResult r = decide(set.scores[k], theta, stat, mutual);
    if (r.pairs.empty()) ++empty;
    p.counts += count_pairs(r.pairs, set.gt[k]);
  }
  p.prf = precision_recall_f1(p.counts);
  if (empty_retrievals) *empty_retrievals = empty;
  return p;
}

std::vector<PrPoint> sweep_theta(const ScoredSet& set, const std::vector<double>& grid, RowStatistic stat,
                                 bool mutual) {
  std::vector<PrPoint> curve;
  curve.reserve(grid.size());
  for (double theta : grid) curve.push_back(evaluate_scores(set, theta, stat, mutual));
  return curve;
}

MetricsReport report_at(const ScoredSet& set, double theta, RowStatistic stat, bool mutual) {
  MetricsReport r;
  const PrPoint p = evaluate_scores(set, theta, stat, mutual, &r.empty_retrievals);
  r.theta = theta;
  r.counts = p.counts;
  r.prf = p.prf;
  r.instances = static_cast<std::int64_t>(set.scores.size());
  return r;
}

MetricsReport evaluate(const CoidModel& model, const ParamStore& store,
                       const std::vector<PreparedInstance>& instances, const EvalOptions& opts) {
  const auto& m = model.config().matcher;
  return report_at(score_instances(model, store, instances, opts), m.theta, m.row_statistic, m.mutual);
}

MetricsReport pr_curve(const CoidModel& model, const ParamStore& store,
                       const std::vector<PreparedInstance>& instances, const EvalOptions& opts,
                       double theta_max, int steps) {
  const auto& m = model.config().matcher;
  const ScoredSet set = score_instances(model, store, instances, opts);
  MetricsReport r = report_at(set, m.theta, m.row_statistic, m.mutual);
  r.pr_curve = sweep_theta(set, theta_grid(theta_max, steps), m.row_statistic, m.mutual);
  r.auc = pr_auc(r.pr_curve);
  return r;
}

std::vector<NoiseLevelResult> sweep_noise(NoiseKind kind, const std::vector<double>& levels,
                                          const DatasetConfig& data, Split split, const CoidModel& model,
                                          const ParamStore& store, const EvalOptions& opts) {
  std::vector<NoiseLevelResult> out;
  for (double level : levels) {
    if (!(level >= 0.0)) throw ConfigError("noise level must be >= 0");
    DatasetConfig cfg = data;
    (kind == NoiseKind::kDepth ? cfg.sim.sigma_depth : cfg.sim.sigma_gps) = level;
    const auto instances = prepare_all(generate_split(cfg, split, opts.workers), opts.workers);
    out.push_back({level, evaluate(model, store, instances, opts)});
  }
  return out;
}

nlohmann::json to_json(const BaselineConfig& cfg) {
  return {{"appearance_theta", cfg.appearance_theta}, {"gps_gate", cfg.gps_gate}};
}

BaselineConfig baseline_config_from_json(const nlohmann::json& j) {
  BaselineConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "appearance_theta") cfg.appearance_theta = value.get<double>();
      else if (key == "gps_gate") cfg.gps_gate = value.get<double>();
      else throw ConfigError("baseline config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("baseline config: ") + e.what());
  }
  if (!(cfg.appearance_theta >= 0.0) || !(cfg.gps_gate > 0.0))
    throw ConfigError("baseline config: appearance_theta must be >= 0 and gps_gate > 0");
  return cfg;
}

ScoredSet appearance_scores(const std::vector<PreparedInstance>& instances) {
  ScoredSet set;
  for (const auto& inst : instances) {
    set.scores.push_back(inst.a.x.value() * inst.b.x.value().transpose());
    set.gt.push_back(gt_pairs(inst));
  }
  return set;
}

MetricsReport appearance_baseline(const std::vector<PreparedInstance>& instances, double theta) {
  return report_at(appearance_scores(instances), theta);
}

PairList gps_assignment(const Matrix& world_a, const Matrix& world_b, double gate) {
  Matrix dist(world_a.rows(), world_b.rows());
  for (Index i = 0; i < dist.rows(); ++i)
    for (Index j = 0; j < dist.cols(); ++j) dist(i, j) = (world_a.row(i) - world_b.row(j)).norm();
  const auto assignment = hungarian(dist);
  PairList pairs;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const int j = assignment[i];
    if (j >= 0 && dist(static_cast<Index>(i), j) <= gate) pairs.emplace_back(static_cast<int>(i), j);
  }
  return pairs;
}

MetricsReport gps_baseline(const std::vector<PreparedInstance>& instances, double gate) {
  MetricsReport r;
  r.theta = gate;
  for (const auto& inst : instances) {
    const PairList pairs = gps_assignment(inst.a.world, inst.b.world, gate);
    if (pairs.empty()) ++r.empty_retrievals;
    r.counts += count_pairs(pairs, gt_pairs(inst));
  }
  r.prf = precision_recall_f1(r.counts);
  r.instances = static_cast<std::int64_t>(instances.size());
  return r;
}

BaselineConfig tune_baselines(const std::vector<PreparedInstance>& tuning) {
  BaselineConfig cfg;
  if (tuning.empty()) return cfg;
  const ScoredSet app = appearance_scores(tuning);
  double best = -1.0;
  for (const auto& p : sweep_theta(app, theta_grid(0.5, 51)))
    if (p.prf.f1 > best) {
      best = p.prf.f1;
      cfg.appearance_theta = p.theta;
    }
  best = -1.0;
  for (int k = 1; k <= 40; ++k) {
    const double gate = 0.25 * k;
    const double f1 = gps_baseline(tuning, gate).prf.f1;
    if (f1 > best) {
      best = f1;
      cfg.gps_gate = gate;
    }
  }
  return cfg;
}

}  // namespace coid
