#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <utility>
#include <vector>

namespace coid {

using PairList = std::vector<std::pair<int, int>>;

struct Counts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  Counts& operator+=(const Counts& o);
  bool operator==(const Counts&) const = default;
};

/// tp: predicted pairs present in gt; fp: predicted pairs absent; fn: gt pairs not predicted.
Counts count_pairs(const PairList& predicted, const PairList& gt);

struct Prf {
  double precision = 0.0;  // 0 when nothing was retrieved
  double recall = 0.0;     // 0 when there is no ground truth
  double f1 = 0.0;
};

Prf precision_recall_f1(const Counts& c);

struct PrPoint {
  double theta = 0.0;
  Counts counts;
  Prf prf;
};

/// `steps` evenly spaced values from 0 to theta_max inclusive.
std::vector<double> theta_grid(double theta_max = 0.5, int steps = 50);

// Area under the precision-recall curve. Points that retrieved nothing carry
// no precision and are skipped. The rest are sorted by recall, the best
// precision is kept per recall value, the curve is extended flat to recall 0
// and integrated with the trapezoidal rule.
double pr_auc(const std::vector<PrPoint>& curve);

struct MetricsReport {
  double theta = 0.0;
  Counts counts;
  Prf prf;
  std::int64_t instances = 0;
  std::int64_t empty_retrievals = 0;  // instances where nothing was retrieved
  std::vector<PrPoint> pr_curve;
  double auc = 0.0;
};

nlohmann::json to_json(const Counts& c);
nlohmann::json to_json(const PrPoint& p);
nlohmann::json to_json(const MetricsReport& r);

}  // namespace coid
