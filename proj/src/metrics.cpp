#include "coid/metrics.hpp"

#include <algorithm>
#include <set>

#include "coid/error.hpp"

namespace coid {

Counts& Counts::operator+=(const Counts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

Counts count_pairs(const PairList& predicted, const PairList& gt) {
  const std::set<std::pair<int, int>> truth(gt.begin(), gt.end());
  const std::set<std::pair<int, int>> pred(predicted.begin(), predicted.end());
  Counts c;
  for (const auto& p : pred) (truth.count(p) ? c.tp : c.fp) += 1;
  c.fn = static_cast<std::int64_t>(truth.size()) - c.tp;
  return c;
}

Prf precision_recall_f1(const Counts& c) {
  Prf r;
  if (c.tp + c.fp > 0) r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (r.precision + r.recall > 0.0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

std::vector<double> theta_grid(double theta_max, int steps) {
  if (steps < 2 || !(theta_max > 0.0)) throw ConfigError("theta grid needs >= 2 steps and theta_max > 0");
  std::vector<double> grid(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) grid[static_cast<std::size_t>(k)] = theta_max * k / (steps - 1);
  return grid;
}

double pr_auc(const std::vector<PrPoint>& curve) {
  std::vector<std::pair<double, double>> pts;  // (recall, precision)
  for (const auto& p : curve)
    if (p.counts.tp + p.counts.fp > 0) pts.emplace_back(p.prf.recall, p.prf.precision);
  if (pts.empty()) return 0.0;
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  });
  std::vector<std::pair<double, double>> merged;
  for (const auto& p : pts)
    if (merged.empty() || merged.back().first != p.first) merged.push_back(p);
  if (merged.front().first > 0.0) merged.insert(merged.begin(), {0.0, merged.front().second});
  double area = 0.0;
  for (std::size_t k = 1; k < merged.size(); ++k)
    area += (merged[k].first - merged[k - 1].first) * (merged[k].second + merged[k - 1].second) / 2.0;
  return area;
}

nlohmann::json to_json(const Counts& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}}; }

nlohmann::json to_json(const PrPoint& p) {
  return {{"theta", p.theta},
          {"counts", to_json(p.counts)},
          {"precision", p.prf.precision},
          {"recall", p.prf.recall},
          {"f1", p.prf.f1}};
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : r.pr_curve) curve.push_back(to_json(p));
  return {{"theta", r.theta},
          {"counts", to_json(r.counts)},
          {"precision", r.prf.precision},
          {"recall", r.prf.recall},
          {"f1", r.prf.f1},
          {"instances", r.instances},
          {"empty_retrievals", r.empty_retrievals},
          {"pr_curve", curve},
          {"auc", r.auc}};
}

}  // namespace coid
