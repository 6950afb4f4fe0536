#pragma once

#include <nlohmann/json.hpp>
#include <utility>
#include <vector>

#include "coid/gnn.hpp"
#include "coid/param_store.hpp"
#include "coid/tensor.hpp"

namespace coid {

struct ConsensusConfig {
  int random_dim = 32;  // width r of the random node signatures U
  int steps = 1;        // refinement steps; 0 disables the consensus term
  GnnConfig gnn{2, 4, 16, 32, 0.0};  // consensus network; in_dim must equal random_dim
  int mlp_hidden = 32;
  double mlp_dropout = 0.2;

  void validate() const;
};

/// Statistic thresholded by the non-covisibility filter.
enum class RowStatistic { kSoftmax, kRawScore };

struct MatcherConfig {
  ConsensusConfig consensus;
  bool use_gps = true;
  double gps_eps = 1e-6;  // m
  double theta = 0.13;
  RowStatistic row_statistic = RowStatistic::kSoftmax;
  bool mutual = false;  // keep only mutual row/column argmax pairs

  void validate() const;
};

nlohmann::json to_json(const ConsensusConfig& cfg);
ConsensusConfig consensus_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MatcherConfig& cfg);
MatcherConfig matcher_config_from_json(const nlohmann::json& j);

struct MatchResult {
  Matrix S;        // n x n' combined score
  Matrix Y;        // n x n' assignment, filtered rows zeroed
  Matrix row_std;  // n x 1
  std::vector<bool> kept;
  std::vector<std::pair<int, int>> pairs;
  Matrix D;  // n x n' consensus difference of the last refinement step
  Matrix G;  // n x n' position-consistency mask (zero when GPS is disabled)
};

nlohmann::json to_json(const MatchResult& r);

/// S0 = H H'^T.
ad::Tensor similarity(const ad::Tensor& h_a, const ad::Tensor& h_b);

// Consensus difference between the two graphs under the soft assignment S.
//
// With o = Psi_c(U, A) and o' = Psi_c(S^T U, A'), the neighbourhood residual
// R = S^T o - o' (n' x c) vanishes when S maps G onto an isomorphic G'. The
// n x n' map handed to phi pairs every view-A signature with every view-B
// residual, D = o R^T / c, so D is identically zero whenever R is.
ad::Tensor consensus(const ad::Tensor& s, const Matrix& u, const AttentionGnn& psi,
                     const ParamStore& store, const GraphTensors& graph_a,
                     const GraphTensors& graph_b, bool train, RngStream* rng);

// Entrywise two-layer MLP: Linear(1, h) -> ReLU -> dropout -> Linear(h, 1).
struct ConsensusMlp {
  std::string prefix = "phi";
  int hidden = 32;
  double dropout = 0.2;

  void init_params(ParamStore& store, RngStream& rng) const;
  ad::Tensor forward(const ParamStore& store, const ad::Tensor& d, bool train, RngStream* rng) const;
};

/// S + phi(D).
ad::Tensor refine(const ad::Tensor& s, const ad::Tensor& d, const ConsensusMlp& phi,
                  const ParamStore& store, bool train, RngStream* rng);

/// G_ij = 1 / (|p_i - p'_j| + eps). Throws NumericError on non-finite positions.
Matrix gps_mask(const Matrix& world_a, const Matrix& world_b, double eps = 1e-6);

/// S0 + phi(D) (+ G when use_gps).
ad::Tensor combine(const ad::Tensor& s0, const ad::Tensor& phi_d, const ad::Tensor& g, bool use_gps);

/// Row-wise softmax.
Matrix assign(const Matrix& s);

/// Population standard deviation of each row (0 for empty rows).
Matrix row_std(const Matrix& m);

struct FilterResult {
  std::vector<bool> kept;
  Matrix y;  // rows with statistic < theta set to zero
};

/// kept[i] <=> stat[i] >= theta.
FilterResult filter_noncovisible(const Matrix& y, const Matrix& stat, double theta);
FilterResult filter_noncovisible(const Matrix& y, double theta);

/// One (i, argmax_j) pair per kept row, lowest j on ties. In mutual mode a
/// pair survives only when i is also the (lowest-index) argmax of column j
/// among kept rows.
std::vector<std::pair<int, int>> extract_pairs(const Matrix& y, const std::vector<bool>& kept,
                                               bool mutual = false);

}  // namespace coid
