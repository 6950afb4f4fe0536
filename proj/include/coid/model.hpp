#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <utility>
#include <vector>

#include "coid/gnn.hpp"
#include "coid/matcher.hpp"
#include "coid/param_store.hpp"
#include "coid/scene_graph.hpp"

namespace coid {

/// What the squared error is measured against Y*: the combined score S
/// itself, or its row softmax. Models train on the softmax by default; a
/// score regressed onto {0, 1} leaves softmax rows too flat for the row-std
/// filter at its default threshold.
enum class LossTarget { kScore, kSoftmax };

struct ModelConfig {
  GnnConfig gnn;
  MatcherConfig matcher;
  LossTarget loss_target = LossTarget::kSoftmax;

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Per-graph inputs reused across epochs.
struct PreparedGraph {
  ad::Tensor x;
  GraphTensors graph;
  Matrix world;

  static PreparedGraph from(const SceneGraph& g);
  Index size() const { return x.rows(); }
};

struct ForwardResult {
  ad::Tensor s0;     // H H'^T
  ad::Tensor phi_d;  // accumulated consensus refinement
  ad::Tensor s;      // combined score
  Matrix g;          // position mask (zeros when GPS is off)
  Matrix d;          // consensus difference of the last step
};

/// Y, row statistic, filter and pair extraction from a final score matrix.
MatchResult decide(const Matrix& s, double theta, RowStatistic stat = RowStatistic::kSoftmax,
                   bool mutual = false);

// The full masked graph-matching network: embedding GNN, consensus GNN and
// MLP, position mask and softmax assignment.
class CoidModel {
 public:
  explicit CoidModel(ModelConfig cfg);

  ParamStore init_params(std::uint64_t seed) const;
  /// Throws ShapeError naming both shapes when `store` was built for another configuration.
  void check_compatible(const ParamStore& store) const;

  /// All randomness (dropout, consensus signatures) is drawn from streams keyed by stream_key.
  ForwardResult forward(const ParamStore& store, const PreparedGraph& a, const PreparedGraph& b,
                        bool train, std::uint64_t stream_key) const;

  MatchResult match(const ParamStore& store, const PreparedGraph& a, const PreparedGraph& b,
                    std::uint64_t stream_key) const;

  const ModelConfig& config() const { return cfg_; }
  const AttentionGnn& embedding_net() const { return psi_; }
  const AttentionGnn& consensus_net() const { return psi_c_; }
  const ConsensusMlp& mlp() const { return phi_; }

  /// Random node signatures for refinement step `step`.
  Matrix sample_signatures(Index n, std::uint64_t stream_key, int step) const;

 private:
  ModelConfig cfg_;
  AttentionGnn psi_;
  AttentionGnn psi_c_;
  ConsensusMlp phi_;
};

/// Binary n x n' matrix of ground-truth pairs. Throws DataError unless the
/// pairs form a partial bijection inside the bounds.
Matrix ground_truth_matrix(Index n, Index n2, const std::vector<std::pair<int, int>>& pairs);

/// Mean squared error between S (or softmax(S)) and Y* over all n n' entries.
ad::Tensor matching_loss(const ad::Tensor& s, const Matrix& y_star, LossTarget target = LossTarget::kScore);

}  // namespace coid
