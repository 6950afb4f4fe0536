#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "coid/param_store.hpp"
#include "coid/scene_graph.hpp"
#include "coid/tensor.hpp"

namespace coid {

struct GnnConfig {
  int layers = 2;
  int heads = 4;
  int channels = 32;   // per head
  int in_dim = 64;
  double dropout = 0.5;  // between attention layers, training only

  void validate() const;
  /// Width of layer l's input.
  int layer_in(int l) const { return l == 0 ? in_dim : heads * channels; }
  /// Heads are concatenated after intermediate layers, averaged after the last.
  int layer_out(int l) const { return l + 1 == layers ? channels : heads * channels; }
  int out_dim() const { return channels; }
};

nlohmann::json to_json(const GnnConfig& cfg);
GnnConfig gnn_config_from_json(const nlohmann::json& j);

struct LayerWeights {
  ad::Tensor wq, wk, wv;  // in x heads*c
  ad::Tensor we;          // 1 x heads*c, edge-attribute projection
  ad::Tensor wx;          // in x out, root/residual projection
};

struct Qkv {
  ad::Tensor q, k, v;  // n x heads*c
};

/// Query/key/value projections of H.
Qkv qkv(const LayerWeights& w, const ad::Tensor& h);

/// Per-head attention over the masked neighbourhood:
/// alpha_ij = softmax_j (q_i . (k_j + w_e a_ij)) / sqrt(c).
std::vector<ad::Tensor> attention(const Qkv& x, const ad::Tensor& we, const GraphTensors& graph,
                                  int heads);

/// h_i' = W_x h_i + sum_j alpha_ij (v_j + w_e a_ij), heads concatenated or averaged.
ad::Tensor aggregate(const std::vector<ad::Tensor>& alpha, const Qkv& x, const ad::Tensor& we,
                     const ad::Tensor& wx, const ad::Tensor& h, const GraphTensors& graph,
                     bool average_heads);

struct Embedding {
  ad::Tensor h;  // n x out_dim
  /// alpha[layer][head], n x n.
  std::vector<std::vector<Matrix>> attention;
};

// Multi-head, edge-aware attentional GNN. Parameters live in a ParamStore
// under "<prefix>.l<layer>.{wq,wk,wv,we,wx}".
class AttentionGnn {
 public:
  AttentionGnn(std::string prefix, GnnConfig cfg);

  void init_params(ParamStore& store, RngStream& rng) const;
  LayerWeights weights(const ParamStore& store, int layer) const;

  /// rng may be null when train is false.
  Embedding forward(const ParamStore& store, const ad::Tensor& x, const GraphTensors& graph,
                    bool train, RngStream* rng) const;

  const GnnConfig& config() const { return cfg_; }

 private:
  std::string name(int layer, const char* w) const;
  std::string prefix_;
  GnnConfig cfg_;
};

}  // namespace coid
