#include "coid/gnn.hpp"

#include <cmath>

#include "coid/error.hpp"

namespace coid {

void GnnConfig::validate() const {
  if (layers < 1) throw ConfigError("gnn: layers must be >= 1");
  if (heads < 1) throw ConfigError("gnn: heads must be >= 1");
  if (channels < 1) throw ConfigError("gnn: channels must be >= 1");
  if (in_dim < 1) throw ConfigError("gnn: in_dim must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("gnn: dropout must be in [0, 1)");
}

nlohmann::json to_json(const GnnConfig& cfg) {
  return {{"layers", cfg.layers},
          {"heads", cfg.heads},
          {"channels", cfg.channels},
          {"in_dim", cfg.in_dim},
          {"dropout", cfg.dropout}};
}

GnnConfig gnn_config_from_json(const nlohmann::json& j) {
  GnnConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "layers") cfg.layers = value.get<int>();
      else if (key == "heads") cfg.heads = value.get<int>();
      else if (key == "channels") cfg.channels = value.get<int>();
      else if (key == "in_dim") cfg.in_dim = value.get<int>();
      else if (key == "dropout") cfg.dropout = value.get<double>();
      else throw ConfigError("gnn config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("gnn config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

Qkv qkv(const LayerWeights& w, const ad::Tensor& h) {
  if (h.cols() != w.wq.rows())
    throw ShapeError("qkv: input width " + std::to_string(h.cols()) + " vs weight " + w.wq.shape());
  return {ad::matmul(h, w.wq), ad::matmul(h, w.wk), ad::matmul(h, w.wv)};
}

std::vector<ad::Tensor> attention(const Qkv& x, const ad::Tensor& we, const GraphTensors& graph,
                                  int heads) {
  const Index n = x.q.rows();
  if (graph.mask.rows() != n)
    throw ShapeError("attention: " + std::to_string(n) + " nodes vs graph " + shape_string(graph.mask));
  const Index c = x.q.cols() / heads;
  const auto attr = ad::Tensor::constant(graph.edge_attr);
  const auto ones = ad::Tensor::constant(Matrix::Ones(1, n));
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(c));
  std::vector<ad::Tensor> alpha;
  alpha.reserve(static_cast<std::size_t>(heads));
  for (int m = 0; m < heads; ++m) {
    const auto q = ad::slice_cols(x.q, m * c, c);
    const auto k = ad::slice_cols(x.k, m * c, c);
    const auto e = ad::slice_cols(we, m * c, c);
    // q_i . (k_j + e a_ij) = q_i . k_j + a_ij (q_i . e)
    const auto qk = ad::matmul(q, ad::transpose(k));
    const auto qe = ad::matmul(ad::matmul(q, ad::transpose(e)), ones);
    const auto logits = ad::scale(ad::add(qk, ad::mul(qe, attr)), inv_sqrt_c);
    alpha.push_back(ad::softmax_rows(logits, graph.mask));
  }
  return alpha;
}

ad::Tensor aggregate(const std::vector<ad::Tensor>& alpha, const Qkv& x, const ad::Tensor& we,
                     const ad::Tensor& wx, const ad::Tensor& h, const GraphTensors& graph,
                     bool average_heads) {
  const auto heads = static_cast<Index>(alpha.size());
  const Index c = x.v.cols() / heads;
  const auto attr = ad::Tensor::constant(graph.edge_attr);
  std::vector<ad::Tensor> outs;
  outs.reserve(alpha.size());
  for (Index m = 0; m < heads; ++m) {
    const auto& a = alpha[static_cast<std::size_t>(m)];
    const auto v = ad::slice_cols(x.v, m * c, c);
    const auto e = ad::slice_cols(we, m * c, c);
    // sum_j a_ij (v_j + e a_ij) = (alpha V)_i + (sum_j alpha_ij a_ij) e
    const auto edge_term = ad::matmul(ad::row_sum(ad::mul(a, attr)), e);
    outs.push_back(ad::add(ad::matmul(a, v), edge_term));
  }
  const auto merged = average_heads ? ad::mean(outs) : ad::concat_cols(outs);
  return ad::add(ad::matmul(h, wx), merged);
}

AttentionGnn::AttentionGnn(std::string prefix, GnnConfig cfg) : prefix_(std::move(prefix)), cfg_(cfg) {
  cfg_.validate();
}

std::string AttentionGnn::name(int layer, const char* w) const {
  return prefix_ + ".l" + std::to_string(layer) + "." + w;
}

void AttentionGnn::init_params(ParamStore& store, RngStream& rng) const {
  const int hc = cfg_.heads * cfg_.channels;
  for (int l = 0; l < cfg_.layers; ++l) {
    const int in = cfg_.layer_in(l);
    store.add_glorot(name(l, "wq"), in, hc, rng);
    store.add_glorot(name(l, "wk"), in, hc, rng);
    store.add_glorot(name(l, "wv"), in, hc, rng);
    store.add_glorot(name(l, "we"), 1, hc, rng);
    store.add_glorot(name(l, "wx"), in, cfg_.layer_out(l), rng);
  }
}

LayerWeights AttentionGnn::weights(const ParamStore& store, int layer) const {
  return {store.get(name(layer, "wq")), store.get(name(layer, "wk")), store.get(name(layer, "wv")),
          store.get(name(layer, "we")), store.get(name(layer, "wx"))};
}

Embedding AttentionGnn::forward(const ParamStore& store, const ad::Tensor& x,
                                const GraphTensors& graph, bool train, RngStream* rng) const {
  Embedding out;
  if (x.rows() == 0) {
    out.h = ad::Tensor::constant(Matrix(0, cfg_.out_dim()));
    return out;
  }
  if (x.cols() != cfg_.in_dim)
    throw ShapeError("gnn '" + prefix_ + "': feature width " + std::to_string(x.cols()) +
                     " vs configured in_dim " + std::to_string(cfg_.in_dim));
  if (train && cfg_.dropout > 0.0 && cfg_.layers > 1 && rng == nullptr)
    throw ConfigError("gnn: training forward needs an rng stream");

  ad::Tensor h = x;
  for (int l = 0; l < cfg_.layers; ++l) {
    const LayerWeights w = weights(store, l);
    const bool last = l + 1 == cfg_.layers;
    const Qkv proj = qkv(w, h);
    const auto alpha = attention(proj, w.we, graph, cfg_.heads);
    std::vector<Matrix> maps;
    for (const auto& a : alpha) maps.push_back(a.value());
    out.attention.push_back(std::move(maps));
    h = aggregate(alpha, proj, w.we, w.wx, h, graph, last);
    if (!last && train && cfg_.dropout > 0.0) h =ad::dropout(h, cfg_.dropout, true, *rng);
  }
  out.h = h;
  return out;
}

}  // namespace coid
