#include "coid/model.hpp"

#include "coid/error.hpp"

namespace coid {

namespace {

enum StreamLabel : std::uint64_t { kDropoutStream = 1, kSignatureStream = 2 };

}  // namespace

void ModelConfig::validate() const {
  gnn.validate();
  matcher.validate();
}

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"gnn", to_json(cfg.gnn)},
          {"matcher", to_json(cfg.matcher)},
          {"loss_target", cfg.loss_target == LossTarget::kScore ? "score" : "softmax"}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "gnn") cfg.gnn = gnn_config_from_json(value);
      else if (key == "matcher") cfg.matcher = matcher_config_from_json(value);
      else if (key == "loss_target") {
        const auto s = value.get<std::string>();
        if (s == "score") cfg.loss_target = LossTarget::kScore;
        else if (s == "softmax") cfg.loss_target = LossTarget::kSoftmax;
        else throw ConfigError("model config: loss_target must be 'score' or 'softmax'");
      } else {
        throw ConfigError("model config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

PreparedGraph PreparedGraph::from(const SceneGraph& g) {
  return {ad::Tensor::constant(g.features), graph_tensors(g), g.world_positions};
}

MatchResult decide(const Matrix& s, double theta, RowStatistic stat, bool mutual) {
  MatchResult r;
  r.S = s;
  const Matrix y = assign(s);
  r.row_std = row_std(stat == RowStatistic::kSoftmax ? y : s);
  FilterResult f = filter_noncovisible(y, r.row_std, theta);
  r.Y = std::move(f.y);
  r.kept = std::move(f.kept);
  r.pairs = extract_pairs(r.Y, r.kept, mutual);
  return r;
}

CoidModel::CoidModel(ModelConfig cfg)
    : cfg_(std::move(cfg)),
      psi_("gnn", cfg_.gnn),
      psi_c_("consensus", cfg_.matcher.consensus.gnn),
      phi_{"phi", cfg_.matcher.consensus.mlp_hidden, cfg_.matcher.consensus.mlp_dropout} {
  cfg_.validate();
}

ParamStore CoidModel::init_params(std::uint64_t seed) const {
  ParamStore store;
  RngStream rng(RngStream::derive(seed, {0x1417}));
  psi_.init_params(store, rng);
  psi_c_.init_params(store, rng);
  phi_.init_params(store, rng);
  return store;
}

void CoidModel::check_compatible(const ParamStore& store) const {
  const ParamStore expected = init_params(0);
  for (const auto& e : expected.entries()) {
    if (!store.contains(e.name))
      throw ShapeError("dimension mismatch: checkpoint lacks parameter '" + e.name + "'");
    const auto& got = store.get(e.name);
    if (got.rows() != e.param.rows() || got.cols() != e.param.cols())
      throw ShapeError("dimension mismatch: parameter '" + e.name + "' expects " + e.param.shape() +
                       ", checkpoint has " + got.shape());
  }
  if (store.entries().size() != expected.entries().size())
    throw ShapeError("dimension mismatch: checkpoint has " + std::to_string(store.entries().size()) +
                     " tensors, model expects " + std::to_string(expected.entries().size()));
}

Matrix CoidModel::sample_signatures(Index n, std::uint64_t stream_key, int step) const {
  RngStream rng(RngStream::derive(stream_key, {kSignatureStream, static_cast<std::uint64_t>(step)}));
  const int r = cfg_.matcher.consensus.random_dim;
  Matrix u(n, r);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < r; ++k) u(i, k) = rng.normal();
  return u;
}

ForwardResult CoidModel::forward(const ParamStore& store, const PreparedGraph& a,
                                 const PreparedGraph& b, bool train,
                                 std::uint64_t stream_key) const {
  for (const auto* g : {&a, &b})
    if (g->size() > 0 && g->x.cols() != cfg_.gnn.in_dim)
      throw ShapeError("dimension mismatch: graph features have width " + std::to_string(g->x.cols()) +
                       ", model expects in_dim " + std::to_string(cfg_.gnn.in_dim));
  RngStream drop(RngStream::derive(stream_key, {kDropoutStream}));
  ForwardResult out;
  const auto h_a = psi_.forward(store, a.x, a.graph, train, &drop).h;
  const auto h_b = psi_.forward(store, b.x, b.graph, train, &drop).h;
  out.s0 = similarity(h_a, h_b);
  const Index n = a.size(), n2 = b.size();
  out.g = cfg_.matcher.use_gps ? gps_mask(a.world, b.world, cfg_.matcher.gps_eps) : Matrix::Zero(n, n2);
  const auto g = ad::Tensor::constant(out.g);
  out.phi_d = ad::Tensor::constant(Matrix::Zero(n, n2));
  out.d = Matrix::Zero(n, n2);

  const bool use_gps = cfg_.matcher.use_gps;
  for (int step = 0; step < cfg_.matcher.consensus.steps && n > 0 && n2 > 0; ++step) {
    const auto current = combine(out.s0, out.phi_d, g, use_gps);
    const auto y = ad::softmax_rows(current);
    const Matrix u = sample_signatures(n, stream_key, step);
    const auto d = consensus(y, u, psi_c_, store, a.graph, b.graph, train, &drop);
    out.d = d.value();
    out.phi_d = refine(out.phi_d, d, phi_, store, train, &drop);
  }
  out.s = combine(out.s0, out.phi_d, g, use_gps);
  return out;
}

MatchResult CoidModel::match(const ParamStore& store, const PreparedGraph& a, const PreparedGraph& b,
                             std::uint64_t stream_key) const {
  const ad::NoGrad no_grad;
  const ForwardResult f = forward(store, a, b, false, stream_key);
  MatchResult r = decide(f.s.value(), cfg_.matcher.theta, cfg_.matcher.row_statistic, cfg_.matcher.mutual);
  r.D = f.d;
  r.G = f.g;
  return r;
}

Matrix ground_truth_matrix(Index n, Index n2, const std::vector<std::pair<int, int>>& pairs) {
  Matrix y = Matrix::Zero(n, n2);
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= n || j >= n2)
      throw DataError("ground truth pair (" + std::to_string(i) + ", " + std::to_string(j) +
                      ") outside " + std::to_string(n) + "x" + std::to_string(n2));
    if (y.row(i).sum() > 0.0 || y.col(j).sum() > 0.0)
      throw DataError("ground truth is not a partial bijection at (" + std::to_string(i) + ", " +
                      std::to_string(j) + ")");
    y(i, j) = 1.0;
  }
  return y;
}

ad::Tensor matching_loss(const ad::Tensor& s, const Matrix& y_star, LossTarget target) {
  if (s.rows() != y_star.rows() || s.cols() != y_star.cols())
    throw ShapeError("loss: shape mismatch " + s.shape() + " vs " + shape_string(y_star));
  const auto pred = target == LossTarget::kSoftmax ? ad::softmax_rows(s) : s;
  const auto diff = ad::sub(pred, ad::Tensor::constant(y_star));
  return ad::mean_all(ad::mul(diff, diff));
}

}  // namespace coid
