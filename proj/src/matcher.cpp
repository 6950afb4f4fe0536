#include "coid/matcher.hpp"

#include <cmath>

#include "coid/error.hpp"

namespace coid {

void ConsensusConfig::validate() const {
  if (random_dim < 1) throw ConfigError("consensus: random_dim must be >= 1");
  if (steps < 0) throw ConfigError("consensus: steps must be >= 0");
  if (mlp_hidden < 1) throw ConfigError("consensus: mlp_hidden must be >= 1");
  if (mlp_dropout < 0.0 || mlp_dropout >= 1.0) throw ConfigError("consensus: mlp_dropout must be in [0, 1)");
  gnn.validate();
  if (gnn.in_dim != random_dim)
    throw ConfigError("consensus: gnn.in_dim " + std::to_string(gnn.in_dim) + " must equal random_dim " +
                      std::to_string(random_dim));
}

void MatcherConfig::validate() const {
  consensus.validate();
  if (!(gps_eps > 0.0)) throw ConfigError("matcher: gps_eps must be > 0");
  if (!(theta >= 0.0)) throw ConfigError("matcher: theta must be >= 0");
}

nlohmann::json to_json(const ConsensusConfig& cfg) {
  return {{"random_dim", cfg.random_dim},
          {"steps", cfg.steps},
          {"gnn", to_json(cfg.gnn)},
          {"mlp_hidden", cfg.mlp_hidden},
          {"mlp_dropout", cfg.mlp_dropout}};
}

ConsensusConfig consensus_config_from_json(const nlohmann::json& j) {
  ConsensusConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "random_dim") cfg.random_dim = value.get<int>();
      else if (key == "steps") cfg.steps = value.get<int>();
      else if (key == "gnn") cfg.gnn = gnn_config_from_json(value);
      else if (key == "mlp_hidden") cfg.mlp_hidden = value.get<int>();
      else if (key == "mlp_dropout") cfg.mlp_dropout = value.get<double>();
      else throw ConfigError("consensus config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("consensus config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const MatcherConfig& cfg) {
  return {{"consensus", to_json(cfg.consensus)},
          {"use_gps", cfg.use_gps},
          {"gps_eps", cfg.gps_eps},
          {"theta", cfg.theta},
          {"row_statistic", cfg.row_statistic == RowStatistic::kSoftmax ? "softmax" : "raw"},
          {"mutual", cfg.mutual}};
}

MatcherConfig matcher_config_from_json(const nlohmann::json& j) {
  MatcherConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "consensus") cfg.consensus = consensus_config_from_json(value);
      else if (key == "use_gps") cfg.use_gps = value.get<bool>();
      else if (key == "gps_eps") cfg.gps_eps = value.get<double>();
      else if (key == "theta") cfg.theta = value.get<double>();
      else if (key == "mutual") cfg.mutual = value.get<bool>();
      else if (key == "row_statistic") {
        const auto s = value.get<std::string>();
        if (s == "softmax") cfg.row_statistic = RowStatistic::kSoftmax;
        else if (s == "raw") cfg.row_statistic = RowStatistic::kRawScore;
        else throw ConfigError("matcher config: row_statistic must be 'softmax' or 'raw'");
      } else {
        throw ConfigError("matcher config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("matcher config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const MatchResult& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [i, j] : r.pairs) pairs.push_back({i, j});
  std::vector<double> stds(r.row_std.data(), r.row_std.data() + r.row_std.size());
  return {{"S", matrix_json(r.S)},
          {"Y", matrix_json(r.Y)},
          {"row_std", stds},
          {"kept", r.kept},
          {"pairs", pairs},
          {"D", matrix_json(r.D)},
          {"G", matrix_json(r.G)}};
}

ad::Tensor similarity(const ad::Tensor& h_a, const ad::Tensor& h_b) {
  if (h_a.cols() != h_b.cols())
    throw ShapeError("similarity: embedding widths differ, " + h_a.shape() + " vs " + h_b.shape());
  return ad::matmul(h_a, ad::transpose(h_b));
}

ad::Tensor consensus(const ad::Tensor& s, const Matrix& u, const AttentionGnn& psi,
                     const ParamStore& store, const GraphTensors& graph_a,
                     const GraphTensors& graph_b, bool train, RngStream* rng) {
  const Index n = s.rows(), n2 = s.cols();
  if (u.rows() != n)
    throw ShapeError("consensus: U " + shape_string(u) + " vs S " + s.shape());
  if (n == 0 || n2 == 0) return ad::Tensor::constant(Matrix::Zero(n, n2));
  const auto ut = ad::Tensor::constant(u);
  const auto st = ad::transpose(s);
  const ad::Tensor o_a = psi.forward(store, ut, graph_a, train, rng).h;
  const ad::Tensor o_b = psi.forward(store, ad::matmul(st, ut), graph_b, train, rng).h;
  const ad::Tensor residual = ad::sub(ad::matmul(st, o_a), o_b);
  return ad::scale(ad::matmul(o_a, ad::transpose(residual)),
                   1.0 / static_cast<double>(o_a.cols()));
}

void ConsensusMlp::init_params(ParamStore& store, RngStream& rng) const {
  store.add_glorot(prefix + ".w1", 1, hidden, rng);
  store.add_zeros(prefix + ".b1", 1, hidden);
  store.add_glorot(prefix + ".w2", hidden, 1, rng);
  store.add_zeros(prefix + ".b2", 1, 1);
}

ad::Tensor ConsensusMlp::forward(const ParamStore& store, const ad::Tensor& d, bool train,
                                 RngStream* rng) const {
  const Index n = d.rows(), n2 = d.cols();
  if (n * n2 == 0) return ad::Tensor::constant(Matrix::Zero(n, n2));
  const auto x = ad::reshape(d, n * n2, 1);
  auto h = ad::relu(ad::add_row(ad::matmul(x, store.get(prefix + ".w1")), store.get(prefix + ".b1")));
  if (train && dropout > 0.0) {
    if (rng == nullptr) throw ConfigError("consensus mlp: training forward needs an rng stream");
    h = ad::dropout(h, dropout, true, *rng);
  }
  const auto y = ad::add_row(ad::matmul(h, store.get(prefix + ".w2")), store.get(prefix + ".b2"));
  return ad::reshape(y, n, n2);
}

ad::Tensor refine(const ad::Tensor& s, const ad::Tensor& d, const ConsensusMlp& phi,
                  const ParamStore& store, bool train, RngStream* rng) {
  return ad::add(s, phi.forward(store, d, train, rng));
}

Matrix gps_mask(const Matrix& world_a, const Matrix& world_b, double eps) {
  if ((world_a.rows() > 0 && world_a.cols() != 3) || (world_b.rows() > 0 && world_b.cols() != 3))
    throw ShapeError("gps_mask: positions must be n x 3, got " + shape_string(world_a) + " and " +
                     shape_string(world_b));
  if (!world_a.allFinite() || !world_b.allFinite())
    throw NumericError("gps_mask: non-finite world positions");
  Matrix g(world_a.rows(), world_b.rows());
  for (Index i = 0; i < world_a.rows(); ++i)
    for (Index j = 0; j < world_b.rows(); ++j)
      g(i, j) = 1.0 / ((world_a.row(i) - world_b.row(j)).norm() + eps);
  return g;
}

ad::Tensor combine(const ad::Tensor& s0, const ad::Tensor& phi_d, const ad::Tensor& g, bool use_gps) {
  const auto s = ad::add(s0, phi_d);
  return use_gps ? ad::add(s, g) : s;
}

Matrix assign(const Matrix& s) {
  if (s.size() == 0) return Matrix(s.rows(), s.cols());
  if (!s.allFinite()) throw NumericError("assign: non-finite scores");
  return ad::softmax_rows(ad::Tensor::constant(s)).value();
}

Matrix row_std(const Matrix& m) {
  Matrix out = Matrix::Zero(m.rows(), 1);
  if (m.cols() == 0) return out;
  for (Index i = 0; i < m.rows(); ++i) {
    const double mean = m.row(i).mean();
    out(i, 0) = std::sqrt((m.row(i).array() - mean).square().mean());
  }
  return out;
}

FilterResult filter_noncovisible(const Matrix& y, const Matrix& stat, double theta) {
  if (stat.rows() != y.rows()) throw ShapeError("filter: statistic " + shape_string(stat) + " vs Y " + shape_string(y));
  FilterResult r;
  r.y = y;
  r.kept.resize(static_cast<std::size_t>(y.rows()));
  for (Index i = 0; i < y.rows(); ++i) {
    const bool keep = y.cols() > 0 && stat(i, 0) >= theta;
    r.kept[static_cast<std::size_t>(i)] = keep;
    if (!keep) r.y.row(i).setZero();
  }
  return r;
}

FilterResult filter_noncovisible(const Matrix& y, double theta) {
  return filter_noncovisible(y, row_std(y), theta);
}

std::vector<std::pair<int, int>> extract_pairs(const Matrix& y, const std::vector<bool>& kept,
                                               bool mutual) {
  if (static_cast<Index>(kept.size()) != y.rows())
    throw ShapeError("extract_pairs: kept mask length " + std::to_string(kept.size()) + " vs " +
                     std::to_string(y.rows()) + " rows");
  std::vector<std::pair<int, int>> pairs;
  if (y.cols() == 0) return pairs;
  std::vector<Index> col_best(static_cast<std::size_t>(y.cols()), -1);
  if (mutual) {
    for (Index j = 0; j < y.cols(); ++j)
      for (Index i = 0; i < y.rows(); ++i)
        if (kept[static_cast<std::size_t>(i)] &&
            (col_best[j] < 0 || y(i, j) > y(col_best[j], j)))
          col_best[static_cast<std::size_t>(j)] = i;
  }
  for (Index i = 0; i < y.rows(); ++i) {
    if (!kept[static_cast<std::size_t>(i)]) continue;
    Index best = 0;
    for (Index j = 1; j < y.cols(); ++j)
      if (y(i, j) > y(i, best)) best = j;
    if (mutual && col_best[static_cast<std::size_t>(best)] != i) continue;
    pairs.emplace_back(static_cast<int>(i), static_cast<int>(best));
  }
  return pairs;
}

}  // namespace coid
