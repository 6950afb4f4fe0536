#include <doctest.h>

#include <cmath>

#include "coid/error.hpp"
#include "coid/matcher.hpp"
#include "test_util.hpp"

using namespace coid;
using coid::testing::permutation_matrix;
using coid::testing::random_graph;
using coid::testing::random_matrix;
using coid::testing::random_permutation;

namespace {

// Graph whose node i is node perm[i] of g.
GraphTensors permuted_tensors(const SceneGraph& g, const std::vector<int>& perm) {
  std::vector<int> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
  std::vector<GraphEdge> edges;
  for (const auto& e : g.edges) {
    const int a = inv[static_cast<std::size_t>(e.i)], b = inv[static_cast<std::size_t>(e.j)];
    edges.push_back({std::min(a, b), std::max(a, b), e.sq_dist});
  }
  return graph_tensors(g.size(), edges);
}

}  // namespace

TEST_SUITE("matcher") {
  TEST_CASE("consensus difference vanishes for the true permutation") {
    const ConsensusConfig cc;
    AttentionGnn psi("c", cc.gnn);
    ParamStore store;
    RngStream rng(1);
    psi.init_params(store, rng);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 2 + static_cast<int>(rng.uniform_int(0, 8));
      const auto g = random_graph(n, 2, rng);
      const auto perm = random_permutation(n, rng);
      // S maps node i of A to node j of B where B's node j is A's node perm[j].
      const Matrix s = permutation_matrix(perm).transpose();
      const Matrix u = random_matrix(n, cc.random_dim, rng);
      const Matrix d = consensus(ad::Tensor::constant(s), u, psi, store, graph_tensors(g), permuted_tensors(g, perm),
                                 false, nullptr).value();
      CHECK(d.norm() <= 1e-9);
    }
  }

  TEST_CASE("consensus difference is nonzero for a wrong assignment") {
    const ConsensusConfig cc;
    AttentionGnn psi("c", cc.gnn);
    ParamStore store;
    RngStream rng(2);
    psi.init_params(store, rng);
    const auto g = random_graph(8, 2, rng);
    std::vector<int> swap{1, 0, 2, 3, 4, 5, 6, 7};
    const Matrix wrong = permutation_matrix(swap);
    const Matrix d = consensus(ad::Tensor::constant(wrong), random_matrix(8, cc.random_dim, rng), psi, store,
                               graph_tensors(g), graph_tensors(g), false, nullptr).value();
    CHECK(d.norm() > 1e-3);
  }

  TEST_CASE("consensus shape") {
    const ConsensusConfig cc;
    AttentionGnn psi("c", cc.gnn);
    ParamStore store;
    RngStream rng(3);
    psi.init_params(store, rng);
    const auto a = random_graph(4, 2, rng), b = random_graph(6, 2, rng);
    const auto s = ad::Tensor::constant(random_matrix(4, 6, rng));
    const auto d = consensus(s, random_matrix(4, cc.random_dim, rng), psi, store, graph_tensors(a), graph_tensors(b), false, nullptr);
    CHECK(d.rows() == 4);
    CHECK(d.cols() == 6);
    CHECK_THROWS_AS(consensus(s, random_matrix(5, cc.random_dim, rng), psi, store, graph_tensors(a), graph_tensors(b), false, nullptr),
                    ShapeError);
  }

  TEST_CASE("consensus mlp matches a hand computation") {
    ConsensusMlp phi{"p", 2, 0.0};
    ParamStore store;
    store.add("p.w1", (Matrix(1, 2) << 1.0, -2.0).finished());
    store.add("p.b1", (Matrix(1, 2) << 0.5, 0.25).finished());
    store.add("p.w2", (Matrix(2, 1) << 3.0, 4.0).finished());
    store.add("p.b2", Matrix::Constant(1, 1, -1.0));
    Matrix d(1, 2);
    d << 2.0, -1.0;
    const Matrix y = phi.forward(store, ad::Tensor::constant(d), false, nullptr).value();
    // d = 2: relu(2.5, -3.75) -> 3 * 2.5 - 1; d = -1: relu(-0.5, 2.25) -> 4 * 2.25 - 1.
    CHECK(y(0, 0) == doctest::Approx(6.5));
    CHECK(y(0, 1) == doctest::Approx(8.0));
  }

  TEST_CASE("mlp biases start at zero so phi(0) = 0") {
    ConsensusMlp phi;
    ParamStore store;
    RngStream rng(4);
    phi.init_params(store, rng);
    CHECK(phi.forward(store, ad::Tensor::constant(Matrix::Zero(3, 4)), false, nullptr).value().isZero());
  }

  TEST_CASE("gps mask is the inverse distance") {
    Matrix a(2, 3), b(1, 3);
    a << 0, 0, 0, 3, 4, 0;
    b << 0, 0, 0;
    const Matrix g = gps_mask(a, b, 1e-6);
    CHECK(g(0, 0) == doctest::Approx(1e6));
    CHECK(g(1, 0) == doctest::Approx(1.0 / (5.0 + 1e-6)));
    a(1, 2) = std::nan("");
    CHECK_THROWS_AS(gps_mask(a, b), NumericError);
  }

  TEST_CASE("combine adds the mask only when enabled") {
    RngStream rng(5);
    const auto s0 = ad::Tensor::constant(random_matrix(2, 3, rng));
    const auto p = ad::Tensor::constant(random_matrix(2, 3, rng));
    const auto g = ad::Tensor::constant(random_matrix(2, 3, rng));
    CHECK(combine(s0, p, g, true).value() == s0.value() + p.value() + g.value());
    CHECK(combine(s0, p, g, false).value() == s0.value() + p.value());
  }

  TEST_CASE("row statistic is the population standard deviation") {
    Matrix y(2, 4);
    y << 1, 0, 0, 0, 0.25, 0.25, 0.25, 0.25;
    const Matrix sd = row_std(y);
    CHECK(sd(0, 0) == doctest::Approx(std::sqrt(3.0) / 4.0));
    CHECK(sd(1, 0) == 0.0);
  }

  TEST_CASE("filter removes uniform rows and keeps one-hot rows") {
    for (int n = 2; n <= 20; ++n) {
      Matrix y = Matrix::Constant(2, n, 1.0 / n);
      y.row(1).setZero();
      y(1, n / 2) = 1.0;
      const auto f = filter_noncovisible(y, 0.13);
      CHECK_FALSE(f.kept[0]);
      CHECK(f.kept[1]);
      CHECK(f.y.row(0).isZero());
      CHECK(f.y.row(1) == y.row(1));
    }
  }

  TEST_CASE("kept set shrinks as theta grows") {
    RngStream rng(6);
    for (int trial = 0; trial < 100; ++trial) {
      const Matrix y = assign(random_matrix(6, 7, rng, 3.0));
      std::vector<bool> prev(6, true);
      for (double theta = 0.0; theta <= 0.5; theta += 0.01) {
        const auto f = filter_noncovisible(y, theta);
        for (std::size_t i = 0; i < 6; ++i) CHECK((!f.kept[i] || prev[i]));
        prev = f.kept;
      }
    }
  }

  TEST_CASE("pair extraction takes the row argmax with the lowest index on ties") {
    Matrix y(3, 3);
    y << 0.2, 0.4, 0.4, 0.9, 0.05, 0.05, 0.1, 0.1, 0.8;
    const auto pairs = extract_pairs(y, {true, true, false});
    CHECK(pairs == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});
  }

  TEST_CASE("mutual extraction drops pairs that lose their column") {
    Matrix y(2, 2);
    y << 0.9, 0.1, 0.6, 0.4;
    CHECK(extract_pairs(y, {true, true}, false).size() == 2);
    CHECK(extract_pairs(y, {true, true}, true) == std::vector<std::pair<int, int>>{{0, 0}});
  }

  TEST_CASE("config round trip and validation") {
    MatcherConfig m;
    m.theta = 0.2;
    m.use_gps = false;
    const auto back = matcher_config_from_json(to_json(m));
    CHECK(back.theta == 0.2);
    CHECK_FALSE(back.use_gps);
    CHECK_THROWS_AS(matcher_config_from_json({{"theta", -1.0}}), ConfigError);
    CHECK_THROWS_AS(matcher_config_from_json({{"consensus", {{"random_dim", 8}}}}), ConfigError);
  }
}
