#include <doctest.h>

#include <cmath>

#include "coid/error.hpp"
#include "coid/gnn.hpp"
#include "test_util.hpp"

using namespace coid;
using coid::testing::random_graph;
using coid::testing::random_matrix;

namespace {

// Loop-based reference for one attention layer.
Matrix reference_layer(const Matrix& h, const GraphTensors& g, const Matrix& wq, const Matrix& wk,
                       const Matrix& wv, const Matrix& we, const Matrix& wx, int heads, bool average) {
  const Index n = h.rows(), c = wq.cols() / heads;
  const Matrix q = h * wq, k = h * wk, v = h * wv;
  Matrix merged = Matrix::Zero(n, average ? c : heads * c);
  for (int m = 0; m < heads; ++m) {
    for (Index i = 0; i < n; ++i) {
      std::vector<double> logit(static_cast<std::size_t>(n), -INFINITY);
      double mx = -INFINITY;
      for (Index j = 0; j < n; ++j) {
        if (g.mask(i, j) == 0.0) continue;
        double dot = 0.0;
        for (Index t = 0; t < c; ++t)
          dot += q(i, m * c + t) * (k(j, m * c + t) + we(0, m * c + t) * g.edge_attr(i, j));
        logit[static_cast<std::size_t>(j)] = dot / std::sqrt(static_cast<double>(c));
        mx = std::max(mx, logit[static_cast<std::size_t>(j)]);
      }
      double z = 0.0;
      for (Index j = 0; j < n; ++j)
        if (g.mask(i, j) != 0.0) z += std::exp(logit[static_cast<std::size_t>(j)] - mx);
      for (Index j = 0; j < n; ++j) {
        if (g.mask(i, j) == 0.0) continue;
        const double a = std::exp(logit[static_cast<std::size_t>(j)] - mx) / z;
        for (Index t = 0; t < c; ++t) {
          const double msg = a * (v(j, m * c + t) + we(0, m * c + t) * g.edge_attr(i, j));
          if (average) merged(i, t) += msg / heads;
          else merged(i, m * c + t) += msg;
        }
      }
    }
  }
  return h * wx + merged;
}

struct Fixture {
  GnnConfig cfg{2, 3, 4, 5, 0.5};
  AttentionGnn gnn{"g", cfg};
  ParamStore store;
  Fixture() {
    RngStream rng(1);
    gnn.init_params(store, rng);
  }
};

}  // namespace

TEST_SUITE("gnn") {
  TEST_CASE("layers match the loop reference") {
    Fixture f;
    RngStream rng(2);
    for (int trial = 0; trial < 10; ++trial) {
      const auto g = random_graph(3 + trial, f.cfg.in_dim, rng);
      const auto t = graph_tensors(g);
      Matrix h = g.features;
      for (int l = 0; l < f.cfg.layers; ++l) {
        const auto w = f.gnn.weights(f.store, l);
        h = reference_layer(h, t, w.wq.value(), w.wk.value(), w.wv.value(), w.we.value(), w.wx.value(),
                            f.cfg.heads, l + 1 == f.cfg.layers);
      }
      const Matrix out = f.gnn.forward(f.store, ad::Tensor::constant(g.features), t, false, nullptr).h.value();
      CHECK((out - h).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("single isolated node reduces to value plus root term") {
    GnnConfig cfg{1, 1, 1, 1, 0.0};
    AttentionGnn gnn("s", cfg);
    ParamStore store;
    store.add("s.l0.wq", Matrix::Constant(1, 1, 0.3));
    store.add("s.l0.wk", Matrix::Constant(1, 1, -0.7));
    store.add("s.l0.wv", Matrix::Constant(1, 1, 2.0));
    store.add("s.l0.we", Matrix::Constant(1, 1, 0.5));
    store.add("s.l0.wx", Matrix::Constant(1, 1, 3.0));
    const auto t = graph_tensors(1, {});
    const double x = 1.5;
    const double h = gnn.forward(store, ad::Tensor::constant(Matrix::Constant(1, 1, x)), t, false, nullptr).h.item();
    // Only the self edge (standardized attribute 0 with no edges) carries weight 1.
    CHECK(h == doctest::Approx(3.0 * x + 2.0 * x));
  }

  TEST_CASE("attention is a distribution over the neighbourhood") {
    Fixture f;
    RngStream rng(3);
    const auto g = random_graph(9, f.cfg.in_dim, rng);
    const auto t = graph_tensors(g);
    const auto emb = f.gnn.forward(f.store, ad::Tensor::constant(g.features), t, false, nullptr);
    REQUIRE(emb.attention.size() == 2);
    for (const auto& layer : emb.attention) {
      REQUIRE(layer.size() == 3);
      for (const auto& a : layer) {
        for (Index i = 0; i < 9; ++i) CHECK(a.row(i).sum() == doctest::Approx(1.0));
        CHECK((a.array() * (1.0 - t.mask.array())).abs().maxCoeff() == 0.0);
      }
    }
  }

  TEST_CASE("permutation equivariance") {
    Fixture f;
    RngStream rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 2 + static_cast<int>(rng.uniform_int(0, 8));
      const auto g = random_graph(n, f.cfg.in_dim, rng);
      const auto perm = coid::testing::random_permutation(n, rng);
      const Matrix p = coid::testing::permutation_matrix(perm);
      std::vector<GraphEdge> edges;
      // Node i of the permuted graph is node perm[i] of the original.
      std::vector<int> inv(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) inv[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i;
      for (const auto& e : g.edges) {
        int a = inv[static_cast<std::size_t>(e.i)], b = inv[static_cast<std::size_t>(e.j)];
        edges.push_back({std::min(a, b), std::max(a, b), e.sq_dist});
      }
      const Matrix h = f.gnn.forward(f.store, ad::Tensor::constant(g.features), graph_tensors(g), false, nullptr).h.value();
      const Matrix hp = f.gnn.forward(f.store, ad::Tensor::constant(p * g.features), graph_tensors(n, edges), false, nullptr).h.value();
      CHECK((hp - p * h).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  TEST_CASE("one layer only sees the one-hop neighbourhood") {
    GnnConfig cfg{1, 2, 3, 4, 0.0};
    AttentionGnn gnn("loc", cfg);
    ParamStore store;
    RngStream rng(5);
    gnn.init_params(store, rng);
    const auto g = random_graph(12, 4, rng);
    const auto t = graph_tensors(g);
    const Matrix base = gnn.forward(store, ad::Tensor::constant(g.features), t, false, nullptr).h.value();
    for (Index far = 0; far < 12; ++far) {
      Matrix x = g.features;
      x.row(far) += random_matrix(1, 4, rng);
      const Matrix out = gnn.forward(store, ad::Tensor::constant(x), t, false, nullptr).h.value();
      for (Index i = 0; i < 12; ++i) {
        if (t.mask(i, far) != 0.0) continue;
        CHECK((out.row(i) - base.row(i)).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }

  TEST_CASE("empty graph and width mismatch") {
    Fixture f;
    const auto empty = f.gnn.forward(f.store, ad::Tensor::constant(Matrix(0, 5)), graph_tensors(0, {}), false, nullptr);
    CHECK(empty.h.rows() == 0);
    CHECK(empty.h.cols() == f.cfg.out_dim());
    RngStream rng(6);
    const auto g = random_graph(4, 7, rng);
    CHECK_THROWS_AS(f.gnn.forward(f.store, ad::Tensor::constant(g.features), graph_tensors(g), false, nullptr), ShapeError);
  }

  TEST_CASE("dropout acts only in training") {
    Fixture f;
    RngStream rng(7);
    const auto g = random_graph(6, f.cfg.in_dim, rng);
    const auto t = graph_tensors(g);
    const auto x = ad::Tensor::constant(g.features);
    const Matrix a = f.gnn.forward(f.store, x, t, false, nullptr).h.value();
    CHECK(a == f.gnn.forward(f.store, x, t, false, nullptr).h.value());
    RngStream d1(1), d2(1);
    const Matrix b = f.gnn.forward(f.store, x, t, true, &d1).h.value();
    CHECK(b == f.gnn.forward(f.store, x, t, true, &d2).h.value());
    CHECK(b != a);
  }

  TEST_CASE("parameter gradients match central differences") {
    GnnConfig cfg{2, 2, 2, 3, 0.0};
    AttentionGnn gnn("gc", cfg);
    ParamStore store;
    RngStream rng(8);
    gnn.init_params(store, rng);
    const auto g = random_graph(5, 3, rng);
    const auto t = graph_tensors(g);
    const Matrix w = random_matrix(5, cfg.out_dim(), rng);
    auto loss = [&] {
      return ad::sum(ad::mul(gnn.forward(store, ad::Tensor::constant(g.features), t, false, nullptr).h,
                             ad::Tensor::constant(w)));
    };
    store.zero_grad();
    ad::backward(loss());
    for (auto& e : store.entries()) {
      const Matrix analytic = e.param.grad();
      const Matrix numeric = coid::testing::numeric_gradient(e.param.mutable_value(), [&] { return loss().item(); });
      INFO(e.name);
      CHECK(coid::testing::max_rel_error(analytic, numeric) < 1e-6);
    }
  }

  TEST_CASE("config validation") {
    CHECK_THROWS_AS(gnn_config_from_json({{"heads", 0}}), ConfigError);
    CHECK_THROWS_AS(gnn_config_from_json({{"dropout", 1.0}}), ConfigError);
    CHECK_THROWS_AS(gnn_config_from_json({{"width", 3}}), ConfigError);
    CHECK(gnn_config_from_json(to_json(GnnConfig{3, 2, 8, 10, 0.1})).channels == 8);
  }
}
