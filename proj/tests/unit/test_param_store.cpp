#include <doctest.h>

#include <cmath>
#include <fstream>

#include "coid/error.hpp"
#include "coid/param_store.hpp"
#include "test_util.hpp"

using namespace coid;

TEST_SUITE("param_store") {
  TEST_CASE("glorot init stays inside its bound") {
    ParamStore s;
    RngStream rng(1);
    const auto& w = s.add_glorot("w", 30, 50, rng);
    const double bound = std::sqrt(6.0 / 80.0);
    CHECK(w.value().cwiseAbs().maxCoeff() <= bound);
    CHECK(w.value().cwiseAbs().maxCoeff() > 0.9 * bound);
    CHECK(std::abs(w.value().mean()) < 0.02);
  }

  TEST_CASE("duplicate names are rejected") {
    ParamStore s;
    s.add_zeros("a", 1, 1);
    CHECK_THROWS_AS(s.add_zeros("a", 2, 2), ConfigError);
    CHECK_THROWS(s.get("missing"));
  }

  TEST_CASE("adam first step moves each weight by lr against the gradient sign") {
    ParamStore s;
    s.add("w", Matrix::Zero(1, 3));
    auto w = s.get("w");
    Matrix target(1, 3);
    target << 1.0, -2.0, 0.5;
    const auto diff = ad::sub(w, ad::Tensor::constant(target));
    ad::backward(ad::sum(ad::mul(diff, diff)));
    adam_step(s, AdamConfig{0.1});
    // Bias-corrected first step is lr * g / (|g| + eps).
    CHECK(s.get("w").value()(0, 0) == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(s.get("w").value()(0, 1) == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(s.get("w").value()(0, 2) == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(s.step() == 1);
  }

  TEST_CASE("adam matches a hand-rolled reference over several steps") {
    ParamStore s;
    s.add("w", Matrix::Constant(1, 1, 2.0));
    double x = 2.0, m = 0.0, v = 0.0;
    const AdamConfig cfg{0.05};
    for (int t = 1; t <= 5; ++t) {
      auto w = s.get("w");
      ad::backward(ad::sum(ad::mul(ad::mul(w, w), w)));  // x^3
      adam_step(s, cfg);
      const double g = 3.0 * x * x;
      m = cfg.beta1 * m + (1 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
      const double mh = m / (1 - std::pow(cfg.beta1, t)), vh = v / (1 - std::pow(cfg.beta2, t));
      x -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
      CHECK(s.get("w").value()(0, 0) == doctest::Approx(x).epsilon(1e-12));
    }
  }

  TEST_CASE("adam without gradients or with non-finite gradients fails") {
    ParamStore s;
    s.add("w", Matrix::Ones(1, 1));
    CHECK_THROWS_AS(adam_step(s, {}), NumericError);
    auto w = s.get("w");
    ad::backward(ad::sum(ad::scale(w, std::nan(""))));
    CHECK_THROWS_AS(adam_step(s, {}), NumericError);
  }

  TEST_CASE("checkpoint round trip is exact") {
    ParamStore s;
    RngStream rng(3);
    s.add_glorot("a", 4, 3, rng);
    s.add_zeros("b", 1, 3);
    auto a = s.get("a");
    ad::backward(ad::sum(ad::mul(a, a)));
    adam_step(s, {});
    const auto dir = coid::testing::temp_dir("ckpt");
    const nlohmann::json cfg{{"k", 1.5}};
    save_checkpoint(dir / "c.json", {s, cfg, {{"epoch", 3}}});
    const Checkpoint back = load_checkpoint(dir / "c.json");
    CHECK(back.params.step() == 1);
    CHECK(back.config == cfg);
    CHECK(back.extra["epoch"] == 3);
    for (std::size_t i = 0; i < s.entries().size(); ++i) {
      const auto& x = s.entries()[i];
      const auto& y = back.params.entries()[i];
      CHECK(x.name == y.name);
      CHECK(x.param.value() == y.param.value());
      CHECK(x.m == y.m);
      CHECK(x.v == y.v);
    }
  }

  TEST_CASE("tampered checkpoint config is detected") {
    ParamStore s;
    s.add_zeros("a", 1, 1);
    const auto dir = coid::testing::temp_dir("ckpt_tamper");
    save_checkpoint(dir / "c.json", {s, {{"k", 1}}, {}});
    std::ifstream in(dir / "c.json");
    auto j = nlohmann::json::parse(in);
    j["config"]["k"] = 2;
    std::ofstream(dir / "c.json") << j.dump();
    CHECK_THROWS_AS(load_checkpoint(dir / "c.json"), DataError);
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.json"), DataError);
  }

  TEST_CASE("clone is deep") {
    ParamStore s;
    s.add_zeros("a", 1, 1);
    ParamStore c = s.clone();
    s.entries()[0].param.mutable_value()(0, 0) = 5.0;
    CHECK(c.get("a").value()(0, 0) == 0.0);
  }
}
