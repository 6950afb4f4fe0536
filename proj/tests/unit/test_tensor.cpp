#include <doctest.h>

#include <array>
#include <vector>

#include "coid/error.hpp"
#include "coid/tensor.hpp"
#include "test_util.hpp"

using namespace coid;
using coid::testing::max_rel_error;
using coid::testing::numeric_gradient;
using coid::testing::random_matrix;

namespace {

// Checks d/dx sum(W o f(x)) against central differences.
void check_unary(const Matrix& x0, const std::function<ad::Tensor(const ad::Tensor&)>& f, double tol = 1e-6) {
  RngStream rng(99);
  auto x = ad::Tensor::parameter(x0);
  const Matrix w = random_matrix(f(x).rows(), f(x).cols(), rng);
  auto loss = [&] { return ad::sum(ad::mul(f(x), ad::Tensor::constant(w))); };
  ad::backward(loss());
  const Matrix analytic = x.grad();
  const Matrix numeric = numeric_gradient(x.mutable_value(), [&] { return loss().item(); });
  CHECK(max_rel_error(analytic, numeric) < tol);
}

void check_binary(const Matrix& a0, const Matrix& b0,
                  const std::function<ad::Tensor(const ad::Tensor&, const ad::Tensor&)>& f) {
  RngStream rng(98);
  auto a = ad::Tensor::parameter(a0);
  auto b = ad::Tensor::parameter(b0);
  const auto out = f(a, b);
  const Matrix w = random_matrix(out.rows(), out.cols(), rng);
  auto loss = [&] { return ad::sum(ad::mul(f(a, b), ad::Tensor::constant(w))); };
  ad::backward(loss());
  const Matrix ga = a.grad(), gb = b.grad();
  CHECK(max_rel_error(ga, numeric_gradient(a.mutable_value(), [&] { return loss().item(); })) < 1e-6);
  CHECK(max_rel_error(gb, numeric_gradient(b.mutable_value(), [&] { return loss().item(); })) < 1e-6);
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("binary op gradients match central differences") {
    RngStream rng(1);
    const Matrix a = random_matrix(3, 4, rng), b = random_matrix(3, 4, rng), c = random_matrix(4, 2, rng);
    check_binary(a, c, [](const auto& x, const auto& y) { return ad::matmul(x, y); });
    check_binary(a, b, [](const auto& x, const auto& y) { return ad::add(x, y); });
    check_binary(a, b, [](const auto& x, const auto& y) { return ad::sub(x, y); });
    check_binary(a, b, [](const auto& x, const auto& y) { return ad::mul(x, y); });
    check_binary(a, random_matrix(1, 4, rng), [](const auto& x, const auto& y) { return ad::add_row(x, y); });
    check_binary(a, random_matrix(3, 2, rng), [](const auto& x, const auto& y) {
      const std::array<ad::Tensor, 2> parts{x, y};
      return ad::concat_cols(parts);
    });
    check_binary(a, b, [](const auto& x, const auto& y) {
      const std::array<ad::Tensor, 3> parts{x, y, x};
      return ad::mean(parts);
    });
  }

  TEST_CASE("unary op gradients match central differences") {
    RngStream rng(2);
    const Matrix a = random_matrix(3, 5, rng);
    check_unary(a, [](const auto& x) { return ad::transpose(x); });
    check_unary(a, [](const auto& x) { return ad::scale(x, -2.5); });
    check_unary(a, [](const auto& x) { return ad::slice_cols(x, 1, 3); });
    check_unary(a, [](const auto& x) { return ad::relu(x); });
    check_unary(a, [](const auto& x) { return ad::softmax_rows(x); });
    check_unary(a, [](const auto& x) { return ad::reshape(x, 5, 3); });
    check_unary(a, [](const auto& x) { return ad::row_sum(x); });
    check_unary(a, [](const auto& x) { return ad::sum(x); });
    check_unary(a, [](const auto& x) { return ad::mean_all(x); });
    const std::vector<Index> rows{2, 0, 2};
    check_unary(a, [&](const auto& x) { return ad::gather_rows(x, rows); });
    Matrix mask = Matrix::Ones(3, 5);
    mask(0, 1) = mask(1, 4) = mask(2, 0) = 0.0;
    check_unary(a, [&](const auto& x) { return ad::softmax_rows(x, mask); });
    check_unary(a, [](const auto& x) {
      RngStream drop(5);
      return ad::dropout(x, 0.4, true, drop);
    });
  }

  TEST_CASE("shared subexpressions accumulate gradients") {
    auto x = ad::Tensor::parameter(Matrix::Constant(1, 1, 3.0));
    const auto y = ad::mul(x, x);  // x^2
    ad::backward(ad::sum(ad::add(y, ad::scale(x, 4.0))));
    CHECK(x.grad()(0, 0) == doctest::Approx(10.0));
  }

  TEST_CASE("softmax rows sum to one and masked entries are zero") {
    RngStream rng(3);
    Matrix mask = Matrix::Ones(4, 4);
    mask(0, 0) = mask(2, 3) = 0.0;
    const Matrix y = ad::softmax_rows(ad::Tensor::constant(random_matrix(4, 4, rng, 10.0)), mask).value();
    for (Index i = 0; i < 4; ++i) CHECK(y.row(i).sum() == doctest::Approx(1.0));
    CHECK(y(0, 0) == 0.0);
    CHECK(y(2, 3) == 0.0);
  }

  TEST_CASE("softmax is stable for large logits") {
    Matrix big(1, 3);
    big << 1000.0, 999.0, -1000.0;
    const Matrix y = ad::softmax_rows(ad::Tensor::constant(big)).value();
    CHECK(y.allFinite());
    CHECK(y(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  }

  TEST_CASE("fully masked row is an error") {
    Matrix mask = Matrix::Ones(2, 2);
    mask.row(1).setZero();
    CHECK_THROWS_AS(ad::softmax_rows(ad::Tensor::constant(Matrix::Zero(2, 2)), mask), NumericError);
  }

  TEST_CASE("dropout is the identity outside training and scales kept entries") {
    RngStream rng(4);
    const auto x = ad::Tensor::constant(Matrix::Ones(50, 50));
    CHECK(ad::dropout(x, 0.5, false, rng).value() == x.value());
    const Matrix y = ad::dropout(x, 0.5, true, rng).value();
    for (Index i = 0; i < y.size(); ++i) CHECK((y.data()[i] == 0.0 || y.data()[i] == 2.0));
    CHECK(y.mean() == doctest::Approx(1.0).epsilon(0.1));
  }

  TEST_CASE("shape errors") {
    const auto a = ad::Tensor::constant(Matrix::Zero(2, 3));
    CHECK_THROWS_AS(ad::matmul(a, a), ShapeError);
    CHECK_THROWS_AS(ad::add(a, ad::transpose(a)), ShapeError);
    CHECK_THROWS_AS(ad::slice_cols(a, 2, 2), ShapeError);
    CHECK_THROWS_AS(ad::reshape(a, 4, 2), ShapeError);
  }

  TEST_CASE("backward needs a tracked scalar") {
    auto x = ad::Tensor::parameter(Matrix::Ones(2, 2));
    CHECK_THROWS(ad::backward(x));
    CHECK_THROWS(ad::backward(ad::sum(ad::Tensor::constant(Matrix::Ones(2, 2)))));
  }

  TEST_CASE("reshape is row-major") {
    Matrix a(2, 3);
    a << 1, 2, 3, 4, 5, 6;
    const Matrix r = ad::reshape(ad::Tensor::constant(a), 3, 2).value();
    Matrix expect(3, 2);
    expect << 1, 2, 3, 4, 5, 6;
    CHECK(r == expect);
  }

  TEST_CASE("no-grad scope records no graph and nests") {
    auto x = ad::Tensor::parameter(Matrix::Ones(2, 2));
    {
      const ad::NoGrad outer;
      {
        const ad::NoGrad inner;
        CHECK_FALSE(ad::matmul(x, x).tracked());
      }
      const auto y = ad::sum(ad::matmul(x, x));
      CHECK_FALSE(y.tracked());
      CHECK(y.value()(0, 0) == doctest::Approx(8.0));
    }
    CHECK(ad::sum(ad::matmul(x, x)).tracked());
  }

  TEST_CASE("matmul agrees with a plain product on thin and wide shapes") {
    RngStream rng(5);
    const std::array<std::array<int, 3>, 5> shapes{{{1, 40, 3}, {16, 20, 30}, {30, 20, 16}, {17, 25, 18}, {40, 1, 40}}};
    for (const auto& [m, k, n] : shapes) {
      const Matrix a0 = random_matrix(m, k, rng);
      const Matrix b0 = random_matrix(k, n, rng);
      auto a = ad::Tensor::parameter(a0);
      auto b = ad::Tensor::parameter(b0);
      const Matrix w = random_matrix(m, n, rng);
      ad::backward(ad::sum(ad::mul(ad::matmul(a, b), ad::Tensor::constant(w))));
      CHECK(max_rel_error(ad::matmul(a, b).value(), a0 * b0) < 1e-12);
      CHECK(max_rel_error(a.grad(), w * b0.transpose()) < 1e-12);
      CHECK(max_rel_error(b.grad(), a0.transpose() * w) < 1e-12);
    }
  }
}
