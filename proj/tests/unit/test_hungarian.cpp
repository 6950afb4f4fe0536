#include <doctest.h>

#include <algorithm>
#include <limits>

#include "coid/error.hpp"
#include "coid/hungarian.hpp"
#include "test_util.hpp"

using namespace coid;

namespace {

// Exhaustive minimum over injective row -> column maps (rows <= cols).
double brute_force(const Matrix& c) {
  std::vector<int> cols(static_cast<std::size_t>(c.cols()));
  for (Index j = 0; j < c.cols(); ++j) cols[static_cast<std::size_t>(j)] = static_cast<int>(j);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Index i = 0; i < c.rows(); ++i) total += c(i, cols[static_cast<std::size_t>(i)]);
    best = std::min(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

double cost_of(const Matrix& c, const std::vector<int>& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] >= 0) total += c(static_cast<Index>(i), a[i]);
  return total;
}

}  // namespace

TEST_SUITE("hungarian") {
  TEST_CASE("known 3x3 optimum") {
    Matrix c(3, 3);
    c << 4, 1, 3, 2, 0, 5, 3, 2, 2;
    const auto a = hungarian(c);
    CHECK(a == std::vector<int>{1, 0, 2});
    CHECK(cost_of(c, a) == 5.0);
  }

  TEST_CASE("matches brute force on random rectangular problems") {
    RngStream rng(21);
    for (int trial = 0; trial < 200; ++trial) {
      const auto r = static_cast<Index>(rng.uniform_int(1, 6));
      const auto k = static_cast<Index>(rng.uniform_int(1, 6));
      const Matrix c = coid::testing::random_matrix(r, k, rng).cwiseAbs();
      const auto a = hungarian(c);
      REQUIRE(a.size() == static_cast<std::size_t>(r));
      std::vector<int> used;
      for (int j : a)
        if (j >= 0) used.push_back(j);
      std::sort(used.begin(), used.end());
      CHECK(std::adjacent_find(used.begin(), used.end()) == used.end());
      CHECK(used.size() == static_cast<std::size_t>(std::min(r, k)));
      const double opt = r <= k ? brute_force(c) : brute_force(Matrix(c.transpose()));
      CHECK(cost_of(c, a) == doctest::Approx(opt).epsilon(1e-12));
    }
  }

  TEST_CASE("tall matrices leave surplus rows unassigned") {
    Matrix c(3, 1);
    c << 5, 1, 3;
    CHECK(hungarian(c) == std::vector<int>{-1, 0, -1});
  }

  TEST_CASE("empty and non-finite input") {
    CHECK(hungarian(Matrix(0, 3)).empty());
    CHECK(hungarian(Matrix(2, 0)) == std::vector<int>{-1, -1});
    Matrix c = Matrix::Ones(2, 2);
    c(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(hungarian(c), NumericError);
  }
}
