#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "coid/delaunay.hpp"
#include "test_util.hpp"

using namespace coid;
using namespace coid::delaunay;
using Eigen::Vector2d;

namespace {

// Hull vertex count by Andrew's monotone chain (strict turns only).
int hull_size(std::vector<Vector2d> p) {
  std::sort(p.begin(), p.end(), [](const auto& a, const auto& b) { return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y(); });
  auto cross = [](const Vector2d& o, const Vector2d& a, const Vector2d& b) {
    return (a - o).x() * (b - o).y() - (a - o).y() * (b - o).x();
  };
  std::vector<Vector2d> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(h[k - 2], h[k - 1], p[i - 1]) <= 0) --k;
    h[k++] = p[i - 1];
  }
  return static_cast<int>(k - 1);
}

// Floating-point circumcircle test with a relative safety margin.
bool strictly_inside(const Vector2d& a, const Vector2d& b, const Vector2d& c, const Vector2d& d) {
  const double ax = a.x(), ay = a.y(), bx = b.x(), by = b.y(), cx = c.x(), cy = c.y();
  const double den = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
  const double ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / den;
  const double uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / den;
  const Vector2d u(ux, uy);
  return (d - u).squaredNorm() < (a - u).squaredNorm() * (1.0 - 1e-9);
}

std::vector<Vector2d> random_points(int n, RngStream& rng) {
  std::vector<Vector2d> p;
  for (int i = 0; i < n; ++i) p.emplace_back(rng.uniform(-10, 10), rng.uniform(-10, 10));
  return p;
}

}  // namespace

TEST_SUITE("delaunay") {
  TEST_CASE("predicates on simple configurations") {
    CHECK(orient2d({0, 0}, {1, 0}, {0, 1}) == 1);
    CHECK(orient2d({0, 0}, {0, 1}, {1, 0}) == -1);
    CHECK(orient2d({0, 0}, {1, 1}, {2, 2}) == 0);
    CHECK(incircle({0, 0}, {1, 0}, {0, 1}, {0.5, 0.5}) == 1);
    CHECK(incircle({0, 0}, {1, 0}, {0, 1}, {1, 1}) == 0);
    CHECK(incircle({0, 0}, {1, 0}, {0, 1}, {2, 2}) == -1);
  }

  TEST_CASE("orient2d is exact on nearly collinear input") {
    // Points on the line y = x perturbed by one ulp; naive evaluation is unreliable here.
    const Vector2d a(0.5, 0.5), b(12.0, 12.0), c(24.0, 24.0);
    CHECK(orient2d(a, b, c) == 0);
    const Vector2d c_up(24.0, std::nextafter(24.0, 25.0));
    CHECK(orient2d(a, b, c_up) == 1);
    const Vector2d c_down(24.0, std::nextafter(24.0, 23.0));
    CHECK(orient2d(a, b, c_down) == -1);
  }

  TEST_CASE("random point sets satisfy the empty circumcircle property") {
    RngStream rng(11);
    for (int trial = 0; trial < 40; ++trial) {
      const int n = 3 + static_cast<int>(rng.uniform_int(0, 40));
      const auto pts = random_points(n, rng);
      const Triangulation t = triangulate(pts);
      REQUIRE(static_cast<int>(t.triangles.size()) == 2 * n - 2 - hull_size(pts));
      CHECK(static_cast<int>(t.edges.size()) == 3 * n - 3 - hull_size(pts));
      CHECK(static_cast<int>(t.edges.size()) <= 3 * n - 6 + (n == 3 ? 3 : 0));
      for (const auto& tri : t.triangles) {
        CHECK(orient2d(pts[tri[0]], pts[tri[1]], pts[tri[2]]) == 1);
        for (int k = 0; k < n; ++k) {
          if (k == tri[0] || k == tri[1] || k == tri[2]) continue;
          CHECK_FALSE(strictly_inside(pts[tri[0]], pts[tri[1]], pts[tri[2]], pts[k]));
        }
      }
    }
  }

  TEST_CASE("convex quadrilateral keeps exactly the Delaunay diagonal") {
    RngStream rng(12);
    for (int trial = 0; trial < 200; ++trial) {
      // Four points on distinct angular sectors of an ellipse-ish ring form a convex quad.
      std::vector<Vector2d> q;
      for (int k = 0; k < 4; ++k) {
        const double ang = (k + rng.uniform(0.1, 0.9)) * std::numbers::pi / 2.0;
        const double r = rng.uniform(1.0, 3.0);
        q.emplace_back(r * std::cos(ang), r * std::sin(ang));
      }
      if (hull_size(q) != 4) continue;
      const Triangulation t = triangulate(q);
      const std::set<std::pair<int, int>> e(t.edges.begin(), t.edges.end());
      const bool d02 = e.count({0, 2}) > 0, d13 = e.count({1, 3}) > 0;
      CHECK(d02 != d13);
      // Brute force: diagonal 0-2 is legal iff 3 is outside the circle through 0, 1, 2.
      const bool expect02 = !strictly_inside(q[0], q[1], q[2], q[3]);
      const bool expect13 = !strictly_inside(q[1], q[2], q[3], q[0]);
      if (expect02 != expect13) CHECK(d02 == expect02);
    }
  }

  TEST_CASE("degenerate inputs") {
    const std::vector<Vector2d> none;
    CHECK(triangulate(none).edges.empty());
    const std::vector<Vector2d> one{{0, 0}};
    CHECK(triangulate(one).edges.empty());
    const std::vector<Vector2d> two{{0, 0}, {1, 1}};
    CHECK(triangulate(two).edges == std::vector<std::pair<int, int>>{{0, 1}});
    const std::vector<Vector2d> line{{3, 3}, {0, 0}, {1, 1}, {2, 2}};
    const auto path = triangulate(line);
    CHECK(path.triangles.empty());
    CHECK(path.edges == std::vector<std::pair<int, int>>{{0, 3}, {1, 2}, {2, 3}});
  }

  TEST_CASE("cocircular grid is triangulated deterministically") {
    std::vector<Vector2d> grid;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) grid.emplace_back(i, j);
    const auto a = triangulate(grid);
    const auto b = triangulate(grid);
    CHECK(a.edges == b.edges);
    CHECK(a.triangles.size() == 18);
    CHECK(a.edges.size() == 33);
  }

  TEST_CASE("duplicate points do not break the triangulation") {
    const std::vector<Vector2d> pts{{0, 0}, {1, 0}, {0, 1}, {1, 0}, {1, 1}};
    const auto t = triangulate(pts);
    for (const auto& [i, j] : t.edges) CHECK(i != j);
    std::set<int> touched;
    for (const auto& [i, j] : t.edges) touched.insert({i, j});
    CHECK(touched.size() == 5);
  }
}
