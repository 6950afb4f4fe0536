#include "coid/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace coid::delaunay {

namespace {

// ---- expansion arithmetic -------------------------------------------------
// An expansion is a sum of non-overlapping doubles stored in increasing
// magnitude; its sign is the sign of the last non-zero component.

using Expansion = std::vector<double>;

constexpr double kEps = 0x1.0p-53;

inline void two_sum(double a, double b, double& x, double& y) {
  x = a + b;
  const double bv = x - a;
  const double av = x - bv;
  y = (a - av) + (b - bv);
}

inline void two_product(double a, double b, double& x, double& y) {
  x = a * b;
  y = std::fma(a, b, -x);
}

Expansion grow(const Expansion& e, double b) {
  Expansion h;
  h.reserve(e.size() + 1);
  double q = b;
  for (double ei : e) {
    double sum, err;
    two_sum(q, ei, sum, err);
    if (err != 0.0) h.push_back(err);
    q = sum;
  }
  if (q != 0.0 || h.empty()) h.push_back(q);
  return h;
}

Expansion add(const Expansion& e, const Expansion& f) {
  Expansion h = e;
  for (double fi : f) h = grow(h, fi);
  return h;
}

Expansion negate(Expansion e) {
  for (double& x : e) x = -x;
  return e;
}

Expansion scale(const Expansion& e, double b) {
  Expansion h{0.0};
  for (double ei : e) {
    double p, q;
    two_product(ei, b, p, q);
    h = grow(h, q);
    h = grow(h, p);
  }
  return h;
}

Expansion mul(const Expansion& e, const Expansion& f) {
  Expansion h{0.0};
  for (double fi : f) h = add(h, scale(e, fi));
  return h;
}

Expansion diff(double a, double b) {
  double x, y;
  two_sum(a, -b, x, y);
  return y == 0.0 ? Expansion{x} : Expansion{y, x};
}

int sign(const Expansion& e) {
  for (auto it = e.rbegin(); it != e.rend(); ++it)
    if (*it != 0.0) return *it > 0.0 ? 1 : -1;
  return 0;
}

int orient2d_exact(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const Expansion left = mul(diff(a.x(), c.x()), diff(b.y(), c.y()));
  const Expansion right = mul(diff(a.y(), c.y()), diff(b.x(), c.x()));
  return sign(add(left, negate(right)));
}

int incircle_exact(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                   const Eigen::Vector2d& d) {
  const Expansion adx = diff(a.x(), d.x()), ady = diff(a.y(), d.y());
  const Expansion bdx = diff(b.x(), d.x()), bdy = diff(b.y(), d.y());
  const Expansion cdx = diff(c.x(), d.x()), cdy = diff(c.y(), d.y());
  const Expansion alift = add(mul(adx, adx), mul(ady, ady));
  const Expansion blift = add(mul(bdx, bdx), mul(bdy, bdy));
  const Expansion clift = add(mul(cdx, cdx), mul(cdy, cdy));
  const Expansion bc = add(mul(bdx, cdy), negate(mul(cdx, bdy)));
  const Expansion ca = add(mul(cdx, ady), negate(mul(adx, cdy)));
  const Expansion ab = add(mul(adx, bdy), negate(mul(bdx, ady)));
  return sign(add(add(mul(alift, bc), mul(blift, ca)), mul(clift, ab)));
}

}  // namespace

int orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const double left = (a.x() - c.x()) * (b.y() - c.y());
  const double right = (a.y() - c.y()) * (b.x() - c.x());
  const double det = left - right;
  const double bound = (3.0 + 16.0 * kEps) * kEps * (std::abs(left) + std::abs(right));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return orient2d_exact(a, b, c);
}

int incircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
             const Eigen::Vector2d& d) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det =
      alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
  const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                           (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                           (std::abs(adxbdy) + std::abs(bdxady)) * clift;
  const double bound = (10.0 + 96.0 * kEps) * kEps * permanent;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return incircle_exact(a, b, c, d);
}

namespace {

class Mesh {
 public:
  explicit Mesh(std::span<const Eigen::Vector2d> pts) : pts_(pts) {}

  void add_triangle(int a, int b, int c) {
    const int t = static_cast<int>(tris_.size());
    tris_.push_back({a, b, c});
    link(t);
  }

  // Lawson flips until every interior edge is locally Delaunay.
  void legalize() {
    std::vector<std::pair<int, int>> stack;
    for (const auto& t : tris_)
      for (int k = 0; k < 3; ++k) stack.emplace_back(t[k], t[(k + 1) % 3]);
    while (!stack.empty()) {
      const auto [u, v] = stack.back();
      stack.pop_back();
      const auto it1 = owner_.find({u, v});
      const auto it2 = owner_.find({v, u});
      if (it1 == owner_.end() || it2 == owner_.end()) continue;
      const int t1 = it1->second, t2 = it2->second;
      const int c = opposite(t1, u, v);
      const int d = opposite(t2, v, u);
      if (incircle(pts_[u], pts_[v], pts_[c], pts_[d]) <= 0) continue;
      unlink(t1);
      unlink(t2);
      tris_[t1] = {c, u, d};
      tris_[t2] = {c, d, v};
      link(t1);
      link(t2);
      stack.emplace_back(u, c);
      stack.emplace_back(c, v);
      stack.emplace_back(v, d);
      stack.emplace_back(d, u);
    }
  }

  const std::vector<std::array<int, 3>>& triangles() const { return tris_; }

 private:
  int opposite(int t, int u, int v) const {
    for (int x : tris_[t])
      if (x != u && x != v) return x;
    return -1;
  }
  void link(int t) {
    const auto& tr = tris_[t];
    for (int k = 0; k < 3; ++k) owner_[{tr[k], tr[(k + 1) % 3]}] = t;
  }
  void unlink(int t) {
    const auto& tr = tris_[t];
    for (int k = 0; k < 3; ++k) owner_.erase({tr[k], tr[(k + 1) % 3]});
  }

  std::span<const Eigen::Vector2d> pts_;
  std::vector<std::array<int, 3>> tris_;
  std::map<std::pair<int, int>, int> owner_;  // directed edge -> triangle
};

void add_edge(std::vector<std::pair<int, int>>& edges, int a, int b) {
  edges.emplace_back(std::min(a, b), std::max(a, b));
}

}  // namespace

Triangulation triangulate(std::span<const Eigen::Vector2d> points) {
  Triangulation out;
  const int n = static_cast<int>(points.size());
  if (n < 2) return out;
  if (n < 3) {
    add_edge(out.edges, 0, 1);
    return out;
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& p = points[a];
    const auto& q = points[b];
    if (p.x() != q.x()) return p.x() < q.x();
    if (p.y() != q.y()) return p.y() < q.y();
    return a < b;
  });

  std::vector<int> reps;
  for (int idx : order) {
    if (!reps.empty() && points[reps.back()] == points[idx])
      add_edge(out.edges, reps.back(), idx);
    else
      reps.push_back(idx);
  }
  const auto m = reps.size();

  auto finish = [&] {
    std::sort(out.edges.begin(), out.edges.end());
    out.edges.erase(std::unique(out.edges.begin(), out.edges.end()), out.edges.end());
    return out;
  };

  std::size_t k = 2;
  while (k < m && orient2d(points[reps[0]], points[reps[1]], points[reps[k]]) == 0) ++k;
  if (k >= m) {
    for (std::size_t i = 0; i + 1 < m; ++i) add_edge(out.edges, reps[i], reps[i + 1]);
    return finish();
  }

  Mesh mesh(points);
  const int apex = reps[k];
  const bool left = orient2d(points[reps[0]], points[reps[1]], points[apex]) > 0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if (left)
      mesh.add_triangle(reps[i], reps[i + 1], apex);
    else
      mesh.add_triangle(reps[i + 1], reps[i], apex);
  }

  // Counter-clockwise hull.
  std::vector<int> hull;
  if (left) {
    for (std::size_t i = 0; i < k; ++i) hull.push_back(reps[i]);
    hull.push_back(apex);
  } else {
    hull.push_back(reps[0]);
    hull.push_back(apex);
    for (std::size_t i = k - 1; i >= 1; --i) hull.push_back(reps[i]);
  }

  for (std::size_t s = k + 1; s < m; ++s) {
    const int p = reps[s];
    const auto h = hull.size();
    auto visible = [&](std::size_t i) {
      return orient2d(points[hull[i]], points[hull[(i + 1) % h]], points[p]) < 0;
    };
    std::size_t first = 0;
    while (first < h && !visible(first)) ++first;
    // A lexicographically larger distinct point always sees some hull edge.
    while (visible((first + h - 1) % h) && (first + h - 1) % h != first) first = (first + h - 1) % h;
    std::size_t count = 0;
    while (count < h && visible((first + count) % h)) ++count;
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t i = (first + c) % h;
      mesh.add_triangle(hull[(i + 1) % h], hull[i], p);
    }
    // Drop the hull vertices strictly inside the visible chain, insert p.
    std::vector<int> next;
    next.reserve(h + 1);
    for (std::size_t c = 0; c < h - count + 1; ++c) {
      const std::size_t i = (first + count + c) % h;
      next.push_back(hull[i]);
    }
    next.push_back(p);
    hull = std::move(next);
  }

  mesh.legalize();
  for (const auto& t : mesh.triangles()) {
    out.triangles.push_back(t);
    for (int e = 0; e < 3; ++e) add_edge(out.edges, t[e], t[(e + 1) % 3]);
  }
  return finish();
}

}  // namespace coid::delaunay
