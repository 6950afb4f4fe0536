#pragma once

#include <Eigen/Dense>
#include <array>
#include <span>
#include <utility>
#include <vector>

namespace coid::delaunay {

// Exact-sign geometric predicates: a floating-point filter, falling back to
// expansion arithmetic when the filter cannot certify the sign.

/// +1 if a, b, c are counter-clockwise, -1 if clockwise, 0 if collinear.
int orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c);
/// +1 if d lies strictly inside the circumcircle of counter-clockwise (a, b, c),
/// -1 if strictly outside, 0 if cocircular.
int incircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
             const Eigen::Vector2d& d);

struct Triangulation {
  /// Counter-clockwise vertex triples (input indices). Empty for degenerate input.
  std::vector<std::array<int, 3>> triangles;
  /// Undirected edges (i < j), sorted.
  std::vector<std::pair<int, int>> edges;
};

// Delaunay triangulation of planar points.
//
// Points are swept in lexicographic (x, y) order and the initial fan
// triangulation is legalized with Lawson flips; a flip only happens when the
// opposite vertex is strictly inside a circumcircle, so cocircular ties
// resolve by the lexicographic sweep order, independent of input indexing.
//
// Degenerate inputs:
//   * fewer than 3 points: complete graph;
//   * all distinct points collinear: path through the points in sorted order;
//   * coincident points: each duplicate is joined only to the first copy.
Triangulation triangulate(std::span<const Eigen::Vector2d> points);

}  // namespace coid::delaunay
