#include "coid/scene_graph.hpp"

#include <cmath>

#include "coid/delaunay.hpp"
#include "coid/error.hpp"

namespace coid {

namespace {

nlohmann::json rows_to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    out.push_back(std::move(row));
  }
  return out;
}

Matrix rows_from_json(const nlohmann::json& j, Index expect_cols, const char* what) {
  if (!j.is_array()) throw DataError(std::string("scene graph: '") + what + "' must be an array");
  const auto rows = static_cast<Index>(j.size());
  Index cols = expect_cols;
  if (cols < 0) cols = rows > 0 ? static_cast<Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& r = j[static_cast<std::size_t>(i)];
    if (!r.is_array() || static_cast<Index>(r.size()) != cols)
      throw DataError(std::string("scene graph: ragged '") + what + "' row " + std::to_string(i));
    for (Index c = 0; c < cols; ++c) m(i, c) = r[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

SceneGraph build_graph(Matrix positions, Matrix features, const Pose& pose) {
  if (positions.rows() > 0 && positions.cols() != 3)
    throw ShapeError("build_graph: positions must be n x 3, got " + shape_string(positions));
  if (positions.rows() == 0) positions.resize(0, 3);
  if (features.rows() != positions.rows())
    throw ShapeError("build_graph: features " + shape_string(features) + " vs positions " +
                     shape_string(positions));
  if (!positions.allFinite() || !features.allFinite() || !pose.t.allFinite() ||
      !std::isfinite(pose.yaw_deg))
    throw DataError("invalid coordinates");

  SceneGraph g;
  g.positions = std::move(positions);
  g.features = std::move(features);
  g.pose = pose;

  std::vector<Eigen::Vector2d> ground(static_cast<std::size_t>(g.size()));
  for (Index i = 0; i < g.size(); ++i) ground[static_cast<std::size_t>(i)] = {g.positions(i, 0), g.positions(i, 1)};
  for (const auto& [i, j] : delaunay::triangulate(ground).edges) {
    const double a = (g.positions.row(i) - g.positions.row(j)).squaredNorm();
    g.edges.push_back({i, j, a});
  }
  g.world_positions = to_world(g);
  return g;
}

Matrix to_world(const SceneGraph& graph) { return transform_rows(graph.positions, graph.pose); }

nlohmann::json to_json(const SceneGraph& graph) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : graph.edges) edges.push_back({e.i, e.j, e.sq_dist});
  nlohmann::json j{{"positions", rows_to_json(graph.positions)},
                   {"features", rows_to_json(graph.features)},
                   {"edges", edges},
                   {"pose", pose_to_json(graph.pose)}};
  if (!graph.object_ids.empty()) j["object_ids"] = graph.object_ids;
  return j;
}

SceneGraph scene_graph_from_json(const nlohmann::json& j) {
  try {
    Matrix positions = rows_from_json(j.at("positions"), 3, "positions");
    Matrix features = rows_from_json(j.at("features"), -1, "features");
    if (features.rows() != positions.rows())
      throw ShapeError("scene graph: " + std::to_string(features.rows()) + " feature rows vs " +
                       std::to_string(positions.rows()) + " positions");
    const Pose pose = pose_from_json(j.at("pose"));
    SceneGraph g = build_graph(std::move(positions), std::move(features), pose);
    if (j.contains("edges")) {
      g.edges.clear();
      for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 3) throw DataError("scene graph: edge must be [i, j, a_ij]");
        int a = e[0].get<int>(), b = e[1].get<int>();
        const double w = e[2].get<double>();
        if (a == b || a < 0 || b < 0 || a >= g.size() || b >= g.size() || !std::isfinite(w))
          throw DataError("scene graph: invalid edge [" + std::to_string(a) + ", " +
                          std::to_string(b) + "]");
        if (a > b) std::swap(a, b);
        g.edges.push_back({a, b, w});
      }
    }
    if (j.contains("object_ids")) {
      g.object_ids = j.at("object_ids").get<std::vector<int>>();
      if (static_cast<Index>(g.object_ids.size()) != g.size())
        throw DataError("scene graph: object_ids length does not match node count");
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scene graph: ") + e.what());
  }
}

GraphTensors graph_tensors(const SceneGraph& graph) { return graph_tensors(graph.size(), graph.edges); }

GraphTensors graph_tensors(Index n, const std::vector<GraphEdge>& edges) {
  double mean = 0.0, stddev = 1.0;
  if (!edges.empty()) {
    for (const auto& e : edges) mean += e.sq_dist;
    mean /= static_cast<double>(edges.size());
    double var = 0.0;
    for (const auto& e : edges) var += (e.sq_dist - mean) * (e.sq_dist - mean);
    var /= static_cast<double>(edges.size());
    if (var > 0.0) stddev = std::sqrt(var);
  }
  GraphTensors t;
  t.mask = Matrix::Identity(n, n);
  t.edge_attr = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) t.edge_attr(i, i) = (0.0 - mean) / stddev;
  for (const auto& e : edges) {
    const double a = (e.sq_dist - mean) / stddev;
    t.mask(e.i, e.j) = t.mask(e.j, e.i) = 1.0;
    t.edge_attr(e.i, e.j) = t.edge_attr(e.j, e.i) = a;
  }
  return t;
}

}  // namespace coid
