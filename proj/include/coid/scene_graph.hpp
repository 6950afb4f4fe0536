#pragma once

#include <nlohmann/json.hpp>
#include <vector>

#include "coid/geometry.hpp"
#include "coid/tensor.hpp"

namespace coid {

struct GraphEdge {
  int i = 0;  // i < j
  int j = 0;
  double sq_dist = 0.0;  // squared 3D distance between the endpoints, m^2

  bool operator==(const GraphEdge&) const = default;
};

// One agent's object-level observation.
struct SceneGraph {
  Matrix positions;        // n x 3, agent frame, meters
  Matrix features;         // n x d appearance descriptors
  std::vector<GraphEdge> edges;
  Pose pose;               // agent pose as reported by its GPS
  Matrix world_positions;  // n x 3, pose applied to positions
  std::vector<int> object_ids;  // simulator provenance; empty for external graphs

  Index size() const { return positions.rows(); }
  Index feature_dim() const { return features.cols(); }
  bool empty() const { return size() == 0; }
};

/// Delaunay graph on the ground-plane (x, y) projection, edge attributes =
/// squared 3D distances. Throws DataError("invalid coordinates") on non-finite input.
SceneGraph build_graph(Matrix positions, Matrix features, const Pose& pose);

/// p_i = R(yaw) v_i + t for every node.
Matrix to_world(const SceneGraph& graph);

nlohmann::json to_json(const SceneGraph& graph);
/// Accepts externally produced graphs. When "edges" is absent the Delaunay
/// graph is built from the positions.
SceneGraph scene_graph_from_json(const nlohmann::json& j);

/// Dense helpers used by the networks.
struct GraphTensors {
  Matrix mask;        // n x n, 1 on Delaunay edges and on the diagonal
  Matrix edge_attr;   // n x n, standardized squared distances (0 where mask == 0)
};

// Edge attributes are standardized per graph, a -> (a - mean) / std over the
// edge set; self edges carry the same map applied to a = 0. Without edges the
// mean is 0, and with zero spread the std is 1.
GraphTensors graph_tensors(const SceneGraph& graph);
GraphTensors graph_tensors(Index n, const std::vector<GraphEdge>& edges);

}  // namespace coid
