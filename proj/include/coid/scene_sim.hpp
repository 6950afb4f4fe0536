#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <utility>
#include <vector>

#include "coid/geometry.hpp"
#include "coid/scene_graph.hpp"

namespace coid {

// Synthetic two-agent street scene. Objects sit in a ground rectangle
// centred at the origin; both agents stand outside it looking at the centre
// from different azimuths.
struct SimConfig {
  int n_objects_min = 12;
  int n_objects_max = 24;
  // Object spacing of a few metres keeps GPS noise ambiguous.
  double area_width = 12.0;   // x extent, m
  double area_depth = 12.0;   // y extent, m
  double object_height_max = 2.0;
  double agent_distance = 9.0;  // from the scene centre, m
  double agent_azimuth_jitter_deg = 30.0;
  double agent_separation_min_deg = 50.0;
  double agent_separation_max_deg = 130.0;
  double heading_jitter_deg = 8.0;
  double fov_half_angle = 0.6981317007977318;  // radians (40 deg)
  double max_range = 80.0;
  double occlusion_prob = 0.15;
  double block_window_deg = 1.0;  // angular window for blocking by nearer objects
  int appearance_classes = 6;
  int feature_dim = 64;
  double sigma_feat = 0.1;
  double sigma_depth = 0.1;   // m, along the viewing ray
  double sigma_gps = 1.2;     // m, per axis
  double sigma_yaw_deg = 0.2;
  // Scenes whose views fall outside [view_objects_min, view_objects_max]
  // objects are redrawn, up to view_attempts draws; the last draw is kept.
  int view_objects_min = 5;
  int view_objects_max = 15;
  int view_attempts = 64;

  /// Throws ConfigError on invalid values.
  void validate() const;
};

nlohmann::json to_json(const SimConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
SimConfig sim_config_from_json(const nlohmann::json& j);

struct WorldObject {
  int id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  int appearance_class = 0;
};

struct WorldScene {
  std::uint64_t seed = 0;
  std::vector<WorldObject> objects;
  std::array<Pose, 2> agent_poses;
  /// Object ids seen by each agent, in node order.
  std::array<std::vector<int>, 2> view_ids;
  /// (node index in view A, node index in view B) for shared objects.
  std::vector<std::pair<int, int>> gt_correspondence;
};

nlohmann::json to_json(const WorldScene& scene);
WorldScene world_scene_from_json(const nlohmann::json& j);

/// Places objects and agents and decides visibility. Throws ConfigError("degenerate config")
/// for an empty object-count range.
WorldScene generate_scene(const SimConfig& cfg, std::uint64_t seed);

/// Noisy observation of the scene by agent 0 or 1.
SceneGraph render_view(const WorldScene& scene, int agent, const SimConfig& cfg);

/// Unit class prototypes: class c maps to the c-th standard basis vector.
Matrix class_prototypes(int classes, int feature_dim);

}  // namespace coid
