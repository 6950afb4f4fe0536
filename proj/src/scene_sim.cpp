#include "coid/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "coid/error.hpp"
#include "coid/rng.hpp"

namespace coid {

namespace {

// Sub-stream labels. World layout and per-view noise draw from disjoint
// streams so that changing one noise level leaves every other draw intact.
enum Stream : std::uint64_t {
  kLayout = 1,
  kAgents = 2,
  kDrop = 3,
  kOrder = 4,
  kDepth = 5,
  kFeature = 6,
  kGps = 7,
  kResample = 8,
};

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

#define COID_SIM_FIELDS(X)                                                                   \
  X(n_objects_min) X(n_objects_max) X(area_width) X(area_depth) X(object_height_max)        \
  X(agent_distance) X(agent_azimuth_jitter_deg) X(agent_separation_min_deg)                  \
  X(agent_separation_max_deg) X(heading_jitter_deg) X(fov_half_angle) X(max_range)           \
  X(occlusion_prob) X(block_window_deg) X(appearance_classes) X(feature_dim) X(sigma_feat)   \
  X(sigma_depth) X(sigma_gps) X(sigma_yaw_deg) X(view_objects_min) X(view_objects_max) X(view_attempts)

}  // namespace

void SimConfig::validate() const {
  if (n_objects_min < 0 || n_objects_max < 1 || n_objects_min > n_objects_max)
    throw ConfigError("degenerate config: empty object count range [" +
                      std::to_string(n_objects_min) + ", " + std::to_string(n_objects_max) + "]");
  if (feature_dim < 1) throw ConfigError("sim config: feature_dim must be >= 1");
  if (appearance_classes < 1 || appearance_classes > feature_dim)
    throw ConfigError("sim config: appearance_classes must be in [1, feature_dim]");
  if (occlusion_prob < 0.0 || occlusion_prob > 1.0)
    throw ConfigError("sim config: occlusion_prob must be in [0, 1]");
  if (sigma_feat < 0.0 || sigma_depth < 0.0 || sigma_gps < 0.0 || sigma_yaw_deg < 0.0)
    throw ConfigError("sim config: noise levels must be >= 0");
  if (!(area_width > 0.0) || !(area_depth > 0.0) || object_height_max < 0.0)
    throw ConfigError("sim config: scene extents must be positive");
  if (fov_half_angle < 0.0 || max_range <= 0.0 || block_window_deg < 0.0)
    throw ConfigError("sim config: invalid visibility parameters");
  if (view_objects_min > view_objects_max || view_attempts < 1)
    throw ConfigError("sim config: invalid view count constraint");
  if (agent_separation_min_deg > agent_separation_max_deg)
    throw ConfigError("sim config: agent separation range is empty");
}

nlohmann::json to_json(const SimConfig& cfg) {
  nlohmann::json j;
#define X(f) j[#f] = cfg.f;
  COID_SIM_FIELDS(X)
#undef X
  return j;
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig cfg;
  if (!j.is_object()) throw ConfigError("sim config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      bool known = false;
#define X(f)                                  \
  if (key == #f) {                            \
    cfg.f = value.get<decltype(cfg.f)>();     \
    known = true;                             \
  }
      COID_SIM_FIELDS(X)
#undef X
      if (!known) throw ConfigError("sim config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sim config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const WorldScene& scene) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : scene.objects)
    objects.push_back({{"id", o.id},
                       {"position", {o.position.x(), o.position.y(), o.position.z()}},
                       {"appearance_class", o.appearance_class}});
  nlohmann::json gt = nlohmann::json::array();
  for (const auto& [a, b] : scene.gt_correspondence) gt.push_back({a, b});
  return {{"seed", scene.seed},
          {"objects", objects},
          {"agent_poses", {pose_to_json(scene.agent_poses[0]), pose_to_json(scene.agent_poses[1])}},
          {"view_ids", {scene.view_ids[0], scene.view_ids[1]}},
          {"gt_correspondence", gt}};
}

WorldScene world_scene_from_json(const nlohmann::json& j) {
  WorldScene s;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& o : j.at("objects")) {
      const auto& p = o.at("position");
      s.objects.push_back({o.at("id").get<int>(),
                           {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()},
                           o.at("appearance_class").get<int>()});
    }
    for (int a = 0; a < 2; ++a) {
      s.agent_poses[a] = pose_from_json(j.at("agent_poses").at(a));
      s.view_ids[a] = j.at("view_ids").at(a).get<std::vector<int>>();
    }
    for (const auto& p : j.at("gt_correspondence"))
      s.gt_correspondence.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("world scene: ") + e.what());
  }
  return s;
}

namespace {

// One draw of layout, agents and visibility; all streams are keyed by `key`.
WorldScene sample_scene(const SimConfig& cfg, std::uint64_t seed, std::uint64_t key) {
  WorldScene scene;
  scene.seed = seed;

  RngStream layout(RngStream::derive(key, {kLayout}));
  const auto n = static_cast<int>(layout.uniform_int(cfg.n_objects_min, cfg.n_objects_max));
  for (int k = 0; k < n; ++k) {
    WorldObject o;
    o.id = k;
    o.position = {layout.uniform(-0.5, 0.5) * cfg.area_width,
                  layout.uniform(-0.5, 0.5) * cfg.area_depth,
                  layout.uniform(0.0, cfg.object_height_max)};
    o.appearance_class = static_cast<int>(layout.uniform_int(0, cfg.appearance_classes - 1));
    scene.objects.push_back(o);
  }

  RngStream agents(RngStream::derive(key, {kAgents}));
  const double base = -90.0 + agents.uniform(-1.0, 1.0) * cfg.agent_azimuth_jitter_deg;
  const double sep = agents.uniform(cfg.agent_separation_min_deg, cfg.agent_separation_max_deg);
  const double side = agents.uniform() < 0.5 ? -1.0 : 1.0;
  const std::array<double, 2> azimuth{base, base + side * sep};
  for (int a = 0; a < 2; ++a) {
    const double az = deg_to_rad(azimuth[a]);
    Pose& p = scene.agent_poses[a];
    p.t = {cfg.agent_distance * std::cos(az), cfg.agent_distance * std::sin(az), 0.0};
    p.yaw_deg = azimuth[a] + 180.0 + agents.uniform(-1.0, 1.0) * cfg.heading_jitter_deg;
  }

  // One drop coin per (agent, object), drawn whether or not the object is
  // in view, so visibility is monotone in the field of view.
  RngStream drop(RngStream::derive(key, {kDrop}));
  std::array<std::vector<bool>, 2> dropped;
  for (int a = 0; a < 2; ++a)
    for (int k = 0; k < n; ++k) dropped[a].push_back(drop.bernoulli(cfg.occlusion_prob));

  const double window = deg_to_rad(cfg.block_window_deg);
  for (int a = 0; a < 2; ++a) {
    const Pose& pose = scene.agent_poses[a];
    std::vector<double> bearing(n), range(n);
    for (int k = 0; k < n; ++k) {
      const Eigen::Vector3d v = pose.apply_inverse(scene.objects[k].position);
      bearing[k] = std::atan2(v.y(), v.x());
      range[k] = std::hypot(v.x(), v.y());
    }
    std::vector<int> ids;
    for (int k = 0; k < n; ++k) {
      if (std::abs(bearing[k]) > cfg.fov_half_angle || range[k] > cfg.max_range) continue;
      if (dropped[a][k]) continue;
      bool blocked = false;
      for (int q = 0; q < n && !blocked; ++q)
        blocked = q != k && range[q] < range[k] &&
                  std::abs(wrap_angle(bearing[q] - bearing[k])) < window;
      if (!blocked) ids.push_back(k);
    }
    RngStream order(RngStream::derive(key, {kOrder, static_cast<std::uint64_t>(a)}));
    for (std::size_t i = ids.size(); i > 1; --i)
      std::swap(ids[i - 1], ids[static_cast<std::size_t>(order.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    scene.view_ids[a] = std::move(ids);
  }

  for (std::size_t i = 0; i < scene.view_ids[0].size(); ++i)
    for (std::size_t j = 0; j < scene.view_ids[1].size(); ++j)
      if (scene.view_ids[0][i] == scene.view_ids[1][j])
        scene.gt_correspondence.emplace_back(static_cast<int>(i), static_cast<int>(j));
  return scene;
}

bool view_counts_ok(const SimConfig& cfg, const WorldScene& scene) {
  for (const auto& ids : scene.view_ids) {
    const auto n = static_cast<int>(ids.size());
    if (n < cfg.view_objects_min || n > cfg.view_objects_max) return false;
  }
  return true;
}

}  // namespace

WorldScene generate_scene(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  WorldScene scene = sample_scene(cfg, seed, seed);
  for (int attempt = 1; attempt < cfg.view_attempts && !view_counts_ok(cfg, scene); ++attempt)
    scene = sample_scene(cfg, seed, RngStream::derive(seed, {kResample, static_cast<std::uint64_t>(attempt)}));
  return scene;
}

Matrix class_prototypes(int classes, int feature_dim) {
  if (classes > feature_dim) throw ConfigError("class_prototypes: more classes than feature dims");
  return Matrix::Identity(classes, feature_dim);
}

SceneGraph render_view(const WorldScene& scene, int agent, const SimConfig& cfg) {
  if (agent != 0 && agent != 1) throw ConfigError("render_view: agent must be 0 or 1");
  cfg.validate();
  const auto a = static_cast<std::uint64_t>(agent);
  RngStream depth(RngStream::derive(scene.seed, {kDepth, a}));
  RngStream feat(RngStream::derive(scene.seed, {kFeature, a}));
  RngStream gps(RngStream::derive(scene.seed, {kGps, a}));

  const auto& ids = scene.view_ids[a];
  const auto n = static_cast<Index>(ids.size());
  const Pose& truth = scene.agent_poses[a];
  const Matrix protos = class_prototypes(cfg.appearance_classes, cfg.feature_dim);

  Matrix positions(n, 3);
  Matrix features(n, cfg.feature_dim);
  for (Index i = 0; i < n; ++i) {
    const auto& obj = scene.objects.at(static_cast<std::size_t>(ids[static_cast<std::size_t>(i)]));
    if (obj.appearance_class >= cfg.appearance_classes)
      throw DataError("render_view: appearance class outside the configured range");
    Eigen::Vector3d v = truth.apply_inverse(obj.position);
    const double r = v.norm();
    const double noise = depth.normal(0.0, cfg.sigma_depth);
    if (r > 0.0) v *= std::max(r + noise, 0.0) / r;
    positions.row(i) = v.transpose();
    for (Index c = 0; c < cfg.feature_dim; ++c)
      features(i, c) = protos(obj.appearance_class, c) + feat.normal(0.0, cfg.sigma_feat);
  }

  Pose reported = truth;
  reported.t.x() += gps.normal(0.0, cfg.sigma_gps);
  reported.t.y() += gps.normal(0.0, cfg.sigma_gps);
  reported.t.z() += gps.normal(0.0, cfg.sigma_gps);
  reported.yaw_deg += gps.normal(0.0, cfg.sigma_yaw_deg);

  SceneGraph g = build_graph(std::move(positions), std::move(features), reported);
  g.object_ids = ids;
  return g;
}

}  // namespace coid
