#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "coid/tensor.hpp"

namespace coid {

// Planar rigid pose of an agent: translation in meters, heading about +z.
// Agent frame: x forward, y left, z up. The heading is kept in degrees, the
// unit of the serialized form, so JSON round trips are exact.
struct Pose {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double yaw_deg = 0.0;

  double yaw() const;

  Eigen::Matrix3d rotation() const;
  /// Agent frame -> world frame.
  Eigen::Vector3d apply(const Eigen::Vector3d& v) const { return rotation() * v + t; }
  /// World frame -> agent frame.
  Eigen::Vector3d apply_inverse(const Eigen::Vector3d& p) const;

  bool operator==(const Pose&) const = default;
};

/// Row-wise pose application to an n x 3 matrix.
Matrix transform_rows(const Matrix& positions, const Pose& pose);
Matrix inverse_transform_rows(const Matrix& world, const Pose& pose);

double deg_to_rad(double deg);
double rad_to_deg(double rad);

/// {"t": [x, y, z], "yaw_deg": yaw}
nlohmann::json pose_to_json(const Pose& p);
Pose pose_from_json(const nlohmann::json& j);

}  // namespace coid
