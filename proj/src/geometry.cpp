#include "coid/geometry.hpp"

#include <cmath>
#include <numbers>

#include "coid/error.hpp"

namespace coid {

double Pose::yaw() const { return deg_to_rad(yaw_deg); }

Eigen::Matrix3d Pose::rotation() const {
  const double c = std::cos(yaw());
  const double s = std::sin(yaw());
  Eigen::Matrix3d r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

Eigen::Vector3d Pose::apply_inverse(const Eigen::Vector3d& p) const {
  return rotation().transpose() * (p - t);
}

Matrix transform_rows(const Matrix& positions, const Pose& pose) {
  if (positions.rows() > 0 && positions.cols() != 3)
    throw ShapeError("transform_rows: expected n x 3, got " + shape_string(positions));
  Matrix out(positions.rows(), 3);
  const Eigen::Matrix3d r = pose.rotation();
  for (Index i = 0; i < positions.rows(); ++i)
    out.row(i) = (r * positions.row(i).transpose() + pose.t).transpose();
  return out;
}

Matrix inverse_transform_rows(const Matrix& world, const Pose& pose) {
  if (world.rows() > 0 && world.cols() != 3)
    throw ShapeError("inverse_transform_rows: expected n x 3, got " + shape_string(world));
  Matrix out(world.rows(), 3);
  const Eigen::Matrix3d rt = pose.rotation().transpose();
  for (Index i = 0; i < world.rows(); ++i)
    out.row(i) = (rt * (world.row(i).transpose() - pose.t)).transpose();
  return out;
}

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

nlohmann::json pose_to_json(const Pose& p) {
  return {{"t", {p.t.x(), p.t.y(), p.t.z()}}, {"yaw_deg", p.yaw_deg}};
}

Pose pose_from_json(const nlohmann::json& j) {
  Pose p;
  try {
    const auto& t = j.at("t");
    if (!t.is_array() || t.size() != 3) throw DataError("pose: 't' must be a 3-vector");
    p.t = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
    p.yaw_deg = j.at("yaw_deg").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("pose: ") + e.what());
  }
  return p;
}

}  // namespace coid
