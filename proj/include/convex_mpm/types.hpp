#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace convex_mpm {

using Vector3 = Eigen::Vector3d;
using Vector3i = Eigen::Vector3i;
using Matrix3 = Eigen::Matrix3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Quaternion = Eigen::Quaterniond;

/// Invalid scene or material parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed to produce a valid result.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pose of a frame relative to its parent: x_parent = rotation * x_child + translation.
struct RigidTransform {
  Matrix3 rotation = Matrix3::Identity();
  Vector3 translation = Vector3::Zero();

  Vector3 operator*(const Vector3& p) const { return rotation * p + translation; }
  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }
  RigidTransform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
  bool operator==(const RigidTransform&) const = default;

  static RigidTransform from(const Quaternion& q, const Vector3& p) {
    return {q.normalized().toRotationMatrix(), p};
  }
};

inline Matrix3 skew(const Vector3& w) {
  Matrix3 s;
  s << 0.0, -w.z(), w.y(),  //
      w.z(), 0.0, -w.x(),   //
      -w.y(), w.x(), 0.0;
  return s;
}

inline bool is_rotation(const Matrix3& r, double tol = 1e-12) {
  return (r.transpose() * r - Matrix3::Identity()).norm() <= tol && r.determinant() > 0.0;
}

}  // namespace convex_mpm
