#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "convex_mpm/geometry.hpp"
#include "convex_mpm/types.hpp"

namespace convex_mpm {

/// One piece of a piecewise-constant schedule, active from `start` until the
/// next segment's start. For free bodies `linear`/`angular` are an applied
/// force and torque (world frame, about the center of mass); for kinematic
/// bodies they are the prescribed linear and angular velocity.
struct ScheduleSegment {
  double start = 0.0;
  Vector3 linear = Vector3::Zero();
  Vector3 angular = Vector3::Zero();

  bool operator==(const ScheduleSegment&) const = default;
};

/// Value of a schedule at time t; zero before the first segment.
inline ScheduleSegment evaluate_schedule(const std::vector<ScheduleSegment>& schedule, double t) {
  ScheduleSegment active{t, Vector3::Zero(), Vector3::Zero()};
  for (const ScheduleSegment& s : schedule) {
    if (s.start <= t) active = s;
  }
  return active;
}

enum class Actuation { kFree, kKinematic };

/// Spatial velocity components, ordered angular (x, y, z) then linear (x, y, z).
using DofMask = std::array<bool, 6>;

/// A rigid body with a single collision shape. Velocities are world-aligned,
/// the linear part is that of the center of mass (the body origin).
struct RigidBody {
  std::string name;
  Shape shape;  // pose relative to the body frame
  Actuation actuation = Actuation::kFree;
  double mass = 1.0;
  Matrix3 inertia = Matrix3::Identity();  // about the center of mass, body frame
  DofMask locked{};                       // free bodies only: components held at zero velocity
  std::vector<ScheduleSegment> schedule;  // wrench (free) or velocity (kinematic)
  bool gravity = true;

  Vector3 position = Vector3::Zero();
  Quaternion orientation = Quaternion::Identity();
  Vector3 linear_velocity = Vector3::Zero();
  Vector3 angular_velocity = Vector3::Zero();

  bool operator==(const RigidBody& o) const {
    return name == o.name && shape == o.shape && actuation == o.actuation && mass == o.mass &&
           inertia == o.inertia && locked == o.locked && schedule == o.schedule &&
           gravity == o.gravity && position == o.position &&
           orientation.coeffs() == o.orientation.coeffs() && linear_velocity == o.linear_velocity &&
           angular_velocity == o.angular_velocity;
  }

  bool kinematic() const { return actuation == Actuation::kKinematic; }
  RigidTransform pose() const { return RigidTransform::from(orientation, position); }

  Vector6 spatial_velocity() const {
    Vector6 v;
    v << angular_velocity, linear_velocity;
    return v;
  }
  void set_spatial_velocity(const Vector6& v) {
    angular_velocity = v.head<3>();
    linear_velocity = v.tail<3>();
  }

  /// Indices (0..5) of the generalized velocities this body contributes.
  std::vector<int> free_dofs() const {
    std::vector<int> dofs;
    if (kinematic()) return dofs;
    for (int k = 0; k < 6; ++k) {
      if (!locked[k]) dofs.push_back(k);
    }
    return dofs;
  }

  /// Spatial inertia about the center of mass in world axes.
  Matrix6 spatial_inertia() const {
    const Matrix3 R = orientation.normalized().toRotationMatrix();
    Matrix6 M = Matrix6::Zero();
    M.topLeftCorner<3, 3>() = R * inertia * R.transpose();
    M.bottomRightCorner<3, 3>() = mass * Matrix3::Identity();
    return M;
  }

  /// Velocity of the body-fixed point currently at world position `p`.
  Vector3 point_velocity(const Vector3& p) const {
    return linear_velocity + angular_velocity.cross(p - position);
  }

  /// Throws ConfigError unless the body is consistent.
  void validate() const {
    shape.validate();
    if (kinematic()) return;
    if (!shape.bounded()) throw ConfigError("rigid body '" + name + "': half-spaces must be kinematic");
    if (!(mass > 0.0)) throw ConfigError("rigid body '" + name + "': mass must be > 0");
    Eigen::LLT<Matrix3> llt(0.5 * (inertia + inertia.transpose()));
    if (llt.info() != Eigen::Success || (inertia - inertia.transpose()).norm() > 1e-12 * inertia.norm()) {
      throw ConfigError("rigid body '" + name + "': inertia must be symmetric positive definite");
    }
  }
};

/// Free-motion velocities of the free rigid DoFs and the mass matrix block of
/// each body (empty for bodies without DoFs).
struct RigidFreeMotion {
  Eigen::VectorXd v_star;
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<int> offsets;  // first DoF of each body, -1 for bodies without DoFs
  int num_dofs = 0;
};

inline RigidFreeMotion rigid_free_motion(const std::vector<RigidBody>& bodies,
                                         const Vector3& gravity, double t, double dt) {
  RigidFreeMotion out;
  out.offsets.assign(bodies.size(), -1);
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    const std::vector<int> dofs = bodies[b].free_dofs();
    if (dofs.empty()) continue;
    out.offsets[b] = out.num_dofs;
    out.num_dofs += static_cast<int>(dofs.size());
  }
  out.v_star.resize(out.num_dofs);
  out.blocks.resize(bodies.size());
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    const RigidBody& body = bodies[b];
    const std::vector<int> dofs = body.free_dofs();
    if (dofs.empty()) continue;
    const Matrix6 M = body.spatial_inertia();
    const Vector3 w = body.angular_velocity;
    const ScheduleSegment wrench = evaluate_schedule(body.schedule, t + 0.5 * dt);
    Vector6 f;
    f.head<3>() = wrench.angular - w.cross(M.topLeftCorner<3, 3>() * w);
    f.tail<3>() = wrench.linear + (body.gravity ? Vector3(body.mass * gravity) : Vector3::Zero());

    const int n = static_cast<int>(dofs.size());
    Eigen::MatrixXd Mff(n, n);
    Eigen::VectorXd rhs(n);
    const Vector6 v = body.spatial_velocity();
    for (int a = 0; a < n; ++a) {
      for (int c = 0; c < n; ++c) Mff(a, c) = M(dofs[a], dofs[c]);
      rhs(a) = f(dofs[a]);
    }
    Eigen::VectorXd vf(n);
    for (int a = 0; a < n; ++a) vf(a) = v(dofs[a]);
    out.v_star.segment(out.offsets[b], n) = vf + dt * Mff.llt().solve(rhs);
    out.blocks[b] = Mff;
  }
  return out;
}

/// Velocity of a kinematic body at time t from its schedule.
inline Vector6 prescribed_velocity(const RigidBody& body, double t) {
  const ScheduleSegment s = evaluate_schedule(body.schedule, t);
  Vector6 v;
  v << s.angular, s.linear;
  return v;
}

/// q <- q + dt N(q) v, with the quaternion renormalized.
inline void integrate_pose(RigidBody* body, double dt) {
  body->position += dt * body->linear_velocity;
  const Vector3& w = body->angular_velocity;
  const Quaternion& q = body->orientation;
  const Quaternion wq = Quaternion(0.0, w.x(), w.y(), w.z()) * q;
  Quaternion next(q.w() + 0.5 * dt * wq.w(), q.x() + 0.5 * dt * wq.x(),
                  q.y() + 0.5 * dt * wq.y(), q.z() + 0.5 * dt * wq.z());
  body->orientation = next.normalized();
}

}  // namespace convex_mpm
