#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <variant>

#include "convex_mpm/particles.hpp"
#include "convex_mpm/types.hpp"

namespace convex_mpm {

// Primitive shapes, each described in its own local frame.

/// The region z <= 0; outward normal +z.
struct HalfSpace {
  bool operator==(const HalfSpace&) const = default;
};

struct Sphere {
  double radius = 1.0;

  bool operator==(const Sphere&) const = default;
};

struct Box {
  Vector3 half_extents = Vector3::Ones();

  bool operator==(const Box&) const = default;
};

/// Solid cylinder with its axis along local z, spanning z in [-half_length, half_length].
struct Cylinder {
  double radius = 1.0;
  double half_length = 1.0;

  bool operator==(const Cylinder&) const = default;
};

/// Segment along local z of the given half length, swept by a sphere.
struct Capsule {
  double radius = 1.0;
  double half_length = 1.0;

  bool operator==(const Capsule&) const = default;
};

using ShapeVariant = std::variant<HalfSpace, Sphere, Box, Cylinder, Capsule>;

/// A primitive plus its pose relative to the owning frame (a body, or world).
struct Shape {
  ShapeVariant geometry = Sphere{};
  RigidTransform pose;

  bool operator==(const Shape&) const = default;

  std::string type_name() const {
    static constexpr std::array<const char*, 5> names = {"halfspace", "sphere", "box", "cylinder",
                                                         "capsule"};
    return names[geometry.index()];
  }

  bool bounded() const { return !std::holds_alternative<HalfSpace>(geometry); }

  /// Throws ConfigError if any length is non-positive or the rotation is not proper.
  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ConfigError(std::string("shape ") + what + " must be > 0");
      }
    };
    std::visit(
        [&](const auto& g) {
          using G = std::decay_t<decltype(g)>;
          if constexpr (std::is_same_v<G, Sphere>) {
            positive(g.radius, "radius");
          } else if constexpr (std::is_same_v<G, Box>) {
            for (int i = 0; i < 3; ++i) positive(g.half_extents[i], "half extent");
          } else if constexpr (std::is_same_v<G, Cylinder> || std::is_same_v<G, Capsule>) {
            positive(g.radius, "radius");
            positive(g.half_length, "half length");
          }
        },
        geometry);
    if (!is_rotation(pose.rotation)) throw ConfigError("shape rotation must be proper orthonormal");
  }
};

/// Nearest-surface query result in the frame the query was posed in.
struct DistanceResult {
  double signed_distance = 0.0;  // negative inside
  Vector3 witness_point = Vector3::Zero();
  Vector3 outward_normal = Vector3::UnitZ();
};

namespace internal {

inline DistanceResult local_distance(const HalfSpace&, const Vector3& p) {
  return {p.z(), Vector3(p.x(), p.y(), 0.0), Vector3::UnitZ()};
}

inline DistanceResult local_distance(const Sphere& s, const Vector3& p) {
  const double r = p.norm();
  const Vector3 n = r > 0.0 ? Vector3(p / r) : Vector3::UnitX();
  return {r - s.radius, s.radius * n, n};
}

inline DistanceResult local_distance(const Box& b, const Vector3& p) {
  const Vector3& e = b.half_extents;
  const Vector3 d = p.cwiseAbs() - e;
  if (d.maxCoeff() > 0.0) {
    const Vector3 clamped = p.cwiseMax(-e).cwiseMin(e);
    const Vector3 diff = p - clamped;
    const double dist = diff.norm();
    return {dist, clamped, diff / dist};
  }
  // Inside: nearest face; ties resolved x -> y -> z.
  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    if (d[i] > d[axis]) axis = i;
  }
  const double sign = p[axis] >= 0.0 ? 1.0 : -1.0;
  Vector3 witness = p;
  witness[axis] = sign * e[axis];
  Vector3 normal = Vector3::Zero();
  normal[axis] = sign;
  return {d[axis], witness, normal};
}

inline DistanceResult local_distance(const Cylinder& c, const Vector3& p) {
  const double rho = std::hypot(p.x(), p.y());
  const Vector3 radial = rho > 0.0 ? Vector3(p.x() / rho, p.y() / rho, 0.0) : Vector3::UnitX();
  const double dr = rho - c.radius;
  const double dz = std::abs(p.z()) - c.half_length;
  const double sz = p.z() >= 0.0 ? 1.0 : -1.0;
  const Vector3 side_point(c.radius * radial.x(), c.radius * radial.y(), p.z());
  const Vector3 cap_point(p.x(), p.y(), sz * c.half_length);
  if (dr > 0.0 && dz > 0.0) {
    const Vector3 rim(c.radius * radial.x(), c.radius * radial.y(), sz * c.half_length);
    const Vector3 diff = p - rim;
    const double dist = diff.norm();
    return {dist, rim, diff / dist};
  }
  if (dr > 0.0) return {dr, side_point, radial};
  if (dz > 0.0) return {dz, cap_point, Vector3(0.0, 0.0, sz)};
  // Inside; the radial (x/y) direction wins ties.
  if (dr >= dz) return {dr, side_point, radial};
  return {dz, cap_point, Vector3(0.0, 0.0, sz)};
}

inline DistanceResult local_distance(const Capsule& c, const Vector3& p) {
  const Vector3 center(0.0, 0.0, std::clamp(p.z(), -c.half_length, c.half_length));
  const Vector3 diff = p - center;
  const double r = diff.norm();
  const Vector3 n = r > 0.0 ? Vector3(diff / r) : Vector3::UnitX();
  return {r - c.radius, center + c.radius * n, n};
}

/// Axis-aligned bounds of the shape in its local frame (unbounded shapes excluded).
inline std::pair<Vector3, Vector3> local_bounds(const ShapeVariant& g) {
  return std::visit(
      [](const auto& s) -> std::pair<Vector3, Vector3> {
        using G = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<G, Sphere>) {
          return {Vector3::Constant(-s.radius), Vector3::Constant(s.radius)};
        } else if constexpr (std::is_same_v<G, Box>) {
          return {-s.half_extents, s.half_extents};
        } else if constexpr (std::is_same_v<G, Cylinder>) {
          const Vector3 e(s.radius, s.radius, s.half_length);
          return {-e, e};
        } else if constexpr (std::is_same_v<G, Capsule>) {
          const Vector3 e(s.radius, s.radius, s.half_length + s.radius);
          return {-e, e};
        } else {
          const double inf = std::numeric_limits<double>::infinity();
          return {Vector3::Constant(-inf), Vector3::Constant(inf)};
        }
      },
      g);
}

}  // namespace internal

/// Signed distance from a point to `shape`, with shape pose given by
/// `frame * shape.pose` (the frame is the owning body's pose, identity for
/// world-fixed shapes).
///
/// The witness point is the nearest surface point and the normal is the
/// outward surface normal there. Points on a medial axis get a deterministic
/// nearest point (axis priority x, then y, then z).
inline DistanceResult signed_distance(const Shape& shape, const Vector3& point,
                                      const RigidTransform& frame = {}) {
  const RigidTransform X = frame * shape.pose;
  const Vector3 local = X.rotation.transpose() * (point - X.translation);
  DistanceResult r = std::visit([&](const auto& g) { return internal::local_distance(g, local); },
                                shape.geometry);
  r.witness_point = X * r.witness_point;
  r.outward_normal = X.rotation * r.outward_normal;
  return r;
}

/// Solid volume of a bounded shape.
inline double shape_volume(const Shape& shape) {
  return std::visit(
      [](const auto& s) -> double {
        using G = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<G, Sphere>) {
          return 4.0 / 3.0 * M_PI * s.radius * s.radius * s.radius;
        } else if constexpr (std::is_same_v<G, Box>) {
          return 8.0 * s.half_extents.prod();
        } else if constexpr (std::is_same_v<G, Cylinder>) {
          return M_PI * s.radius * s.radius * 2.0 * s.half_length;
        } else if constexpr (std::is_same_v<G, Capsule>) {
          return M_PI * s.radius * s.radius * (2.0 * s.half_length + 4.0 / 3.0 * s.radius);
        } else {
          return std::numeric_limits<double>::infinity();
        }
      },
      shape.geometry);
}

/// Rotational inertia about the centroid, in the shape frame, for a uniform solid.
inline Matrix3 shape_unit_inertia(const Shape& shape, double mass) {
  return std::visit(
      [mass](const auto& s) -> Matrix3 {
        using G = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<G, Sphere>) {
          return Matrix3::Identity() * (0.4 * mass * s.radius * s.radius);
        } else if constexpr (std::is_same_v<G, Box>) {
          const Vector3 e2 = s.half_extents.cwiseProduct(s.half_extents);
          return Vector3(e2.y() + e2.z(), e2.x() + e2.z(), e2.x() + e2.y()).asDiagonal() *
                 (mass / 3.0);
        } else if constexpr (std::is_same_v<G, Cylinder> || std::is_same_v<G, Capsule>) {
          // Capsules use the cylinder of equal total length; adequate for contact dynamics.
          const double r2 = s.radius * s.radius;
          double l = 2.0 * s.half_length;
          if constexpr (std::is_same_v<G, Capsule>) l += 2.0 * s.radius;
          const double lateral = mass * (3.0 * r2 + l * l) / 12.0;
          return Vector3(lateral, lateral, 0.5 * mass * r2).asDiagonal();
        } else {
          return Matrix3::Zero();
        }
      },
      shape.geometry);
}

/// Optional random perturbation of the seeding lattice.
struct SeedJitter {
  std::uint64_t seed = 0;
  double amplitude = 0.0;  // fraction of the particle spacing, in [0, 0.5)
};

/// Seeds particles on a lattice of k^3 points per grid cell, aligned with the
/// background grid: positions (i + 1/2) * h / k. Only points strictly inside
/// the shape are kept. Each particle carries volume (h/k)^3 and mass
/// density * volume; the deformation state starts undeformed.
inline ParticleSet sample_particles(const Shape& shape, double grid_spacing, double density,
                                    int particles_per_cell_axis = 2,
                                    const Vector3& velocity = Vector3::Zero(), int body_index = 0,
                                    std::optional<SeedJitter> jitter = std::nullopt) {
  if (!(grid_spacing > 0.0)) throw ConfigError("grid spacing must be > 0");
  if (!(density > 0.0)) throw ConfigError("density must be > 0");
  if (particles_per_cell_axis < 1) throw ConfigError("particles per cell axis must be >= 1");
  if (!shape.bounded()) throw ConfigError("cannot seed particles in an unbounded shape");
  shape.validate();

  const double spacing = grid_spacing / particles_per_cell_axis;
  const double volume = spacing * spacing * spacing;

  const auto [lo_local, hi_local] = internal::local_bounds(shape.geometry);
  Vector3 lo = Vector3::Constant(std::numeric_limits<double>::infinity());
  Vector3 hi = -lo;
  for (int corner = 0; corner < 8; ++corner) {
    const Vector3 c((corner & 1) ? hi_local.x() : lo_local.x(),
                    (corner & 2) ? hi_local.y() : lo_local.y(),
                    (corner & 4) ? hi_local.z() : lo_local.z());
    const Vector3 w = shape.pose * c;
    lo = lo.cwiseMin(w);
    hi = hi.cwiseMax(w);
  }
  Vector3i first, last;
  for (int a = 0; a < 3; ++a) {
    first[a] = static_cast<int>(std::floor(lo[a] / spacing - 0.5)) - 1;
    last[a] = static_cast<int>(std::ceil(hi[a] / spacing - 0.5)) + 1;
  }

  std::optional<std::mt19937_64> rng;
  std::uniform_real_distribution<double> offset(-1.0, 1.0);
  if (jitter && jitter->amplitude > 0.0) rng.emplace(jitter->seed);

  ParticleSet particles;
  for (int i = first.x(); i <= last.x(); ++i) {
    for (int j = first.y(); j <= last.y(); ++j) {
      for (int k = first.z(); k <= last.z(); ++k) {
        Vector3 p = (Vector3(i, j, k) + Vector3::Constant(0.5)) * spacing;
        if (rng) {
          const Vector3 delta(offset(*rng), offset(*rng), offset(*rng));
          p += jitter->amplitude * spacing * delta;
        }
        if (signed_distance(shape, p).signed_distance < 0.0) {
          particles.add(p, velocity, density * volume, volume, body_index);
        }
      }
    }
  }
  if (particles.empty()) throw ConfigError("empty particle set");
  return particles;
}

}  // namespace convex_mpm
