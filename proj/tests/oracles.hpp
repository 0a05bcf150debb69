#pragma once

// Independent reference computations used to check the library. None of these
// call into the code under test except for plain data types.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "convex_mpm/geometry.hpp"
#include "convex_mpm/particles.hpp"
#include "convex_mpm/types.hpp"

namespace oracle {

using convex_mpm::Matrix3;
using convex_mpm::Vector3;
using convex_mpm::Vector3i;

// ---------------------------------------------------------------------------
// Random generators.

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>()(rng_); }

  Vector3 vector(double lo = -1.0, double hi = 1.0) {
    return Vector3(uniform(lo, hi), uniform(lo, hi), uniform(lo, hi));
  }
  Vector3 unit() {
    Vector3 v;
    do {
      v = Vector3(normal(), normal(), normal());
    } while (v.norm() < 1e-6);
    return v.normalized();
  }
  Matrix3 matrix(double scale = 1.0) {
    Matrix3 m;
    for (int i = 0; i < 9; ++i) m.data()[i] = scale * uniform(-1.0, 1.0);
    return m;
  }
  Matrix3 rotation() {
    Eigen::Quaterniond q(normal(), normal(), normal(), normal());
    return q.normalized().toRotationMatrix();
  }
  /// I + perturbation, with positive determinant.
  Matrix3 deformation(double scale = 0.3) {
    for (;;) {
      const Matrix3 F = Matrix3::Identity() + matrix(scale);
      if (F.determinant() > 0.1) return F;
    }
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Finite differences.

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += step;
    xm(i) -= step;
    g(i) = (f(xp) - f(xm)) / (2.0 * step);
  }
  return g;
}

inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double step) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += step;
    xm(i) -= step;
    J.col(i) = (f(xp) - f(xm)) / (2.0 * step);
  }
  return J;
}

inline Matrix3 fd_matrix_gradient(const std::function<double(const Matrix3&)>& f, const Matrix3& F,
                                  double step) {
  Matrix3 G;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      Matrix3 Fp = F, Fm = F;
      Fp(r, c) += step;
      Fm(r, c) -= step;
      G(r, c) = (f(Fp) - f(Fm)) / (2.0 * step);
    }
  }
  return G;
}

// ---------------------------------------------------------------------------
// Friction cone.

/// Nearest point of the cone |g_t| <= mu g_n to y in the metric
/// Rt |g_t - y_t|^2 + Rn (g_n - y_n)^2. For a fixed g_n the best g_t is y_t
/// clamped to the disk of radius mu g_n; the remaining one-dimensional convex
/// problem in g_n is solved by bisection on its derivative.
inline Vector3 brute_force_cone_projection(const Vector3& y, double mu, double Rt, double Rn) {
  const Eigen::Vector2d yt = y.head<2>();
  const double t = yt.norm();
  auto best_for = [&](double gn) {
    const double radius = mu * gn;
    Eigen::Vector2d gt = yt;
    if (t > radius) gt = t > 0.0 ? Eigen::Vector2d(yt * (radius / t)) : Eigen::Vector2d::Zero();
    return Vector3(gt.x(), gt.y(), gn);
  };
  auto slope = [&](double gn) {
    double d = 2.0 * Rn * (gn - y.z());
    if (t > mu * gn) d -= 2.0 * Rt * mu * (t - mu * gn);
    return d;
  };
  if (slope(0.0) >= 0.0) return best_for(0.0);
  double lo = 0.0;
  double hi = 1.0;
  while (slope(hi) < 0.0) hi *= 2.0;
  for (int k = 0; k < 200 && hi - lo > 0.0; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (slope(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best_for(0.5 * (lo + hi));
}

inline double weighted_distance_sq(const Vector3& a, const Vector3& b, double Rt, double Rn) {
  const Vector3 d = a - b;
  return Rt * d.head<2>().squaredNorm() + Rn * d.z() * d.z();
}

/// A random point of the cone |g_t| <= mu g_n.
inline Vector3 random_cone_point(Gen& gen, double mu, double scale) {
  const double gn = gen.uniform(0.0, scale);
  const double r = mu * gn * std::sqrt(gen.uniform());
  const double phi = gen.uniform(0.0, 2.0 * M_PI);
  return Vector3(r * std::cos(phi), r * std::sin(phi), gn);
}

// ---------------------------------------------------------------------------
// Polar decomposition by Newton iteration R <- (R + R^-T) / 2.

inline std::pair<Matrix3, Matrix3> higham_polar(const Matrix3& F) {
  Matrix3 R = F;
  for (int k = 0; k < 100; ++k) {
    const Matrix3 next = 0.5 * (R + R.inverse().transpose());
    if ((next - R).norm() <= 1e-15 * R.norm()) {
      R = next;
      break;
    }
    R = next;
  }
  Matrix3 V = R.transpose() * F;
  return {R, 0.5 * (V + V.transpose())};
}

// ---------------------------------------------------------------------------
// Geometry.

/// Strict containment in the local frame of each primitive.
inline bool contains_local(const convex_mpm::ShapeVariant& g, const Vector3& p) {
  using namespace convex_mpm;
  if (const auto* s = std::get_if<HalfSpace>(&g)) {
    (void)s;
    return p.z() < 0.0;
  }
  if (const auto* s = std::get_if<Sphere>(&g)) {
    return p.x() * p.x() + p.y() * p.y() + p.z() * p.z() < s->radius * s->radius;
  }
  if (const auto* s = std::get_if<Box>(&g)) {
    return std::abs(p.x()) < s->half_extents.x() && std::abs(p.y()) < s->half_extents.y() &&
           std::abs(p.z()) < s->half_extents.z();
  }
  if (const auto* s = std::get_if<Cylinder>(&g)) {
    return p.x() * p.x() + p.y() * p.y() < s->radius * s->radius && std::abs(p.z()) < s->half_length;
  }
  const auto& c = std::get<Capsule>(g);
  const double z = std::min(std::max(p.z(), -c.half_length), c.half_length);
  const double dz = p.z() - z;
  return p.x() * p.x() + p.y() * p.y() + dz * dz < c.radius * c.radius;
}

inline bool contains(const convex_mpm::Shape& s, const Vector3& p,
                     const convex_mpm::RigidTransform& frame = {}) {
  const convex_mpm::RigidTransform X = frame * s.pose;
  return contains_local(s.geometry, X.rotation.transpose() * (p - X.translation));
}

/// Distance from p to the surface of an axis-aligned box, by sampling each
/// face on a grid of the given resolution.
inline double sampled_box_surface_distance(const Vector3& half, const Vector3& p, double resolution) {
  double best = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3;
    const int v = (axis + 2) % 3;
    const int nu = static_cast<int>(std::ceil(2.0 * half[u] / resolution));
    const int nv = static_cast<int>(std::ceil(2.0 * half[v] / resolution));
    for (int side : {-1, 1}) {
      for (int a = 0; a <= nu; ++a) {
        for (int b = 0; b <= nv; ++b) {
          Vector3 q;
          q[axis] = side * half[axis];
          q[u] = -half[u] + 2.0 * half[u] * a / nu;
          q[v] = -half[v] + 2.0 * half[v] * b / nv;
          best = std::min(best, (q - p).norm());
        }
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// MPM transfer.

/// Quadratic B-spline N(r) on |r| < 1.5.
inline double bspline(double r) {
  const double a = std::abs(r);
  if (a < 0.5) return 0.75 - a * a;
  if (a < 1.5) return 0.5 * (1.5 - a) * (1.5 - a);
  return 0.0;
}

inline double bspline_derivative(double r) {
  const double a = std::abs(r);
  const double s = r < 0.0 ? -1.0 : 1.0;
  if (a < 0.5) return -2.0 * r;
  if (a < 1.5) return -s * (1.5 - a);
  return 0.0;
}

inline double weight(const Vector3& x, const Vector3i& node, double h) {
  const Vector3 r = x / h - node.cast<double>();
  return bspline(r.x()) * bspline(r.y()) * bspline(r.z());
}

inline Vector3 weight_gradient(const Vector3& x, const Vector3i& node, double h) {
  const Vector3 r = x / h - node.cast<double>();
  return Vector3(bspline_derivative(r.x()) * bspline(r.y()) * bspline(r.z()),
                 bspline(r.x()) * bspline_derivative(r.y()) * bspline(r.z()),
                 bspline(r.x()) * bspline(r.y()) * bspline_derivative(r.z())) /
         h;
}

struct NodeLess {
  bool operator()(const Vector3i& a, const Vector3i& b) const {
    return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
  }
};

/// Node mass and momentum by looping over every node in the bounding box and
/// every particle.
inline std::map<Vector3i, std::pair<double, Vector3>, NodeLess> direct_p2g(
    const convex_mpm::ParticleSet& p, double h) {
  Vector3i lo = Vector3i::Constant(std::numeric_limits<int>::max());
  Vector3i hi = Vector3i::Constant(std::numeric_limits<int>::min());
  for (const Vector3& x : p.x) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], static_cast<int>(std::floor(x[a] / h)) - 2);
      hi[a] = std::max(hi[a], static_cast<int>(std::floor(x[a] / h)) + 3);
    }
  }
  std::map<Vector3i, std::pair<double, Vector3>, NodeLess> out;
  for (int i = lo.x(); i <= hi.x(); ++i) {
    for (int j = lo.y(); j <= hi.y(); ++j) {
      for (int k = lo.z(); k <= hi.z(); ++k) {
        const Vector3i node(i, j, k);
        const Vector3 xi = h * node.cast<double>();
        double m = 0.0;
        Vector3 mv = Vector3::Zero();
        for (std::size_t q = 0; q < p.size(); ++q) {
          const double w = weight(p.x[q], node, h);
          if (w == 0.0) continue;
          m += w * p.mass[q];
          mv += w * p.mass[q] * (p.v[q] + p.C[q] * (xi - p.x[q]));
        }
        if (m > 0.0) out[node] = {m, mv};
      }
    }
  }
  return out;
}

/// Random particle cloud in a cube of the given side around `center`.
inline convex_mpm::ParticleSet random_particles(Gen& gen, int n, const Vector3& center, double side,
                                                bool with_affine = true) {
  convex_mpm::ParticleSet p;
  for (int k = 0; k < n; ++k) {
    p.add(center + gen.vector(-0.5 * side, 0.5 * side), gen.vector(-2.0, 2.0), gen.uniform(0.1, 2.0),
          1e-3);
    if (with_affine) p.C.back() = gen.matrix(3.0);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Dense symmetric eigenvalues, for PSD checks.

inline double min_eigenvalue(const Eigen::MatrixXd& A) {
  const Eigen::MatrixXd S = 0.5 * (A + A.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().minCoeff();
}

inline double max_abs_eigenvalue(const Eigen::MatrixXd& A) {
  const Eigen::MatrixXd S = 0.5 * (A + A.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Connected components of a point cloud under a distance threshold.

inline int cluster_count(const std::vector<Vector3>& x, double radius) {
  const int n = static_cast<int>(x.size());
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  std::map<std::tuple<long, long, long>, std::vector<int>> cells;
  auto cell = [&](const Vector3& p) {
    return std::make_tuple(static_cast<long>(std::floor(p.x() / radius)),
                           static_cast<long>(std::floor(p.y() / radius)),
                           static_cast<long>(std::floor(p.z() / radius)));
  };
  for (int i = 0; i < n; ++i) cells[cell(x[i])].push_back(i);
  for (int i = 0; i < n; ++i) {
    const auto [cx, cy, cz] = cell(x[i]);
    for (long dx = -1; dx <= 1; ++dx) {
      for (long dy = -1; dy <= 1; ++dy) {
        for (long dz = -1; dz <= 1; ++dz) {
          const auto it = cells.find({cx + dx, cy + dy, cz + dz});
          if (it == cells.end()) continue;
          for (int j : it->second) {
            if ((x[i] - x[j]).norm() <= radius) parent[find(i)] = find(j);
          }
        }
      }
    }
  }
  int count = 0;
  for (int i = 0; i < n; ++i) count += find(i) == i;
  return count;
}

}  // namespace oracle
