#pragma once

#include <cmath>
#include <utility>

#include <Eigen/SVD>

#include "convex_mpm/types.hpp"

namespace convex_mpm {

/// Eigen-decomposition of a symmetric 3x3 matrix: A = vectors * diag(values) * vectors^T.
struct SymmetricEigen {
  Vector3 values;
  Matrix3 vectors;
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// `tolerance` times the norm of A (or below `tolerance` for tiny A).
inline SymmetricEigen symmetric_eigen(const Matrix3& A, double tolerance = 1e-12) {
  Matrix3 a = 0.5 * (A + A.transpose());
  Matrix3 v = Matrix3::Identity();
  const double scale = std::max(a.norm(), 1.0);
  for (int sweep = 0; sweep < 50; ++sweep) {
    const double off = std::sqrt(2.0 * (a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2)));
    if (off <= tolerance * scale) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Matrix3 J = Matrix3::Identity();
        J(p, p) = c;
        J(q, q) = c;
        J(p, q) = s;
        J(q, p) = -s;
        a = J.transpose() * a * J;
        a(p, q) = a(q, p) = 0.0;
        v = v * J;
      }
    }
  }
  return {a.diagonal(), v};
}

/// Polar decomposition F = R * V with R a proper rotation and V symmetric.
///
/// Computed from the SVD with sign correction, so for det(F) < 0 the
/// reflection is moved into V (one negative eigenvalue). Throws SolverError
/// for a singular F.
inline std::pair<Matrix3, Matrix3> polar_decompose(const Matrix3& F) {
  const double det = F.determinant();
  if (det == 0.0 || !std::isfinite(det)) throw SolverError("degenerate deformation");
  Eigen::JacobiSVD<Matrix3> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 U = svd.matrixU();
  Matrix3 W = svd.matrixV();
  Vector3 sigma = svd.singularValues();
  if (U.determinant() < 0.0) {
    U.col(2) *= -1.0;
    sigma(2) *= -1.0;
  }
  if (W.determinant() < 0.0) {
    W.col(2) *= -1.0;
    sigma(2) *= -1.0;
  }
  const Matrix3 R = U * W.transpose();
  Matrix3 V = W * sigma.asDiagonal() * W.transpose();
  V = 0.5 * (V + V.transpose());
  return {R, V};
}

}  // namespace convex_mpm
