#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/LU>

#include "convex_mpm/linalg.hpp"
#include "convex_mpm/types.hpp"

namespace convex_mpm {

struct LameParameters {
  double mu = 0.0;
  double lambda = 0.0;

  /// mu = E / (2(1 + nu)), lambda = E nu / ((1 + nu)(1 - 2 nu)).
  static LameParameters from_young_poisson(double youngs_modulus, double poisson_ratio) {
    if (!(youngs_modulus > 0.0)) throw ConfigError("Young's modulus must be > 0");
    if (!(poisson_ratio > 0.0)) throw ConfigError("Poisson ratio must be > 0");
    if (!(poisson_ratio < 0.5)) throw ConfigError("Poisson ratio must be < 0.5");
    const double E = youngs_modulus;
    const double nu = poisson_ratio;
    return {E / (2.0 * (1.0 + nu)), E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))};
  }
};

struct PlasticParameters {
  double yield_stress = std::numeric_limits<double>::infinity();
  bool enabled = false;

  static PlasticParameters none() { return {}; }
  static PlasticParameters von_mises(double yield_stress) {
    if (!(yield_stress > 0.0)) throw ConfigError("yield stress must be > 0");
    return {yield_stress, true};
  }
};

/// Elastic deformation gradient together with the lagged rotation it is
/// measured against.
struct ElasticState {
  Matrix3 Fe = Matrix3::Identity();
  Matrix3 R0 = Matrix3::Identity();

  /// Linearized corotational strain E = sym(R0^T Fe) - I.
  Matrix3 strain() const {
    const Matrix3 A = R0.transpose() * Fe;
    return 0.5 * (A + A.transpose()) - Matrix3::Identity();
  }
  /// S = E + I.
  Matrix3 stretch() const { return strain() + Matrix3::Identity(); }
};

/// Psi = mu |E|_F^2 + lambda/2 tr(E)^2.
inline double energy_density(const ElasticState& state, const LameParameters& lame) {
  const Matrix3 E = state.strain();
  const double tr = E.trace();
  return lame.mu * E.squaredNorm() + 0.5 * lame.lambda * tr * tr;
}

/// P = dPsi/dFe = R0 (2 mu E + lambda tr(E) I).
inline Matrix3 first_piola(const ElasticState& state, const LameParameters& lame) {
  const Matrix3 E = state.strain();
  return state.R0 * (2.0 * lame.mu * E + lame.lambda * E.trace() * Matrix3::Identity());
}

/// dP for a perturbation dF of Fe (R0 held fixed). Independent of Fe.
inline Matrix3 stress_differential(const ElasticState& state, const LameParameters& lame,
                                   const Matrix3& dF) {
  const Matrix3 A = state.R0.transpose() * dF;
  const Matrix3 dE = 0.5 * (A + A.transpose());
  return state.R0 * (2.0 * lame.mu * dE + lame.lambda * dE.trace() * Matrix3::Identity());
}

using Matrix9 = Eigen::Matrix<double, 9, 9>;

/// The 9x9 matrix of the map dF -> dP acting on column-major vec(dF).
inline Matrix9 stress_derivative(const ElasticState& state, const LameParameters& lame) {
  Matrix9 K;
  for (int c = 0; c < 9; ++c) {
    Matrix3 dF = Matrix3::Zero();
    dF(c % 3, c / 3) = 1.0;
    const Matrix3 dP = stress_differential(state, lame, dF);
    K.col(c) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(dP.data());
  }
  return K;
}

/// Hessian block d^2 Psi / (du dw) for Fe perturbations dF = u ci^T and dF = w cj^T.
inline Matrix3 hessian_block(const ElasticState& state, const LameParameters& lame,
                             const Vector3& ci, const Vector3& cj) {
  const Vector3 di = state.R0 * ci;
  const Vector3 dj = state.R0 * cj;
  return lame.mu * ci.dot(cj) * Matrix3::Identity() + lame.mu * dj * di.transpose() +
         lame.lambda * di * dj.transpose();
}

inline Matrix3 deviatoric(const Matrix3& A) {
  return A - A.trace() / 3.0 * Matrix3::Identity();
}

struct YieldResult {
  bool plastic = false;
  double excess = 0.0;  // |dev(S)|_F - eta / (2 mu); <= 0 when elastic
};

/// Von Mises-type criterion |dev(S)|_F <= eta / (2 mu).
inline YieldResult yield_test(const ElasticState& state, const LameParameters& lame,
                              const PlasticParameters& plastic) {
  if (!plastic.enabled) return {false, -std::numeric_limits<double>::infinity()};
  const double radius = plastic.yield_stress / (2.0 * lame.mu);
  const double excess = deviatoric(state.stretch()).norm() - radius;
  return {excess > 0.0, excess};
}

/// Orthogonal projection of principal values onto the cylinder of the given
/// radius around the hydrostatic axis. Values inside are returned unchanged.
inline Vector3 project_to_cylinder(const Vector3& sigma, double radius) {
  const double mean = sigma.mean();
  const Vector3 dev = sigma - Vector3::Constant(mean);
  const double norm = dev.norm();
  if (norm <= radius) return sigma;
  return Vector3::Constant(mean) + (radius / norm) * dev;
}

enum class ReturnMapStatus { kElastic, kProjected, kSkippedIllConditioned };

struct ReturnMapResult {
  Matrix3 Fp = Matrix3::Identity();  // updated plastic deformation gradient
  Matrix3 Fe = Matrix3::Identity();  // elastic part consistent with Fp
  ReturnMapStatus status = ReturnMapStatus::kElastic;
};

/// Symmetric 3x3 matrices as 6-vectors (V11, V22, V33, sqrt2 V12, sqrt2 V13, sqrt2 V23).
inline Eigen::Matrix<double, 6, 1> vectorize_symmetric(const Matrix3& V) {
  const double r2 = std::sqrt(2.0);
  Eigen::Matrix<double, 6, 1> x;
  x << V(0, 0), V(1, 1), V(2, 2), r2 * V(0, 1), r2 * V(0, 2), r2 * V(1, 2);
  return x;
}

inline Matrix3 unvectorize_symmetric(const Eigen::Matrix<double, 6, 1>& x) {
  const double s = 1.0 / std::sqrt(2.0);
  Matrix3 V;
  V << x(0), s * x(3), s * x(4),  //
      s * x(3), x(1), s * x(5),   //
      s * x(4), s * x(5), x(2);
  return V;
}

/// Condition numbers above this make the stretch-recovery system unusable.
inline constexpr double kReturnMapMaxCondition = 1e12;

/// Plastic update at the end of a step.
///
/// The trial elastic state Fe = F Fp^-1 is tested against the yield cylinder.
/// Outside it, the eigenvalues of S = sym(R0^T Fe) are projected onto the
/// cylinder surface, and the projected stretch V~ is recovered from
/// S~ = (Q V~ + V~ Q^T)/2 with Q = R0^T R, R the polar rotation of Fe. The new
/// elastic part is R V~ and Fp = (R V~)^-1 F.
///
/// When that 6x6 system is ill-conditioned (or the result singular) the step
/// is skipped and Fp is returned unchanged.
inline ReturnMapResult return_map(const Matrix3& F, const Matrix3& Fp, const Matrix3& R0,
                                  const LameParameters& lame, const PlasticParameters& plastic) {
  ReturnMapResult result;
  result.Fp = Fp;
  result.Fe = F * Fp.inverse();
  const ElasticState trial{result.Fe, R0};
  if (!yield_test(trial, lame, plastic).plastic) return result;

  const double radius = plastic.yield_stress / (2.0 * lame.mu);
  const SymmetricEigen eig = symmetric_eigen(trial.stretch());
  const Vector3 sigma = project_to_cylinder(eig.values, radius);
  const Matrix3 S_proj = eig.vectors * sigma.asDiagonal() * eig.vectors.transpose();

  result.status = ReturnMapStatus::kSkippedIllConditioned;
  Matrix3 R;
  try {
    R = polar_decompose(result.Fe).first;
  } catch (const SolverError&) {
    return result;
  }
  const Matrix3 Q = R0.transpose() * R;
  Eigen::Matrix<double, 6, 6> L;
  for (int k = 0; k < 6; ++k) {
    Eigen::Matrix<double, 6, 1> e = Eigen::Matrix<double, 6, 1>::Zero();
    e(k) = 1.0;
    const Matrix3 B = unvectorize_symmetric(e);
    L.col(k) = vectorize_symmetric(0.5 * (Q * B + B * Q.transpose()));
  }
  const Eigen::PartialPivLU<Eigen::Matrix<double, 6, 6>> lu(L);
  const double rcond = lu.rcond();
  if (!(rcond > 1.0 / kReturnMapMaxCondition)) return result;
  const Matrix3 V = unvectorize_symmetric(lu.solve(vectorize_symmetric(S_proj)));
  const Matrix3 Fe_proj = R * V;
  const double det = Fe_proj.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-300) return result;

  result.Fe = Fe_proj;
  result.Fp = Fe_proj.inverse() * F;
  result.status = ReturnMapStatus::kProjected;
  return result;
}

/// The corotational elastoplastic material used by the MPM free-motion solve.
/// Its energy is quadratic in Fe for fixed R0.
struct CorotationalModel {
  static constexpr bool kQuadratic = true;

  LameParameters lame;
  PlasticParameters plastic;

  double energy(const Matrix3& Fe, const Matrix3& R0) const {
    return energy_density({Fe, R0}, lame);
  }
  Matrix3 stress(const Matrix3& Fe, const Matrix3& R0) const { return first_piola({Fe, R0}, lame); }
  Matrix3 hessian(const Matrix3& Fe, const Matrix3& R0, const Vector3& ci,
                  const Vector3& cj) const {
    return hessian_block({Fe, R0}, lame, ci, cj);
  }
};

}  // namespace convex_mpm
