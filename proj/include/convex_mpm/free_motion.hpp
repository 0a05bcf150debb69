#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/SparseCholesky>

#include "convex_mpm/block_sparse.hpp"
#include "convex_mpm/corotational.hpp"
#include "convex_mpm/grid.hpp"
#include "convex_mpm/particles.hpp"
#include "convex_mpm/types.hpp"

namespace convex_mpm {

using SparseCholesky = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

/// Stacks per-node 3-vectors into one DoF vector.
inline Eigen::VectorXd stack(std::span<const Vector3> values) {
  Eigen::VectorXd out(3 * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out.segment<3>(3 * i) = values[i];
  return out;
}

inline std::vector<Vector3> unstack(const Eigen::VectorXd& v) {
  std::vector<Vector3> out(v.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v.segment<3>(3 * i);
  return out;
}

struct FreeMotionOptions {
  double relative_tolerance = 1e-6;
  int max_iterations = 50;
  double armijo_slope = 1e-4;
  double backtrack_factor = 0.5;
};

struct FreeMotionResult {
  Eigen::VectorXd v_star;
  BlockSparseMatrix hessian;  // A_MPM evaluated at v_star
  int newton_iterations = 0;
  bool converged = false;
  /// Set when the Hessian was indefinite and descent fell back to the gradient;
  /// the result is then only a local minimizer.
  bool local_minimum = false;
};

/// The MPM part of the first stage: the energy
///
///   E(v) = 1/2 |v - v^n|_M^2 - dt v^T M g + sum_p V0_p Psi(Fe_p(v)),
///   Fe_p(v) = (I + dt sum_i v_i grad(w_ip)^T) F_p^n (Fp_p^n)^-1,
///
/// over the grid velocities, with stencils frozen at t_n. `Model` supplies
/// energy(Fe, R0), stress(Fe, R0) = dPsi/dFe and hessian(Fe, R0, ci, cj), the
/// second derivative for perturbations u ci^T and w cj^T of Fe.
template <typename Model>
class MpmEnergyProblem {
 public:
  /// `models[b]` is the material of particles with body index b.
  MpmEnergyProblem(const SparseGrid& grid, const ParticleSet& particles,
                   std::span<const KernelStencil> stencils, std::span<const Model> models,
                   const Vector3& gravity, double dt)
      : grid_(&grid),
        particles_(&particles),
        stencils_(stencils),
        models_(models),
        gravity_(gravity),
        dt_(dt),
        v_n_(stack(grid.velocity())) {
    const std::size_t n = particles.size();
    fe_n_.resize(n);
    c_.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
      fe_n_[p] = particles.F[p] * particles.Fp[p].inverse();
      for (int a = 0; a < kStencilSize; ++a) {
        c_[p][a] = fe_n_[p].transpose() * stencils[p].grad[a];
      }
    }
  }

  int num_dofs() const { return 3 * grid_->num_nodes(); }
  double dt() const { return dt_; }
  const Eigen::VectorXd& initial_velocity() const { return v_n_; }

  /// Elastic deformation gradient of particle p for grid velocities v.
  Matrix3 elastic_deformation(std::size_t p, const Eigen::VectorXd& v) const {
    Matrix3 L = Matrix3::Zero();
    const KernelStencil& s = stencils_[p];
    for (int a = 0; a < kStencilSize; ++a) {
      if (s.node[a] < 0) continue;
      L += v.segment<3>(3 * s.node[a]) * c_[p][a].transpose();
    }
    return fe_n_[p] + dt_ * L;
  }

  double energy(const Eigen::VectorXd& v) const {
    double e = 0.0;
    for (int i = 0; i < grid_->num_nodes(); ++i) {
      const double m = grid_->mass()[i];
      const Vector3 dv = v.segment<3>(3 * i) - v_n_.segment<3>(3 * i);
      e += 0.5 * m * dv.squaredNorm() - dt_ * m * v.segment<3>(3 * i).dot(gravity_);
    }
    for (std::size_t p = 0; p < particles_->size(); ++p) {
      e += particles_->volume[p] * model(p).energy(elastic_deformation(p, v), particles_->R0[p]);
    }
    return e;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& v) const {
    Eigen::VectorXd g(num_dofs());
    for (int i = 0; i < grid_->num_nodes(); ++i) {
      const double m = grid_->mass()[i];
      g.segment<3>(3 * i) = m * (v.segment<3>(3 * i) - v_n_.segment<3>(3 * i) - dt_ * gravity_);
    }
    for (std::size_t p = 0; p < particles_->size(); ++p) {
      const Matrix3 P =
          model(p).stress(elastic_deformation(p, v), particles_->R0[p]) * (dt_ * particles_->volume[p]);
      const KernelStencil& s = stencils_[p];
      for (int a = 0; a < kStencilSize; ++a) {
        if (s.node[a] < 0) continue;
        g.segment<3>(3 * s.node[a]) += P * c_[p][a];
      }
    }
    return g;
  }

  BlockSparseMatrix hessian(const Eigen::VectorXd& v) const {
    BlockSparseMatrix H(*grid_);
    for (int i = 0; i < grid_->num_nodes(); ++i) {
      H.add_diagonal(i, grid_->mass()[i] * Matrix3::Identity());
    }
    for (std::size_t p = 0; p < particles_->size(); ++p) {
      const Matrix3 Fe = elastic_deformation(p, v);
      const Matrix3& R0 = particles_->R0[p];
      const double scale = dt_ * dt_ * particles_->volume[p];
      const KernelStencil& s = stencils_[p];
      const Model& m = model(p);
      for (int a = 0; a < kStencilSize; ++a) {
        if (s.node[a] < 0) continue;
        for (int b = 0; b < kStencilSize; ++b) {
          if (s.node[b] < 0) continue;
          const Vector3i offset = KernelStencil::offset(b) - KernelStencil::offset(a);
          H.add(s.node[a], offset, scale * m.hessian(Fe, R0, c_[p][a], c_[p][b]));
        }
      }
    }
    return H;
  }

  /// |M g| dt, the momentum scale gravity adds in one step.
  double gravity_impulse_norm() const {
    double s = 0.0;
    for (double m : grid_->mass()) s += m * m * gravity_.squaredNorm();
    return dt_ * std::sqrt(s);
  }

 private:
  const Model& model(std::size_t p) const { return models_[particles_->body[p]]; }

  const SparseGrid* grid_;
  const ParticleSet* particles_;
  std::span<const KernelStencil> stencils_;
  std::span<const Model> models_;
  Vector3 gravity_;
  double dt_;
  Eigen::VectorXd v_n_;
  std::vector<Matrix3> fe_n_;
  std::vector<std::array<Vector3, kStencilSize>> c_;
};

/// Minimizes the MPM energy by Newton's method with backtracking line search.
///
/// Converged when |grad E| <= tol * max(|grad E(v^n)|, dt |M g|). For a
/// quadratic model exactly one full Newton step is taken. Throws SolverError
/// "non-SPD system" if the Hessian of a quadratic model fails Cholesky.
template <typename Model>
FreeMotionResult solve_free_motion_mpm(const MpmEnergyProblem<Model>& problem,
                                       const FreeMotionOptions& options = {}) {
  FreeMotionResult result;
  Eigen::VectorXd v = problem.initial_velocity();
  Eigen::VectorXd g = problem.gradient(v);
  const double tolerance =
      options.relative_tolerance * std::max(g.norm(), problem.gravity_impulse_norm());

  BlockSparseMatrix H = problem.hessian(v);
  SparseCholesky llt;
  bool factored = false;
  if constexpr (Model::kQuadratic) {
    // The Hessian is constant; factor it up front so SPD-ness is always checked.
    llt.compute(H.to_sparse());
    if (llt.info() != Eigen::Success) throw SolverError("non-SPD system");
    factored = true;
  }
  // The quadratic model always takes its single Newton step, even from rest.
  while (g.norm() > tolerance || (Model::kQuadratic && result.newton_iterations == 0)) {
    if (result.newton_iterations >= options.max_iterations) {
      result.v_star = v;
      result.hessian = problem.hessian(v);
      return result;
    }
    if (!Model::kQuadratic || !factored) {
      if (!Model::kQuadratic) H = problem.hessian(v);
      llt.compute(H.to_sparse());
      factored = llt.info() == Eigen::Success;
    }
    Eigen::VectorXd dv;
    if (factored) {
      dv = -llt.solve(g);
    } else if (Model::kQuadratic) {
      throw SolverError("non-SPD system");
    } else {
      dv = -g;
      result.local_minimum = true;
    }
    double alpha = 1.0;
    if (!Model::kQuadratic) {
      const double e0 = problem.energy(v);
      const double slope = g.dot(dv);
      while (problem.energy(v + alpha * dv) > e0 + options.armijo_slope * alpha * slope &&
             alpha > 1e-12) {
        alpha *= options.backtrack_factor;
      }
    }
    v += alpha * dv;
    ++result.newton_iterations;
    g = problem.gradient(v);
  }
  result.converged = true;
  result.v_star = v;
  result.hessian = Model::kQuadratic ? std::move(H) : problem.hessian(v);
  return result;
}

}  // namespace convex_mpm
