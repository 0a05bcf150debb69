#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "convex_mpm/types.hpp"

namespace convex_mpm {

/// Contact impulse gamma = (gamma_t1, gamma_t2, gamma_n) with its derivative
/// with respect to y.
struct ProjectionResult {
  Vector3 gamma = Vector3::Zero();
  Matrix3 dgamma_dy = Matrix3::Zero();
  enum class Region { kInactive, kStiction, kSliding } region = Region::kInactive;
};

using ContactRegime = ProjectionResult::Region;

/// Projection of y onto the friction cone |gamma_t| <= mu gamma_n in the norm
/// weighted by R = diag(Rt, Rt, Rn).
///
/// With mu_hat = mu Rt / Rn: y itself when |y_t| <= mu y_n (stiction), zero when
/// y_n <= -mu_hat |y_t| (inactive), and otherwise the sliding point
/// gamma_n = (y_n + mu_hat |y_t|) / (1 + mu mu_hat), gamma_t = mu gamma_n y_t/|y_t|.
/// Boundary points take the stiction-side derivative.
inline ProjectionResult project_impulse(const Vector3& y, double mu, double Rt, double Rn) {
  ProjectionResult r;
  const double yn = y.z();
  if (mu <= 0.0) {
    if (yn > 0.0) {
      r.gamma = Vector3(0.0, 0.0, yn);
      r.dgamma_dy(2, 2) = 1.0;
      r.region = ContactRegime::kStiction;
    }
    return r;
  }
  const Eigen::Vector2d yt = y.head<2>();
  const double t = yt.norm();
  const double mu_hat = mu * Rt / Rn;
  if (t <= mu * yn) {
    r.gamma = y;
    r.dgamma_dy.setIdentity();
    r.region = ContactRegime::kStiction;
    return r;
  }
  if (yn <= -mu_hat * t) return r;

  // Sliding; here t > 0.
  const Eigen::Vector2d that = yt / t;
  const double denom = 1.0 + mu * mu_hat;
  const double gn = (yn + mu_hat * t) / denom;
  r.gamma << mu * gn * that, gn;
  r.region = ContactRegime::kSliding;

  const Eigen::RowVector2d dgn_dyt = mu_hat / denom * that.transpose();
  const double dgn_dyn = 1.0 / denom;
  const Eigen::Matrix2d P = Eigen::Matrix2d::Identity() - that * that.transpose();
  r.dgamma_dy.topLeftCorner<2, 2>() = mu * (that * dgn_dyt + gn / t * P);
  r.dgamma_dy.topRightCorner<2, 1>() = mu * dgn_dyn * that;
  r.dgamma_dy.bottomLeftCorner<1, 2>() = dgn_dyt;
  r.dgamma_dy(2, 2) = dgn_dyn;
  return r;
}

/// Per-contact data of the convex contact problem (all in the contact frame).
struct SapContact {
  double mu = 0.0;
  double Rt = 1.0;                    // tangential regularization
  double Rn = 1.0;                    // normal regularization
  Vector3 v_hat = Vector3::Zero();    // stabilization velocity (0, 0, v_hat_n)
  Vector3 bias = Vector3::Zero();     // contact velocity not captured by J v
};

/// min_v 1/2 |v - v*|_A^2 + l_c(J v + bias), with A SPD.
///
/// A is held dense (`dense_A`) or sparse (`sparse_A`); exactly one is used.
struct SapProblem {
  std::optional<Eigen::MatrixXd> dense_A;
  Eigen::SparseMatrix<double> sparse_A;
  Eigen::VectorXd v_star;
  Eigen::SparseMatrix<double, Eigen::RowMajor> J;
  std::vector<SapContact> contacts;

  int num_velocities() const { return static_cast<int>(v_star.size()); }
  int num_contacts() const { return static_cast<int>(contacts.size()); }

  Eigen::VectorXd multiply_A(const Eigen::VectorXd& x) const {
    if (dense_A) return *dense_A * x;
    return sparse_A * x;
  }
};

enum class LineSearch { kExact, kBacktracking };

struct SapOptions {
  double relative_tolerance = 1e-6;
  int max_iterations = 200;
  LineSearch line_search = LineSearch::kExact;
  double max_step = 1.5;  // exact search looks for alpha in (0, max_step]
  double armijo_slope = 1e-4;
  double backtrack_factor = 0.5;
  int max_line_search_steps = 60;
  int dense_threshold = 2048;  // dense Cholesky up to this many DoFs
};

/// Cost, gradient and impulses of the problem at a given v.
struct SapEvaluation {
  double cost = 0.0;
  Eigen::VectorXd gradient;
  Eigen::VectorXd momentum;  // A (v - v*)
  Eigen::VectorXd generalized_impulse;  // J^T gamma
  Eigen::VectorXd gamma;     // stacked per contact
  Eigen::VectorXd vc;        // stacked contact velocities
  std::vector<ProjectionResult> projections;
};

namespace internal {

inline std::string scientific(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

inline double contact_cost(const Vector3& gamma, const SapContact& c) {
  return 0.5 * (c.Rt * gamma.head<2>().squaredNorm() + c.Rn * gamma.z() * gamma.z());
}

inline Vector3 contact_y(const Vector3& vc, const SapContact& c) {
  const Vector3 d = c.v_hat - vc;
  return Vector3(d.x() / c.Rt, d.y() / c.Rt, d.z() / c.Rn);
}

}  // namespace internal

/// l(v) = 1/2 |v - v*|_A^2 + sum_j 1/2 gamma_j^T R_j gamma_j, where
/// gamma_j = P(R_j^-1 (v_hat_j - vc_j)) and vc = J v + bias; the gradient is
/// A (v - v*) - J^T gamma.
inline SapEvaluation cost_gradient(const SapProblem& problem, const Eigen::VectorXd& v) {
  SapEvaluation e;
  const Eigen::VectorXd dv = v - problem.v_star;
  e.momentum = problem.multiply_A(dv);
  e.cost = 0.5 * dv.dot(e.momentum);
  const int nc = problem.num_contacts();
  e.vc = problem.J * v;
  e.gamma.resize(3 * nc);
  e.projections.resize(nc);
  for (int j = 0; j < nc; ++j) {
    const SapContact& c = problem.contacts[j];
    e.vc.segment<3>(3 * j) += c.bias;
    const Vector3 y = internal::contact_y(e.vc.segment<3>(3 * j), c);
    e.projections[j] = project_impulse(y, c.mu, c.Rt, c.Rn);
    e.gamma.segment<3>(3 * j) = e.projections[j].gamma;
    e.cost += internal::contact_cost(e.projections[j].gamma, c);
  }
  e.generalized_impulse = problem.J.transpose() * e.gamma;
  e.gradient = e.momentum - e.generalized_impulse;
  return e;
}

namespace internal {

/// Cost along v + alpha dv with its first two derivatives in alpha. Only
/// O(contacts) work per evaluation once A dv and J dv are known.
struct LineFunction {
  const SapProblem& problem;
  Eigen::VectorXd vc0, Jdv;
  double q0 = 0.0, q1 = 0.0, q2 = 0.0;  // quadratic part q0 + q1 a + q2 a^2 / 2

  LineFunction(const SapProblem& p, const Eigen::VectorXd& v, const Eigen::VectorXd& momentum,
               const Eigen::VectorXd& dv)
      : problem(p), vc0(p.J * v), Jdv(p.J * dv) {
    for (int j = 0; j < p.num_contacts(); ++j) vc0.segment<3>(3 * j) += p.contacts[j].bias;
    q0 = 0.5 * (v - p.v_star).dot(momentum);
    q1 = dv.dot(momentum);
    q2 = dv.dot(p.multiply_A(dv));
  }

  // (l, dl/dalpha, d2l/dalpha2) at alpha.
  Eigen::Vector3d operator()(double alpha) const {
    Eigen::Vector3d out(q0 + alpha * q1 + 0.5 * alpha * alpha * q2, q1 + alpha * q2, q2);
    for (int j = 0; j < problem.num_contacts(); ++j) {
      const SapContact& c = problem.contacts[j];
      const Vector3 w = Jdv.segment<3>(3 * j);
      const Vector3 y = contact_y(vc0.segment<3>(3 * j) + alpha * w, c);
      const ProjectionResult pr = project_impulse(y, c.mu, c.Rt, c.Rn);
      out[0] += contact_cost(pr.gamma, c);
      out[1] -= pr.gamma.dot(w);
      out[2] += w.dot(pr.dgamma_dy * Vector3(w.x() / c.Rt, w.y() / c.Rt, w.z() / c.Rn));
    }
    return out;
  }
};

/// Minimizer of the convex l(alpha) on (0, alpha_max] by safeguarded Newton on
/// dl/dalpha, assuming dl/dalpha(0) < 0.
inline double exact_step(const LineFunction& f, double alpha_max) {
  Eigen::Vector3d hi_val = f(alpha_max);
  if (hi_val[1] <= 0.0) return alpha_max;
  double lo = 0.0, hi = alpha_max;
  const double d0 = std::abs(f.q1);
  double alpha = 1.0 < alpha_max ? 1.0 : 0.5 * alpha_max;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector3d val = f(alpha);
    if (std::abs(val[1]) <= 1e-10 * d0) return alpha;
    if (val[1] < 0.0) {
      lo = alpha;
    } else {
      hi = alpha;
    }
    double next = val[2] > 0.0 ? alpha - val[1] / val[2] : -1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-14 * hi) return lo > 0.0 ? lo : hi;
    alpha = next;
  }
  return lo > 0.0 ? lo : alpha;
}

}  // namespace internal

struct ImpulseResult {
  Eigen::VectorXd v;
  Eigen::VectorXd gamma;  // stacked (t1, t2, n) per contact, N s
  Eigen::VectorXd vc;     // contact velocities at v
  std::vector<ContactRegime> regimes;
  std::vector<double> costs;  // cost at every iterate, starting with the initial guess
  int iterations = 0;
  bool converged = false;
  double optimality = 0.0;  // |grad l| / scale at exit
};

/// Newton's method on the strictly convex cost, with an exact line search
/// (default) or Armijo backtracking.
///
/// Stops when |grad l| <= tol * max(|A (v - v*)|, |J^T gamma|, 1e-12). Throws
/// SolverError when the iteration cap is reached or no descent is possible
/// away from the optimum.
inline ImpulseResult solve(const SapProblem& problem, const SapOptions& options = {},
                           const std::optional<Eigen::VectorXd>& initial_guess = std::nullopt) {
  ImpulseResult result;
  const int nv = problem.num_velocities();
  const int nc = problem.num_contacts();
  Eigen::VectorXd v = initial_guess ? *initial_guess : problem.v_star;
  const bool use_dense = nv <= options.dense_threshold;
  std::optional<Eigen::MatrixXd> A_dense;
  Eigen::SparseMatrix<double> A_sparse;
  if (use_dense) {
    A_dense = problem.dense_A ? *problem.dense_A : Eigen::MatrixXd(problem.sparse_A);
  } else {
    A_sparse = problem.dense_A ? Eigen::SparseMatrix<double>(problem.dense_A->sparseView()) : problem.sparse_A;
  }
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> sparse_llt;
  bool analyzed = false;
  const Eigen::SparseMatrix<double> Jc(problem.J);

  auto finish = [&](const SapEvaluation& e, bool converged, double optimality) {
    result.v = v;
    result.gamma = e.gamma;
    result.vc = e.vc;
    result.regimes.resize(nc);
    for (int j = 0; j < nc; ++j) result.regimes[j] = e.projections[j].region;
    result.converged = converged;
    result.optimality = optimality;
    return result;
  };

  SapEvaluation e = cost_gradient(problem, v);
  result.costs.push_back(e.cost);
  for (;;) {
    const double scale = std::max({e.momentum.norm(), e.generalized_impulse.norm(), 1e-12});
    const double optimality = e.gradient.norm() / scale;
    if (optimality <= options.relative_tolerance) return finish(e, true, optimality);
    if (result.iterations >= options.max_iterations) {
      throw SolverError("contact solver exceeded " + std::to_string(options.max_iterations) +
                        " iterations (optimality " + internal::scientific(optimality) + ")");
    }

    // G_j = dgamma/dy R^-1 is the Hessian of the contact cost in vc.
    std::vector<Eigen::Triplet<double>> g_triplets;
    g_triplets.reserve(9 * nc);
    for (int j = 0; j < nc; ++j) {
      const SapContact& c = problem.contacts[j];
      Matrix3 G = e.projections[j].dgamma_dy * Vector3(1.0 / c.Rt, 1.0 / c.Rt, 1.0 / c.Rn).asDiagonal();
      G = 0.5 * (G + G.transpose());
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) g_triplets.emplace_back(3 * j + a, 3 * j + b, G(a, b));
      }
    }
    Eigen::SparseMatrix<double> G(3 * nc, 3 * nc);
    G.setFromTriplets(g_triplets.begin(), g_triplets.end());
    const Eigen::SparseMatrix<double> JtGJ(Jc.transpose() * G * Jc);
    Eigen::VectorXd dv;
    if (use_dense) {
      Eigen::MatrixXd H = *A_dense;
      for (int k = 0; k < JtGJ.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(JtGJ, k); it; ++it) H(it.row(), it.col()) += it.value();
      }
      Eigen::LLT<Eigen::MatrixXd> llt(H);
      if (llt.info() != Eigen::Success) throw SolverError("contact Hessian is not SPD");
      dv = -llt.solve(e.gradient);
    } else {
      const Eigen::SparseMatrix<double> H = A_sparse + JtGJ;
      if (!analyzed) {
        sparse_llt.analyzePattern(H);
        analyzed = true;
      }
      sparse_llt.factorize(H);
      if (sparse_llt.info() != Eigen::Success) throw SolverError("contact Hessian is not SPD");
      dv = -sparse_llt.solve(e.gradient);
    }

    const double slope = e.gradient.dot(dv);
    double alpha = 1.0;
    SapEvaluation trial;
    bool accepted = false;
    if (options.line_search == LineSearch::kExact && slope < 0.0) {
      alpha = internal::exact_step(internal::LineFunction(problem, v, e.momentum, dv), options.max_step);
      trial = cost_gradient(problem, v + alpha * dv);
      // At roundoff the exact step may stall; backtracking then decides.
      accepted = trial.cost < e.cost ||
                 (trial.cost == e.cost && trial.gradient.norm() < e.gradient.norm());
      if (!accepted) alpha = 1.0;
    }
    for (int k = 0; !accepted && k < options.max_line_search_steps; ++k) {
      trial = cost_gradient(problem, v + alpha * dv);
      if (trial.cost < e.cost && trial.cost <= e.cost + options.armijo_slope * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= options.backtrack_factor;
    }
    if (!accepted) {
      // No representable decrease left: accept the current iterate only if it
      // is within roundoff of the optimum.
      if (optimality <= 1e3 * options.relative_tolerance ||
          dv.norm() <= 1e-13 * (1.0 + v.norm())) {
        return finish(e, true, optimality);
      }
      throw SolverError("contact solver line search failed (optimality " +
                        internal::scientific(optimality) + ")");
    }
    v += alpha * dv;
    e = std::move(trial);
    ++result.iterations;
    result.costs.push_back(e.cost);
  }
}

}  // namespace convex_mpm
