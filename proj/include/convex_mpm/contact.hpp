#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "convex_mpm/geometry.hpp"
#include "convex_mpm/grid.hpp"
#include "convex_mpm/particles.hpp"
#include "convex_mpm/rigid_body.hpp"
#include "convex_mpm/sap.hpp"
#include "convex_mpm/types.hpp"

namespace convex_mpm {

/// Stabilization and regularization constants for particle-rigid contact.
struct ContactParameters {
  double stabilization = 1.0;              // beta: v_hat_n = beta phi / dt
  double near_rigid = 1.0;                 // beta_nr: Rn = beta_nr^2 w
  double tangential_ratio = 1e-3;          // sigma: Rt = sigma w
  double max_stabilization_velocity = 10.0;  // m/s
  double min_regularization = 1e-14;

  bool operator==(const ContactParameters&) const = default;
};

/// Friction coefficient per (MPM body, rigid body) pair with a fallback.
struct FrictionTable {
  double default_mu = 0.5;
  std::map<std::pair<int, int>, double> pairs;

  double operator()(int mpm_body, int rigid_body) const {
    const auto it = pairs.find({mpm_body, rigid_body});
    return it == pairs.end() ? default_mu : it->second;
  }
};

/// One particle embedded in one rigid geometry. The frame has columns
/// (t1, t2, n) where n points from the surface witness toward the particle,
/// i.e. into the rigid body.
struct ContactPoint {
  int particle = -1;
  int body = -1;
  Vector3 position = Vector3::Zero();  // particle position at t_n
  Vector3 witness = Vector3::Zero();   // nearest point on the rigid surface
  Vector3 normal = Vector3::UnitZ();
  double penetration = 0.0;  // phi > 0
  Matrix3 frame = Matrix3::Identity();
  double mu = 0.0;
  double Rt = 1.0;
  double Rn = 1.0;
  Vector3 v_hat = Vector3::Zero();
};

/// Right-handed frame with z = n. t1 = normalize(n x e) where e is the world
/// axis least aligned with n (ties x -> y -> z); t2 = n x t1.
inline Matrix3 contact_frame(const Vector3& n) {
  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(n[i]) < std::abs(n[axis])) axis = i;
  }
  const Vector3 t1 = n.cross(Vector3::Unit(axis)).normalized();
  const Vector3 t2 = n.cross(t1);
  Matrix3 R;
  R << t1, t2, n;
  return R;
}

/// One contact per (particle, geometry) pair with the particle strictly
/// inside; sorted by body, then particle.
inline std::vector<ContactPoint> detect_contacts(const ParticleSet& particles,
                                                 const std::vector<RigidBody>& bodies,
                                                 const FrictionTable& friction) {
  std::vector<ContactPoint> contacts;
  for (int b = 0; b < static_cast<int>(bodies.size()); ++b) {
    const RigidTransform X = bodies[b].pose();
    for (int p = 0; p < static_cast<int>(particles.size()); ++p) {
      const DistanceResult d = signed_distance(bodies[b].shape, particles.x[p], X);
      if (!(d.signed_distance < 0.0)) continue;
      ContactPoint c;
      c.particle = p;
      c.body = b;
      c.position = particles.x[p];
      c.witness = d.witness_point;
      c.normal = -d.outward_normal;
      c.penetration = -d.signed_distance;
      c.frame = contact_frame(c.normal);
      c.mu = friction(particles.body[p], b);
      contacts.push_back(c);
    }
  }
  return contacts;
}

/// Maps bodies and grid nodes to generalized velocity indices: the free rigid
/// DoFs of each body first, then three per grid node.
struct DofLayout {
  std::vector<int> rigid_offset;            // -1 for bodies without DoFs
  std::vector<std::vector<int>> rigid_dofs; // spatial components (0..5) per body
  int num_rigid_dofs = 0;
  int num_nodes = 0;

  static DofLayout make(const std::vector<RigidBody>& bodies, int num_nodes) {
    DofLayout layout;
    layout.num_nodes = num_nodes;
    for (const RigidBody& body : bodies) {
      layout.rigid_dofs.push_back(body.free_dofs());
      const int n = static_cast<int>(layout.rigid_dofs.back().size());
      layout.rigid_offset.push_back(n > 0 ? layout.num_rigid_dofs : -1);
      layout.num_rigid_dofs += n;
    }
    return layout;
  }

  int num_velocities() const { return num_rigid_dofs + 3 * num_nodes; }
  int node_dof(int node) const { return num_rigid_dofs + 3 * node; }
};

/// Jacobian blocks of one contact: vc = J_rigid v_body + sum_i (-w_ip R^T) v_i + bias.
struct ContactJacobianBlocks {
  int body = -1;  // body with DoFs, or -1
  Eigen::Matrix<double, 3, 6> rigid = Eigen::Matrix<double, 3, 6>::Zero();  // on (w, v) of the body
  Matrix3 frame_transpose = Matrix3::Identity();
  std::array<int, kStencilSize> nodes{};
  std::array<double, kStencilSize> weights{};
  Vector3 bias = Vector3::Zero();
};

struct ContactJacobian {
  std::vector<ContactJacobianBlocks> blocks;

  int num_contacts() const { return static_cast<int>(blocks.size()); }

  Eigen::SparseMatrix<double, Eigen::RowMajor> assemble(const DofLayout& layout) const {
    std::vector<Eigen::Triplet<double>> triplets;
    for (int j = 0; j < num_contacts(); ++j) {
      const ContactJacobianBlocks& c = blocks[j];
      if (c.body >= 0) {
        const std::vector<int>& dofs = layout.rigid_dofs[c.body];
        for (std::size_t k = 0; k < dofs.size(); ++k) {
          for (int r = 0; r < 3; ++r) {
            triplets.emplace_back(3 * j + r, layout.rigid_offset[c.body] + static_cast<int>(k),
                                  c.rigid(r, dofs[k]));
          }
        }
      }
      for (int a = 0; a < kStencilSize; ++a) {
        if (c.nodes[a] < 0) continue;
        const Matrix3 block = -c.weights[a] * c.frame_transpose;
        for (int r = 0; r < 3; ++r) {
          for (int s = 0; s < 3; ++s) {
            triplets.emplace_back(3 * j + r, layout.node_dof(c.nodes[a]) + s, block(r, s));
          }
        }
      }
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> J(3 * num_contacts(), layout.num_velocities());
    J.setFromTriplets(triplets.begin(), triplets.end());
    return J;
  }

  Eigen::VectorXd stacked_bias() const {
    Eigen::VectorXd b(3 * num_contacts());
    for (int j = 0; j < num_contacts(); ++j) b.segment<3>(3 * j) = blocks[j].bias;
    return b;
  }
};

/// Builds the contact velocity map
///
///   vc_j = R_C^T [(v_b + w_b x (q_p - x_b)) - sum_i w_ip v_i],
///
/// where positive vc_n means the gap opens. Kinematic bodies contribute their
/// prescribed velocity `kinematic_velocity[b]` (ordered (w, v)) as a bias.
inline ContactJacobian build_jacobian(const std::vector<ContactPoint>& contacts,
                                      const std::vector<RigidBody>& bodies,
                                      std::span<const KernelStencil> stencils,
                                      std::span<const Vector6> kinematic_velocity) {
  ContactJacobian J;
  J.blocks.reserve(contacts.size());
  for (const ContactPoint& c : contacts) {
    ContactJacobianBlocks blk;
    const RigidBody& body = bodies[c.body];
    blk.frame_transpose = c.frame.transpose();
    Eigen::Matrix<double, 3, 6> point_map;
    point_map << -skew(c.witness - body.position), Matrix3::Identity();
    const Eigen::Matrix<double, 3, 6> rigid = blk.frame_transpose * point_map;
    if (body.kinematic()) {
      blk.bias = rigid * kinematic_velocity[c.body];
    } else if (!body.free_dofs().empty()) {
      blk.body = c.body;
      blk.rigid = rigid;
    }
    const KernelStencil& s = stencils[c.particle];
    blk.nodes = s.node;
    blk.weights = s.w;
    J.blocks.push_back(blk);
  }
  return J;
}

/// Inverse of the block diagonal of A: one block per rigid body with DoFs and
/// a 3x3 block per grid node.
struct BlockDiagonalInverse {
  std::vector<Eigen::MatrixXd> rigid;  // empty for bodies without DoFs
  std::vector<Matrix3> nodes;
};

/// Sets v_hat, Rt and Rn of each contact:
///
///   v_hat_n = min(beta phi / dt, v_max),  w = tr(J_j W J_j^T) / 3,
///   Rn = max(beta_nr^2 w, eps),  Rt = max(sigma w, eps),
///
/// with W the inverse of the block diagonal of A.
inline void stabilization_and_regularization(std::vector<ContactPoint>* contacts,
                                             const ContactJacobian& jacobian,
                                             const DofLayout& layout,
                                             const BlockDiagonalInverse& w_inv, double dt,
                                             const ContactParameters& params) {
  for (std::size_t j = 0; j < contacts->size(); ++j) {
    ContactPoint& c = (*contacts)[j];
    const ContactJacobianBlocks& blk = jacobian.blocks[j];
    Matrix3 W = Matrix3::Zero();
    if (blk.body >= 0) {
      const std::vector<int>& dofs = layout.rigid_dofs[blk.body];
      Eigen::MatrixXd Jr(3, dofs.size());
      for (std::size_t k = 0; k < dofs.size(); ++k) Jr.col(k) = blk.rigid.col(dofs[k]);
      W += Jr * w_inv.rigid[blk.body] * Jr.transpose();
    }
    for (int a = 0; a < kStencilSize; ++a) {
      if (blk.nodes[a] < 0) continue;
      const double w = blk.weights[a];
      W += w * w * blk.frame_transpose * w_inv.nodes[blk.nodes[a]] * blk.frame_transpose.transpose();
    }
    const double delassus = W.trace() / 3.0;
    c.Rn = std::max(params.near_rigid * params.near_rigid * delassus, params.min_regularization);
    c.Rt = std::max(params.tangential_ratio * delassus, params.min_regularization);
    const double vn = std::min(params.stabilization * c.penetration / dt,
                               params.max_stabilization_velocity);
    c.v_hat = Vector3(0.0, 0.0, vn);
  }
}

/// The contact problem restricted to the DoFs touched by some contact, with
/// the remaining DoFs eliminated by a Schur complement.
struct SchurReduction {
  SapProblem reduced;
  std::vector<int> participating;
  std::vector<int> eliminated;
  Eigen::MatrixXd coupling;  // A_ee^-1 A_ep
  Eigen::VectorXd v_star;

  /// Full velocity from reduced velocities: v_e = v*_e - A_ee^-1 A_ep (v_p - v*_p).
  Eigen::VectorXd expand(const Eigen::VectorXd& v_reduced) const {
    Eigen::VectorXd v = v_star;
    Eigen::VectorXd dp(participating.size());
    for (std::size_t k = 0; k < participating.size(); ++k) {
      v(participating[k]) = v_reduced(k);
      dp(k) = v_reduced(k) - v_star(participating[k]);
    }
    if (!eliminated.empty() && dp.size() > 0) {
      const Eigen::VectorXd de = coupling * dp;
      for (std::size_t k = 0; k < eliminated.size(); ++k) v(eliminated[k]) -= de(k);
    }
    return v;
  }
};

/// DoFs with a structural entry in some column of J participate.
inline SchurReduction schur_reduce(const SapProblem& full) {
  SchurReduction out;
  const int nv = full.num_velocities();
  out.v_star = full.v_star;
  std::vector<char> used(nv, 0);
  for (int r = 0; r < full.J.outerSize(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(full.J, r); it; ++it) {
      used[it.col()] = 1;
    }
  }
  std::vector<int> local(nv, -1);
  for (int i = 0; i < nv; ++i) {
    std::vector<int>& dst = used[i] ? out.participating : out.eliminated;
    local[i] = static_cast<int>(dst.size());
    dst.push_back(i);
  }
  const int np = static_cast<int>(out.participating.size());
  const int ne = static_cast<int>(out.eliminated.size());

  const Eigen::SparseMatrix<double> A =
      full.dense_A ? Eigen::SparseMatrix<double>(full.dense_A->sparseView()) : full.sparse_A;
  Eigen::MatrixXd A_pp = Eigen::MatrixXd::Zero(np, np);
  Eigen::MatrixXd A_ep = Eigen::MatrixXd::Zero(ne, np);
  std::vector<Eigen::Triplet<double>> ee;
  for (int c = 0; c < A.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, c); it; ++it) {
      const int r = static_cast<int>(it.row());
      if (used[r] && used[c]) {
        A_pp(local[r], local[c]) = it.value();
      } else if (!used[r] && used[c]) {
        A_ep(local[r], local[c]) = it.value();
      } else if (!used[r] && !used[c]) {
        ee.emplace_back(local[r], local[c], it.value());
      }
    }
  }

  Eigen::MatrixXd A_r = A_pp;
  if (ne > 0 && np > 0) {
    Eigen::SparseMatrix<double> A_ee(ne, ne);
    A_ee.setFromTriplets(ee.begin(), ee.end());
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt(A_ee);
    if (llt.info() != Eigen::Success) throw SolverError("non-SPD system");
    out.coupling = llt.solve(A_ep);
    A_r.noalias() -= A_ep.transpose() * out.coupling;
    A_r = 0.5 * (A_r + A_r.transpose());
  }

  SapProblem& red = out.reduced;
  red.dense_A = std::move(A_r);
  red.v_star.resize(np);
  for (int k = 0; k < np; ++k) red.v_star(k) = full.v_star(out.participating[k]);
  std::vector<Eigen::Triplet<double>> jt;
  for (int r = 0; r < full.J.outerSize(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(full.J, r); it; ++it) {
      jt.emplace_back(r, local[it.col()], it.value());
    }
  }
  red.J.resize(full.J.rows(), np);
  red.J.setFromTriplets(jt.begin(), jt.end());
  red.contacts = full.contacts;
  return out;
}

}  // namespace convex_mpm
