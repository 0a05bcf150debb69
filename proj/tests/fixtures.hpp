#pragma once

// Small scenes shared by the unit tests and the acceptance run.

#include "convex_mpm/contact.hpp"
#include "convex_mpm/free_motion.hpp"
#include "convex_mpm/simulation.hpp"
#include "convex_mpm/transfer.hpp"
#include "oracles.hpp"

namespace fixture {

using namespace convex_mpm;

inline RigidBody free_body(const Shape& shape, double mass, const Vector3& position) {
  RigidBody b;
  b.shape = shape;
  b.mass = mass;
  b.inertia = shape_unit_inertia(shape, mass);
  b.position = position;
  return b;
}

inline RigidBody floor_body() {
  RigidBody b;
  b.name = "floor";
  b.shape = Shape{HalfSpace{}, {}};
  b.actuation = Actuation::kKinematic;
  return b;
}

/// Assembles the full contact problem of a small MPM + rigid scene the way the
/// stepper does.
inline SapProblem assemble_problem(const ParticleSet& particles, const std::vector<RigidBody>& bodies,
                                   double h) {
  std::vector<KernelStencil> stencils;
  const SparseGrid grid = particles_to_grid(particles, h, &stencils);
  const std::vector<CorotationalModel> models{{LameParameters{1e3, 1e3}, PlasticParameters::none()}};
  const double dt = 0.01;
  const Vector3 gravity(0.0, 0.0, -9.81);
  const MpmEnergyProblem<CorotationalModel> mpm(grid, particles, stencils, models, gravity, dt);
  const FreeMotionResult free = solve_free_motion_mpm(mpm);
  const RigidFreeMotion rigid = rigid_free_motion(bodies, gravity, 0.0, dt);
  const DofLayout layout = DofLayout::make(bodies, grid.num_nodes());
  const int nr = layout.num_rigid_dofs;
  const int nv = layout.num_velocities();

  SapProblem p;
  p.v_star.resize(nv);
  p.v_star << rigid.v_star, free.v_star;
  std::vector<Triplet> t;
  BlockDiagonalInverse w;
  w.rigid.resize(bodies.size());
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    if (layout.rigid_offset[b] < 0) continue;
    const Eigen::MatrixXd& M = rigid.blocks[b];
    for (int r = 0; r < M.rows(); ++r) {
      for (int c = 0; c < M.cols(); ++c) t.emplace_back(layout.rigid_offset[b] + r, layout.rigid_offset[b] + c, M(r, c));
    }
    w.rigid[b] = M.inverse();
  }
  free.hessian.append_triplets(&t, nr);
  for (int i = 0; i < grid.num_nodes(); ++i) w.nodes.push_back(free.hessian.diagonal_block(i).inverse());
  p.sparse_A.resize(nv, nv);
  p.sparse_A.setFromTriplets(t.begin(), t.end());

  FrictionTable friction;
  friction.default_mu = 0.5;
  std::vector<ContactPoint> contacts = detect_contacts(particles, bodies, friction);
  std::vector<Vector6> kin(bodies.size(), Vector6::Zero());
  const ContactJacobian jac = build_jacobian(contacts, bodies, stencils, kin);
  stabilization_and_regularization(&contacts, jac, layout, w, dt, ContactParameters{});
  p.J = jac.assemble(layout);
  for (std::size_t j = 0; j < contacts.size(); ++j) {
    p.contacts.push_back({contacts[j].mu, contacts[j].Rt, contacts[j].Rn, contacts[j].v_hat, jac.blocks[j].bias});
  }
  return p;
}

/// Random particles near the origin, straddling the plane z = 0. With
/// `cell_centered` each particle sits at the center of a grid cell, where its
/// stencil touches only 8 nodes.
inline ParticleSet random_contact_particles(oracle::Gen& gen, int n, double h, bool cell_centered = false) {
  ParticleSet particles;
  for (int k = 0; k < n; ++k) {
    Vector3 x(gen.uniform(-0.03, 0.03), gen.uniform(-0.03, 0.03), gen.uniform(-0.02, 0.01));
    if (cell_centered) x = ((x / h).array().floor() + 0.5).matrix() * h;
    particles.add(x, gen.vector(-0.5, 0.5), 0.1, 1e-4);
  }
  return particles;
}

inline SapProblem assemble_problem(oracle::Gen& gen, int n_particles, const std::vector<RigidBody>& bodies,
                                   double h) {
  return assemble_problem(random_contact_particles(gen, n_particles, h), bodies, h);
}

}  // namespace fixture
