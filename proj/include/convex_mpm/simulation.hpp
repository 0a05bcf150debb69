#pragma once

#include <array>
#include <chrono>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "convex_mpm/contact.hpp"
#include "convex_mpm/corotational.hpp"
#include "convex_mpm/free_motion.hpp"
#include "convex_mpm/geometry.hpp"
#include "convex_mpm/linalg.hpp"
#include "convex_mpm/particles.hpp"
#include "convex_mpm/rigid_body.hpp"
#include "convex_mpm/sap.hpp"
#include "convex_mpm/scene.hpp"
#include "convex_mpm/transfer.hpp"

namespace convex_mpm {

/// Generalized state: rigid bodies (with their poses and velocities) and the
/// particles. Generalized velocities order the rigid DoFs before the grid.
struct SystemState {
  std::vector<RigidBody> bodies;
  ParticleSet particles;
  double time = 0.0;
  int step = 0;
};

struct StepDiagnostics {
  int step = 0;       // index of the completed step
  double time = 0.0;  // time at the end of the step
  int num_particles = 0;
  int num_nodes = 0;
  int num_contacts = 0;
  int participating_dofs = 0;
  bool schur_reduced = false;

  int newton_iterations = 0;
  bool free_motion_converged = true;
  bool cholesky_ok = true;

  int sap_iterations = 0;
  double sap_optimality = 0.0;
  bool sap_monotone = true;
  bool cone_feasible = true;
  std::array<int, 3> regimes{};  // inactive, stiction, sliding

  std::vector<Vector3> body_force;   // net contact force on each rigid body, N (world)
  std::vector<Vector3> body_torque;  // about the body origin, N m
  std::vector<double> body_slip;     // gamma_n-weighted mean tangential contact speed, m/s

  int inverted_particles = 0;
  int plastic_projections = 0;
  int plastic_skipped = 0;
  double max_penetration = 0.0;
  double kinetic_energy = 0.0;
  double potential_energy = 0.0;
  double wall_seconds = 0.0;
};

/// Builds the initial state: seeds every MPM body and copies the rigid bodies.
inline SystemState initial_state(const SceneConfig& scene) {
  scene.validate();
  SystemState state;
  state.bodies = scene.rigid_bodies;
  for (std::size_t b = 0; b < scene.mpm_bodies.size(); ++b) {
    const MpmBodyConfig& cfg = scene.mpm_bodies[b];
    state.particles.append(sample_particles(cfg.shape, scene.grid_spacing, cfg.density,
                                            cfg.particles_per_cell, cfg.velocity,
                                            static_cast<int>(b)));
  }
  return state;
}

/// Checks cone feasibility |gamma_t| <= mu gamma_n + 1e-10 (1 + gamma_n), gamma_n >= 0.
inline bool impulses_feasible(const Eigen::VectorXd& gamma, const std::vector<SapContact>& contacts) {
  for (std::size_t j = 0; j < contacts.size(); ++j) {
    const Vector3 g = gamma.segment<3>(3 * j);
    if (g.z() < 0.0) return false;
    if (g.head<2>().norm() > contacts[j].mu * g.z() + 1e-10 * (1.0 + g.z())) return false;
  }
  return true;
}

/// Largest number of contact DoFs solved on the Schur-reduced system.
inline constexpr int kSchurThreshold = 512;

/// `candidate` when its cost is below the cost at v*, else v*.
inline Eigen::VectorXd better_start(const SapProblem& problem, const Eigen::VectorXd& candidate) {
  if (cost_gradient(problem, candidate).cost < cost_gradient(problem, problem.v_star).cost) return candidate;
  return problem.v_star;
}

/// Advances the system by one step of size `dt`:
///
///  1. P2G and stencils at t_n.
///  2. Contact detection at t_n.
///  3. Rigid free motion and MPM free motion (one Newton step for the
///     quadratic model), giving v* and A = blockdiag(A_rigid, A_MPM).
///  4. Contact Jacobian, stabilization and regularization.
///  5. Convex contact solve, reduced to the contact DoFs when that system is
///     small, else on the full sparse system.
///  6. Rigid pose update, G2P with advection, return map and R0 refresh.
///
/// The state is modified only if the whole step succeeds.
inline StepDiagnostics step(SystemState* state, const SceneConfig& scene,
                            const std::vector<CorotationalModel>& models, double dt) {
  const auto clock_start = std::chrono::steady_clock::now();
  SystemState next = *state;
  ParticleSet& particles = next.particles;
  std::vector<RigidBody>& bodies = next.bodies;
  const double t = state->time;
  const double h = scene.grid_spacing;

  StepDiagnostics diag;
  diag.step = state->step + 1;
  diag.time = t + dt;
  diag.num_particles = static_cast<int>(particles.size());

  std::vector<KernelStencil> stencils;
  SparseGrid grid = particles_to_grid(particles, h, &stencils);
  diag.num_nodes = grid.num_nodes();

  std::vector<Vector6> kinematic_velocity(bodies.size(), Vector6::Zero());
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    if (bodies[b].kinematic()) kinematic_velocity[b] = prescribed_velocity(bodies[b], t + 0.5 * dt);
  }
  std::vector<ContactPoint> contacts = detect_contacts(particles, bodies, scene.friction_table());
  diag.num_contacts = static_cast<int>(contacts.size());

  const RigidFreeMotion rigid = rigid_free_motion(bodies, scene.gravity, t, dt);
  FreeMotionOptions fm_options;
  fm_options.relative_tolerance = scene.tolerance;
  const MpmEnergyProblem<CorotationalModel> mpm(grid, particles, stencils, models, scene.gravity, dt);
  FreeMotionResult free;
  if (grid.num_nodes() > 0) {
    free = solve_free_motion_mpm(mpm, fm_options);
    diag.newton_iterations = free.newton_iterations;
    diag.free_motion_converged = free.converged;
  } else {
    free.v_star.resize(0);
    free.converged = true;
  }

  const DofLayout layout = DofLayout::make(bodies, grid.num_nodes());
  const int nr = layout.num_rigid_dofs;
  const int nv = layout.num_velocities();
  SapProblem problem;
  problem.v_star.resize(nv);
  problem.v_star.head(nr) = rigid.v_star;
  problem.v_star.tail(nv - nr) = free.v_star;
  std::vector<Triplet> a_triplets;
  BlockDiagonalInverse w_inv;
  w_inv.rigid.resize(bodies.size());
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    if (layout.rigid_offset[b] < 0) continue;
    const Eigen::MatrixXd& M = rigid.blocks[b];
    const int o = layout.rigid_offset[b];
    for (int r = 0; r < M.rows(); ++r) {
      for (int c = 0; c < M.cols(); ++c) a_triplets.emplace_back(o + r, o + c, M(r, c));
    }
    w_inv.rigid[b] = M.inverse();
  }
  if (grid.num_nodes() > 0) {
    free.hessian.append_triplets(&a_triplets, nr);
    w_inv.nodes.resize(grid.num_nodes());
    for (int i = 0; i < grid.num_nodes(); ++i) w_inv.nodes[i] = free.hessian.diagonal_block(i).inverse();
  }
  problem.sparse_A.resize(nv, nv);
  problem.sparse_A.setFromTriplets(a_triplets.begin(), a_triplets.end());

  const ContactJacobian jacobian = build_jacobian(contacts, bodies, stencils, kinematic_velocity);
  stabilization_and_regularization(&contacts, jacobian, layout, w_inv, dt, scene.contact);
  problem.J = jacobian.assemble(layout);
  problem.contacts.reserve(contacts.size());
  for (std::size_t j = 0; j < contacts.size(); ++j) {
    problem.contacts.push_back(
        {contacts[j].mu, contacts[j].Rt, contacts[j].Rn, contacts[j].v_hat, jacobian.blocks[j].bias});
    diag.max_penetration = std::max(diag.max_penetration, contacts[j].penetration);
  }

  SapOptions sap_options;
  sap_options.relative_tolerance = scene.tolerance;
  sap_options.max_iterations = scene.max_solver_iterations;
  std::vector<char> used(nv, 0);
  for (int r = 0; r < problem.J.outerSize(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(problem.J, r); it; ++it) {
      used[it.col()] = 1;
    }
  }
  for (char u : used) diag.participating_dofs += u;

  // Warm start from the velocities at t_n when that is the better point.
  Eigen::VectorXd v_start(nv);
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    if (layout.rigid_offset[b] < 0) continue;
    const Vector6 v = bodies[b].spatial_velocity();
    const std::vector<int>& dofs = layout.rigid_dofs[b];
    for (std::size_t k = 0; k < dofs.size(); ++k) v_start(layout.rigid_offset[b] + k) = v(dofs[k]);
  }
  if (grid.num_nodes() > 0) v_start.tail(nv - nr) = mpm.initial_velocity();

  Eigen::VectorXd v_next;
  ImpulseResult impulses;
  const std::vector<SapContact>* solved_contacts = &problem.contacts;
  if (diag.participating_dofs <= kSchurThreshold) {
    const SchurReduction reduction = schur_reduce(problem);
    Eigen::VectorXd start(reduction.participating.size());
    for (std::size_t k = 0; k < reduction.participating.size(); ++k) {
      start(k) = v_start(reduction.participating[k]);
    }
    impulses = solve(reduction.reduced, sap_options, better_start(reduction.reduced, start));
    v_next = reduction.expand(impulses.v);
    diag.schur_reduced = true;
  } else {
    impulses = solve(problem, sap_options, better_start(problem, v_start));
    v_next = impulses.v;
  }
  diag.sap_iterations = impulses.iterations;
  diag.sap_optimality = impulses.optimality;
  for (std::size_t k = 1; k < impulses.costs.size(); ++k) {
    if (!(impulses.costs[k] <= impulses.costs[k - 1])) diag.sap_monotone = false;
  }
  diag.cone_feasible = impulses_feasible(impulses.gamma, *solved_contacts);

  diag.body_force.assign(bodies.size(), Vector3::Zero());
  diag.body_torque.assign(bodies.size(), Vector3::Zero());
  diag.body_slip.assign(bodies.size(), 0.0);
  std::vector<double> normal_sum(bodies.size(), 0.0);
  for (std::size_t j = 0; j < contacts.size(); ++j) {
    const ContactPoint& c = contacts[j];
    const Vector3 gamma = impulses.gamma.segment<3>(3 * j);
    const Vector3 f = c.frame * gamma / dt;
    diag.body_force[c.body] += f;
    diag.body_torque[c.body] += (c.witness - bodies[c.body].position).cross(f);
    diag.body_slip[c.body] += gamma.z() * impulses.vc.segment<2>(3 * j).norm();
    normal_sum[c.body] += gamma.z();
    ++diag.regimes[static_cast<int>(impulses.regimes[j])];
  }
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    if (normal_sum[b] > 0.0) diag.body_slip[b] /= normal_sum[b];
  }

  // Rigid bodies: velocities from the solve, then q_{n+1} = q_n + dt N(q) v_{n+1}.
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    RigidBody& body = bodies[b];
    if (body.kinematic()) {
      body.set_spatial_velocity(kinematic_velocity[b]);
    } else {
      Vector6 v = Vector6::Zero();
      const std::vector<int>& dofs = layout.rigid_dofs[b];
      for (std::size_t k = 0; k < dofs.size(); ++k) v(dofs[k]) = v_next(layout.rigid_offset[b] + k);
      body.set_spatial_velocity(v);
    }
    integrate_pose(&body, dt);
  }

  const std::vector<Vector3> grid_velocity = unstack(v_next.tail(nv - nr));
  diag.inverted_particles = grid_to_particles(grid, grid_velocity, stencils, dt, &particles);
  for (std::size_t p = 0; p < particles.size(); ++p) {
    const CorotationalModel& m = models[particles.body[p]];
    const ReturnMapResult rm = return_map(particles.F[p], particles.Fp[p], particles.R0[p], m.lame, m.plastic);
    particles.Fp[p] = rm.Fp;
    if (rm.status == ReturnMapStatus::kProjected) ++diag.plastic_projections;
    if (rm.status == ReturnMapStatus::kSkippedIllConditioned) ++diag.plastic_skipped;
    try {
      particles.R0[p] = polar_decompose(rm.Fe).first;
    } catch (const SolverError&) {
      // Singular Fe: keep the previous rotation.
    }
  }

  for (std::size_t p = 0; p < particles.size(); ++p) {
    diag.kinetic_energy += 0.5 * particles.mass[p] * particles.v[p].squaredNorm();
    diag.potential_energy -= particles.mass[p] * scene.gravity.dot(particles.x[p]);
  }
  for (const RigidBody& body : bodies) {
    if (body.kinematic()) continue;
    const Vector6 v = body.spatial_velocity();
    diag.kinetic_energy += 0.5 * v.dot(body.spatial_inertia() * v);
    if (body.gravity) diag.potential_energy -= body.mass * scene.gravity.dot(body.position);
  }

  next.time = t + dt;
  next.step = state->step + 1;
  *state = std::move(next);
  diag.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return diag;
}

/// Owns a scene, its materials and the evolving state.
class Simulation {
 public:
  explicit Simulation(SceneConfig scene) : scene_(std::move(scene)), state_(initial_state(scene_)) {
    for (const MpmBodyConfig& b : scene_.mpm_bodies) models_.push_back(b.model());
  }

  const SceneConfig& scene() const { return scene_; }
  const SystemState& state() const { return state_; }
  SystemState& mutable_state() { return state_; }
  const std::vector<CorotationalModel>& models() const { return models_; }

  StepDiagnostics step() { return convex_mpm::step(&state_, scene_, models_, scene_.dt); }

 private:
  SceneConfig scene_;
  SystemState state_;
  std::vector<CorotationalModel> models_;
};

struct RigidPose {
  Vector3 position = Vector3::Zero();
  Quaternion orientation = Quaternion::Identity();
};

struct Frame {
  int step = 0;
  double time = 0.0;
  std::vector<Vector3> positions;
  std::vector<RigidPose> poses;
};

inline Frame capture_frame(const SystemState& state) {
  Frame f;
  f.step = state.step;
  f.time = state.time;
  f.positions = state.particles.x;
  for (const RigidBody& b : state.bodies) f.poses.push_back({b.position, b.orientation});
  return f;
}

/// Frames every `stride` steps (plus the initial one) and all step diagnostics.
struct Trajectory {
  std::vector<Frame> frames;
  std::vector<StepDiagnostics> diagnostics;
  bool ok = true;
  std::string error;
};

/// Called with the state after each step and its diagnostics.
using StepObserver = std::function<void(const SystemState&, const StepDiagnostics&)>;

/// Runs `steps` steps. A failing step ends the run with ok = false and the
/// partial record.
inline Trajectory run(Simulation& sim, int steps, int stride = 1, const StepObserver& observer = {}) {
  Trajectory traj;
  traj.frames.push_back(capture_frame(sim.state()));
  for (int k = 0; k < steps; ++k) {
    try {
      traj.diagnostics.push_back(sim.step());
    } catch (const std::exception& e) {
      traj.ok = false;
      traj.error = "step " + std::to_string(sim.state().step + 1) + ": " + e.what();
      return traj;
    }
    if (observer) observer(sim.state(), traj.diagnostics.back());
    if (sim.state().step % stride == 0) traj.frames.push_back(capture_frame(sim.state()));
  }
  return traj;
}

}  // namespace convex_mpm
