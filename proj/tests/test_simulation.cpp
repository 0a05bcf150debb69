#include <gtest/gtest.h>

#include "convex_mpm/scenes.hpp"
#include "convex_mpm/simulation.hpp"
#include "oracles.hpp"

namespace {

using namespace convex_mpm;

RigidBody floor_body() {
  RigidBody b;
  b.name = "floor";
  b.shape = Shape{HalfSpace{}, {}};
  b.actuation = Actuation::kKinematic;
  return b;
}

MpmBodyConfig cube(double half, const Vector3& center, double h_fraction_k = 2) {
  MpmBodyConfig b;
  b.name = "cube";
  b.shape = Shape{Box{Vector3::Constant(half)}, {}};
  b.shape.pose.translation = center;
  b.density = 1000.0;
  b.youngs_modulus = 1e5;
  b.poisson_ratio = 0.3;
  b.particles_per_cell = static_cast<int>(h_fraction_k);
  return b;
}

void expect_solver_invariants(const StepDiagnostics& d) {
  EXPECT_TRUE(d.cholesky_ok);
  EXPECT_TRUE(d.free_motion_converged);
  EXPECT_TRUE(d.sap_monotone);
  EXPECT_TRUE(d.cone_feasible);
  if (d.num_nodes > 0) {
    EXPECT_EQ(d.newton_iterations, d.num_particles > 0 ? 1 : 0);
  }
}

TEST(Step, RigidOnlyFreeFall) {
  SceneConfig s;
  RigidBody ball;
  ball.name = "ball";
  ball.shape = Shape{Sphere{0.1}, {}};
  ball.mass = 1.0;
  ball.inertia = shape_unit_inertia(ball.shape, 1.0);
  ball.position = Vector3(0.0, 0.0, 10.0);
  ball.linear_velocity = Vector3(1.0, 0.0, 2.0);
  s.rigid_bodies.push_back(ball);
  s.dt = 0.01;
  Simulation sim(s);
  EXPECT_TRUE(sim.state().particles.empty());
  const double g = 9.81;
  for (int n = 1; n <= 100; ++n) {
    const StepDiagnostics d = sim.step();
    EXPECT_EQ(d.num_nodes, 0);
    EXPECT_EQ(d.num_contacts, 0);
    const double t = n * s.dt;
    const Vector3 analytic(t, 0.0, 10.0 + 2.0 * t - 0.5 * g * t * t);
    const Vector3 x = sim.state().bodies[0].position;
    // Symplectic Euler lags the parabola by g dt t / 2.
    EXPECT_NEAR(x.x(), analytic.x(), 1e-12);
    EXPECT_NEAR(x.z() - analytic.z(), -0.5 * g * s.dt * t, 1e-10);
    EXPECT_LE((x - analytic).norm(), g * s.dt * t);
  }
}

TEST(Step, MpmFreeFallFollowsParabola) {
  SceneConfig s;
  s.grid_spacing = 0.05;
  s.mpm_bodies.push_back(cube(0.05, Vector3(0.0, 0.0, 1.0)));
  s.mpm_bodies[0].velocity = Vector3(0.5, -0.2, 1.0);
  s.dt = 0.01;
  Simulation sim(s);
  const Vector3 c0 = sim.state().particles.center_of_mass();
  const Vector3 v0 = s.mpm_bodies[0].velocity;
  for (int n = 1; n <= 50; ++n) {
    const StepDiagnostics d = sim.step();
    expect_solver_invariants(d);
    const double t = n * s.dt;
    const Vector3 expected = c0 + v0 * t + s.gravity * s.dt * s.dt * (0.5 * n * (n + 1));
    const Vector3 c = sim.state().particles.center_of_mass();
    EXPECT_LE((c - expected).norm(), 1e-10 * expected.norm());
    // Uniform acceleration keeps every particle at the same velocity.
    const Vector3 v = v0 + n * s.dt * s.gravity;
    for (const Vector3& vp : sim.state().particles.v) EXPECT_LE((vp - v).norm(), 1e-10);
  }
}

TEST(Step, ZeroStepsRecordsInitialFrame) {
  SceneConfig s;
  s.mpm_bodies.push_back(cube(0.05, Vector3(0.0, 0.0, 1.0)));
  s.grid_spacing = 0.05;
  Simulation sim(s);
  const Trajectory t = run(sim, 0);
  EXPECT_TRUE(t.ok);
  EXPECT_EQ(t.frames.size(), 1u);
  EXPECT_TRUE(t.diagnostics.empty());
}

TEST(Step, SingleParticleRestingImpulse) {
  SceneConfig s;
  s.grid_spacing = 0.1;
  s.dt = 0.01;
  s.default_friction = 2.0;
  // One lattice particle per cell.
  MpmBodyConfig b = cube(0.05, Vector3(0.05, 0.05, 0.05), 1);
  s.mpm_bodies.push_back(b);
  RigidBody floor = floor_body();
  floor.position = Vector3(0.0, 0.0, 0.05);
  s.rigid_bodies.push_back(floor);
  Simulation sim(s);
  ASSERT_EQ(sim.state().particles.size(), 1u);
  const double m = sim.state().particles.mass[0];
  StepDiagnostics last;
  for (int k = 0; k < 100; ++k) {
    last = sim.step();
    expect_solver_invariants(last);
  }
  ASSERT_EQ(last.num_contacts, 1);
  const double gamma_n = last.body_force[0].norm() * s.dt;
  EXPECT_NEAR(gamma_n, m * 9.81 * s.dt, 0.01 * m * 9.81 * s.dt);
  // Force on the floor points down, into it.
  EXPECT_LT(last.body_force[0].z(), 0.0);
}

TEST(Step, ElasticCubeRestsOnFloor) {
  SceneConfig s;
  s.grid_spacing = 0.05;
  s.dt = 0.01;
  s.steps = 200;
  s.mpm_bodies.push_back(cube(0.1, Vector3(0.0, 0.0, 0.1)));
  s.rigid_bodies.push_back(floor_body());
  Simulation sim(s);
  const double weight = sim.state().particles.total_mass() * 9.81;
  std::vector<StepDiagnostics> diags;
  for (int k = 0; k < s.steps; ++k) {
    diags.push_back(sim.step());
    expect_solver_invariants(diags.back());
  }
  double penetration_at_100 = diags[99].max_penetration;
  double worst_late = 0.0;
  for (int k = 100; k < 200; ++k) worst_late = std::max(worst_late, diags[k].max_penetration);
  EXPECT_LE(worst_late, 1.05 * penetration_at_100 + 1e-6);
  // Contact impulse balances gravity each step.
  for (int k = 150; k < 200; ++k) {
    EXPECT_NEAR(-diags[k].body_force[0].z(), weight, 0.01 * weight) << "step " << k;
  }
}

TEST(Step, TransactionalOnFailure) {
  SceneConfig s;
  s.grid_spacing = 0.05;
  s.mpm_bodies.push_back(cube(0.1, Vector3(0.0, 0.0, 0.08)));
  s.rigid_bodies.push_back(floor_body());
  s.max_solver_iterations = 1;
  s.tolerance = 1e-12;
  Simulation sim(s);
  const SystemState before = sim.state();
  EXPECT_THROW(sim.step(), SolverError);
  const SystemState& after = sim.state();
  EXPECT_EQ(after.step, before.step);
  EXPECT_EQ(after.time, before.time);
  EXPECT_EQ(after.particles.x, before.particles.x);
  EXPECT_EQ(after.particles.v, before.particles.v);
  EXPECT_EQ(after.particles.F, before.particles.F);
  EXPECT_EQ(after.bodies, before.bodies);

  Simulation sim2(s);
  const Trajectory t = run(sim2, 5);
  EXPECT_FALSE(t.ok);
  EXPECT_NE(t.error.find("step 1"), std::string::npos);
  EXPECT_EQ(t.frames.size(), 1u);
}

TEST(Step, DeterministicAcrossRuns) {
  SceneConfig s = scenes::box_compression();
  s.steps = 20;
  Simulation a(s), b(s);
  const Trajectory ta = run(a, s.steps);
  const Trajectory tb = run(b, s.steps);
  ASSERT_TRUE(ta.ok);
  ASSERT_EQ(ta.frames.size(), tb.frames.size());
  for (std::size_t k = 0; k < ta.frames.size(); ++k) {
    EXPECT_EQ(ta.frames[k].positions, tb.frames[k].positions);
    for (std::size_t j = 0; j < ta.frames[k].poses.size(); ++j) {
      EXPECT_EQ(ta.frames[k].poses[j].position, tb.frames[k].poses[j].position);
      EXPECT_EQ(ta.frames[k].poses[j].orientation.coeffs(), tb.frames[k].poses[j].orientation.coeffs());
    }
  }
  for (std::size_t k = 0; k < ta.diagnostics.size(); ++k) {
    EXPECT_EQ(ta.diagnostics[k].body_force, tb.diagnostics[k].body_force);
    EXPECT_EQ(ta.diagnostics[k].sap_iterations, tb.diagnostics[k].sap_iterations);
  }
}

TEST(Step, StrideControlsFrameCount) {
  SceneConfig s;
  s.grid_spacing = 0.05;
  s.mpm_bodies.push_back(cube(0.05, Vector3(0.0, 0.0, 1.0)));
  Simulation sim(s);
  const Trajectory t = run(sim, 12, 4);
  EXPECT_EQ(t.frames.size(), 12u / 4u + 1u);
  EXPECT_EQ(t.frames.back().step, 12);
}

TEST(Step, KinematicPanelPushesCube) {
  SceneConfig s;
  s.grid_spacing = 0.05;
  s.gravity = Vector3::Zero();
  s.mpm_bodies.push_back(cube(0.05, Vector3::Zero()));
  RigidBody panel;
  panel.name = "panel";
  panel.shape = Shape{Box{Vector3(0.02, 0.1, 0.1)}, {}};
  panel.actuation = Actuation::kKinematic;
  panel.position = Vector3(-0.07, 0.0, 0.0);
  panel.schedule = {{0.0, Vector3(0.5, 0.0, 0.0), Vector3::Zero()}};
  s.rigid_bodies.push_back(panel);
  Simulation sim(s);
  for (int k = 0; k < 20; ++k) expect_solver_invariants(sim.step());
  EXPECT_NEAR(sim.state().bodies[0].position.x(), -0.07 + 20 * s.dt * 0.5, 1e-12);
  EXPECT_GT(sim.state().particles.total_momentum().x(), 0.0);
}

}  // namespace
