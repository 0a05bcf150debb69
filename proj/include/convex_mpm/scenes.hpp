#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "convex_mpm/geometry.hpp"
#include "convex_mpm/scene.hpp"

namespace convex_mpm {

namespace scenes {

inline Shape box_shape(const Vector3& half_extents) { return Shape{Box{half_extents}, {}}; }

inline RigidBody kinematic_box(const std::string& name, const Vector3& half_extents,
                               const Vector3& position) {
  RigidBody b;
  b.name = name;
  b.shape = box_shape(half_extents);
  b.actuation = Actuation::kKinematic;
  b.position = position;
  return b;
}

/// Lowest particle height of a body seeded with the scene's lattice.
inline double lowest_particle(const MpmBodyConfig& body, double h) {
  const ParticleSet p = sample_particles(body.shape, h, body.density, body.particles_per_cell);
  double z = p.x.front().z();
  for (const Vector3& x : p.x) z = std::min(z, x.z());
  return z;
}

inline constexpr double kRollingBallSlope = M_PI / 4.0;

/// Elastic ball (r = 0.5 m, E = 1e8 Pa, nu = 0.2, rho = 1000 kg/m^3) released
/// at rest on a slope of 45 degrees. The slope is the plane z = z0 and gravity
/// is tilted instead, so downhill is +x. The plane touches the lowest particle.
inline SceneConfig rolling_ball(double mu) {
  SceneConfig s;
  s.name = "rolling_ball";
  const double g = 9.81;
  s.gravity = Vector3(g * std::sin(kRollingBallSlope), 0.0, -g * std::cos(kRollingBallSlope));
  s.dt = 0.01;
  s.steps = 100;
  s.grid_spacing = 0.2;
  s.default_friction = mu;

  MpmBodyConfig ball;
  ball.name = "ball";
  ball.shape = Shape{Sphere{0.5}, {}};
  ball.shape.pose.translation = Vector3(0.0, 0.0, 0.5);
  ball.density = 1000.0;
  ball.youngs_modulus = 1e8;
  ball.poisson_ratio = 0.2;
  ball.particles_per_cell = 5;
  s.mpm_bodies.push_back(ball);

  RigidBody slope;
  slope.name = "slope";
  slope.shape = Shape{HalfSpace{}, {}};
  slope.actuation = Actuation::kKinematic;
  slope.position = Vector3(0.0, 0.0, lowest_particle(ball, s.grid_spacing));
  s.rigid_bodies.push_back(slope);
  return s;
}

/// Displacement of the center of mass along the slope after time t for a
/// rigid ball, by rolling mode.
inline double rolling_ball_slip_displacement(double mu, double t) {
  const double g = 9.81;
  return 0.5 * g * t * t * (std::sin(kRollingBallSlope) - mu * std::cos(kRollingBallSlope));
}

/// True when friction is large enough for rolling without slip.
inline bool rolling_ball_sticks(double mu) { return mu > 2.0 / 7.0 * std::tan(kRollingBallSlope); }

inline constexpr double kPanelForce = 10.0;  // N

/// Elastic cube (side 0.1 m, 0.4 kg, E = 1e5 Pa, nu = 0.4) squeezed between two
/// panels that may only slide along x, each pushed inward with 10 N. Friction
/// (mu = 0.8) holds the cube against gravity.
inline SceneConfig box_compression() {
  SceneConfig s;
  s.name = "box_compression";
  s.dt = 1e-3;
  s.steps = 1000;
  s.grid_spacing = 0.02;
  s.default_friction = 0.8;
  s.output_stride = 10;

  MpmBodyConfig cube;
  cube.name = "cube";
  cube.shape = box_shape(Vector3::Constant(0.05));
  cube.density = 400.0;
  cube.youngs_modulus = 1e5;
  cube.poisson_ratio = 0.4;
  s.mpm_bodies.push_back(cube);

  // The outer particle layers sit at x = +-0.045; the panels start touching them.
  const Vector3 half(0.01, 0.08, 0.08);
  for (int side : {-1, 1}) {
    RigidBody panel;
    panel.name = side < 0 ? "left_panel" : "right_panel";
    panel.shape = box_shape(half);
    panel.mass = 0.5;
    panel.inertia = shape_unit_inertia(panel.shape, panel.mass);
    panel.locked = {true, true, true, false, true, true};
    panel.position = Vector3(side * (0.045 + half.x()), 0.0, 0.0);
    panel.schedule = {{0.0, Vector3(-side * kPanelForce, 0.0, 0.0), Vector3::Zero()}};
    s.rigid_bodies.push_back(panel);
  }
  return s;
}

/// Grasp-shake schedule parameters.
struct GraspShakeTiming {
  double close_speed = 0.02;  // m/s per panel
  double close_end = 0.2;
  double lift_start = 0.4;
  double lift_speed = 0.1;  // m/s
  double shake_start = 0.7;
  double shake_end = 1.7;
  double shake_amplitude = 0.01;  // m, vertical and lateral
  double shake_frequency = 2.0;   // Hz
};

/// A dense rigid cube held between two elastic cubes (5 cm sides, E = 1e6 Pa,
/// nu = 0.3, mu = 1) by two kinematic panels that close, lift and shake. The
/// rigid cube is 150x as dense as the elastic ones. All three cubes start on
/// a floor. Particles are the only contact partners of rigid bodies, so the
/// rigid cube is carried by an upward force equal to its weight until the
/// lift starts.
inline SceneConfig grasp_shake(const GraspShakeTiming& timing = {}) {
  SceneConfig s;
  s.name = "grasp_shake";
  s.dt = 0.01;
  s.steps = static_cast<int>(std::lround(timing.shake_end / s.dt));
  s.grid_spacing = 0.01;
  s.default_friction = 1.0;

  const double a = 0.025;  // half side of every cube
  const double soft_density = 100.0;
  for (int side : {-1, 1}) {
    MpmBodyConfig cube;
    cube.name = side < 0 ? "left_cube" : "right_cube";
    cube.shape = box_shape(Vector3::Constant(a));
    cube.shape.pose.translation = Vector3(side * 2.0 * a, 0.0, 0.0);
    cube.density = soft_density;
    cube.youngs_modulus = 1e6;
    cube.poisson_ratio = 0.3;
    s.mpm_bodies.push_back(cube);
  }

  RigidBody block;
  block.name = "block";
  block.shape = box_shape(Vector3::Constant(a));
  block.mass = 150.0 * soft_density * 8.0 * a * a * a;
  block.inertia = shape_unit_inertia(block.shape, block.mass);
  block.schedule = {{0.0, -block.mass * s.gravity, Vector3::Zero()},
                    {timing.lift_start, Vector3::Zero(), Vector3::Zero()}};
  s.rigid_bodies.push_back(block);

  // Outer particle layers of the soft cubes sit at x = +-(3a - h/4); the panels
  // start touching them.
  const Vector3 half(0.005, 0.04, 0.04);
  const double outer = 3.0 * a - 0.25 * s.grid_spacing;
  const double w = 2.0 * M_PI * timing.shake_frequency;
  for (int side : {-1, 1}) {
    RigidBody panel = kinematic_box(side < 0 ? "left_panel" : "right_panel", half,
                                    Vector3(side * (outer + half.x()), 0.0, 0.0));
    panel.schedule.push_back({0.0, Vector3(-side * timing.close_speed, 0.0, 0.0), Vector3::Zero()});
    panel.schedule.push_back({timing.close_end, Vector3::Zero(), Vector3::Zero()});
    panel.schedule.push_back({timing.lift_start, Vector3(0.0, 0.0, timing.lift_speed), Vector3::Zero()});
    // Sampled sinusoidal velocity, one segment per step.
    const int n = static_cast<int>(std::lround((timing.shake_end - timing.shake_start) / s.dt));
    for (int k = 0; k < n; ++k) {
      const double tau = (k + 0.5) * s.dt;
      const double v = timing.shake_amplitude * w * std::cos(w * tau);
      panel.schedule.push_back(
          {timing.shake_start + k * s.dt, Vector3(0.0, v, v), Vector3::Zero()});
    }
    s.rigid_bodies.push_back(panel);
  }

  RigidBody floor;
  floor.name = "floor";
  floor.shape = Shape{HalfSpace{}, {}};
  floor.actuation = Actuation::kKinematic;
  floor.position = Vector3(0.0, 0.0, -a);
  s.rigid_bodies.push_back(floor);
  return s;
}

/// Dough-stretch schedule parameters.
struct DoughTiming {
  double pull_speed = 0.1;  // m/s per end
  double pull_end = 0.8;
  double end = 1.0;
};

/// A dough bar (0.12 x 0.03 x 0.03 m, E = 1e5 Pa, nu = 0.4, rho = 1000 kg/m^3)
/// with a 5 mm long neck of 2 x 2 cm section near its middle and a flange of
/// the same dough on each end (0.02 x 0.03 x 0.05 m). A pair of kinematic
/// rods sits behind each flange, above and below the bar, pulls outward and
/// then holds. With yield stress 6e3 Pa the neck flows and tears in two.
/// Without plasticity the tension grows until the flanges slip past the
/// rods, and the bar recoils.
inline SceneConfig dough_stretch(bool plastic = true, const DoughTiming& timing = {}) {
  SceneConfig s;
  s.name = plastic ? "dough_stretch" : "dough_stretch_elastic";
  s.dt = 0.01;
  s.steps = static_cast<int>(std::lround(timing.end / s.dt));
  s.grid_spacing = 0.01;
  s.default_friction = 0.5;

  // Left arm | neck | shoulder | right arm. The shoulder softens the right
  // step so that the left step is the weakest section.
  const double h = s.grid_spacing;
  const Vector3 bar(0.06, 0.015, 0.015);
  const Vector3 neck(0.0025, 0.01, 0.01);
  const Vector3 shoulder(0.25 * h, 0.01, 0.015);
  const Vector3 flange(0.01, 0.015, 0.025);
  MpmBodyConfig dough;
  dough.density = 1000.0;
  dough.youngs_modulus = 1e5;
  dough.poisson_ratio = 0.4;
  if (plastic) dough.yield_stress = 6e3;
  dough.particles_per_cell = 4;
  auto add = [&](const std::string& name, const Vector3& half_extents, double center_x) {
    MpmBodyConfig b = dough;
    b.name = name;
    b.shape = box_shape(half_extents);
    b.shape.pose.translation = Vector3(center_x, 0.0, 0.0);
    s.mpm_bodies.push_back(b);
  };
  const double right_start = neck.x() + 2.0 * shoulder.x();
  add("neck", neck, 0.0);
  add("shoulder", shoulder, neck.x() + shoulder.x());
  add("left_arm", Vector3(0.5 * (bar.x() - neck.x()), bar.y(), bar.z()), -0.5 * (bar.x() + neck.x()));
  add("right_arm", Vector3(0.5 * (bar.x() - right_start), bar.y(), bar.z()), 0.5 * (bar.x() + right_start));
  add("left_flange", flange, -(bar.x() + flange.x()));
  add("right_flange", flange, bar.x() + flange.x());

  // Outer particle layers sit half a particle spacing inside each face. The
  // plates are rods along y that start 0.5 mm short of the flange's inner
  // layer and clear the bar's outer layer in z by 1 mm.
  const double inset = 0.5 * h / dough.particles_per_cell;
  const double r = 0.006;
  const double x = bar.x() + inset - 0.0005 - r;
  const double z = bar.z() - inset + 0.001 + r;
  for (int end : {-1, 1}) {
    for (int side : {-1, 1}) {
      RigidBody b;
      b.name = std::string(end < 0 ? "left" : "right") + (side < 0 ? "_lower" : "_upper");
      b.shape = Shape{Capsule{r, 0.03}, {}};
      b.shape.pose.rotation = Eigen::AngleAxisd(0.5 * M_PI, Vector3::UnitX()).toRotationMatrix();
      b.actuation = Actuation::kKinematic;
      b.position = Vector3(end * x, 0.0, side * z);
      b.schedule.push_back({0.0, Vector3(end * timing.pull_speed, 0.0, 0.0), Vector3::Zero()});
      b.schedule.push_back({timing.pull_end, Vector3::Zero(), Vector3::Zero()});
      s.rigid_bodies.push_back(b);
    }
  }
  return s;
}

}  // namespace scenes

inline std::vector<std::string> builtin_scene_names() {
  return {"rolling_ball",    "rolling_ball_mu0",   "rolling_ball_mu0.2",
          "rolling_ball_mu0.3", "rolling_ball_mu0.6", "box_compression",
          "grasp_shake",     "dough_stretch",      "dough_stretch_elastic"};
}

/// The built-in scene of that name; `rolling_ball` is the mu = 0.6 variant.
inline std::optional<SceneConfig> builtin_scene(const std::string& name) {
  std::optional<SceneConfig> s;
  if (name == "rolling_ball" || name == "rolling_ball_mu0.6") s = scenes::rolling_ball(0.6);
  if (name == "rolling_ball_mu0") s = scenes::rolling_ball(0.0);
  if (name == "rolling_ball_mu0.2") s = scenes::rolling_ball(0.2);
  if (name == "rolling_ball_mu0.3") s = scenes::rolling_ball(0.3);
  if (name == "box_compression") s = scenes::box_compression();
  if (name == "grasp_shake") s = scenes::grasp_shake();
  if (name == "dough_stretch") s = scenes::dough_stretch(true);
  if (name == "dough_stretch_elastic") s = scenes::dough_stretch(false);
  if (s) s->name = name;
  return s;
}

}  // namespace convex_mpm
