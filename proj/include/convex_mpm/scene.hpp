#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "convex_mpm/contact.hpp"
#include "convex_mpm/corotational.hpp"
#include "convex_mpm/geometry.hpp"
#include "convex_mpm/rigid_body.hpp"
#include "convex_mpm/types.hpp"

namespace convex_mpm {

/// A deformable body seeded with particles at scene construction.
struct MpmBodyConfig {
  std::string name;
  Shape shape;
  double density = 1000.0;        // kg/m^3
  double youngs_modulus = 1e5;    // Pa
  double poisson_ratio = 0.3;
  std::optional<double> yield_stress;  // Pa; plasticity off when empty
  Vector3 velocity = Vector3::Zero();
  int particles_per_cell = 2;          // per grid-cell axis

  bool operator==(const MpmBodyConfig&) const = default;

  CorotationalModel model() const {
    CorotationalModel m;
    m.lame = LameParameters::from_young_poisson(youngs_modulus, poisson_ratio);
    m.plastic = yield_stress ? PlasticParameters::von_mises(*yield_stress) : PlasticParameters::none();
    return m;
  }
};

/// Friction coefficient between one MPM body and one rigid body, by name.
struct FrictionPair {
  std::string mpm_body;
  std::string rigid_body;
  double mu = 0.0;

  bool operator==(const FrictionPair&) const = default;
};

struct SceneConfig {
  std::string name = "scene";
  Vector3 gravity = Vector3(0.0, 0.0, -9.81);  // m/s^2
  double dt = 0.01;                            // s
  int steps = 100;
  double grid_spacing = 0.1;  // m
  std::vector<MpmBodyConfig> mpm_bodies;
  std::vector<RigidBody> rigid_bodies;
  double default_friction = 0.5;
  std::vector<FrictionPair> friction;
  ContactParameters contact;
  double tolerance = 1e-6;  // relative, both stages
  int max_solver_iterations = 200;
  int output_stride = 1;

  bool operator==(const SceneConfig&) const = default;

  /// Every problem with the configuration, each prefixed by the field path.
  std::vector<std::string> errors() const {
    std::vector<std::string> out;
    auto check = [&](bool ok, const std::string& field, const std::string& message) {
      if (!ok) out.push_back(field + ": " + message);
    };
    auto guarded = [&](const std::string& field, auto&& fn) {
      try {
        fn();
      } catch (const ConfigError& e) {
        out.push_back(field + ": " + e.what());
      }
    };
    check(gravity.allFinite(), "gravity", "must be finite");
    check(dt > 0.0 && std::isfinite(dt), "dt", "must be > 0");
    check(steps >= 0, "steps", "must be >= 0");
    check(grid_spacing > 0.0 && std::isfinite(grid_spacing), "grid_spacing", "must be > 0");
    check(default_friction >= 0.0, "default_friction", "friction coefficient must be >= 0");
    check(contact.stabilization >= 0.0, "contact.stabilization", "must be >= 0");
    check(contact.near_rigid > 0.0, "contact.near_rigid", "must be > 0");
    check(contact.tangential_ratio > 0.0, "contact.tangential_ratio", "must be > 0");
    check(contact.max_stabilization_velocity > 0.0, "contact.max_stabilization_velocity",
          "must be > 0");
    check(tolerance > 0.0 && tolerance < 1.0, "tolerance", "must be in (0, 1)");
    check(max_solver_iterations >= 1, "max_solver_iterations", "must be >= 1");
    check(output_stride >= 1, "output_stride", "must be >= 1");

    std::map<std::string, int> mpm_names, rigid_names;
    for (std::size_t i = 0; i < mpm_bodies.size(); ++i) {
      const MpmBodyConfig& b = mpm_bodies[i];
      const std::string f = "mpm_bodies[" + std::to_string(i) + "]";
      check(!mpm_names.count(b.name), f + ".name", "duplicate name '" + b.name + "'");
      mpm_names[b.name] = static_cast<int>(i);
      guarded(f + ".shape", [&] { b.shape.validate(); });
      check(b.shape.bounded(), f + ".shape", "must be bounded");
      check(b.density > 0.0, f + ".density", "must be > 0");
      check(b.particles_per_cell >= 1, f + ".particles_per_cell", "must be >= 1");
      check(b.velocity.allFinite(), f + ".velocity", "must be finite");
      guarded(f, [&] { b.model(); });
    }
    for (std::size_t i = 0; i < rigid_bodies.size(); ++i) {
      const RigidBody& b = rigid_bodies[i];
      const std::string f = "rigid_bodies[" + std::to_string(i) + "]";
      check(!rigid_names.count(b.name), f + ".name", "duplicate name '" + b.name + "'");
      rigid_names[b.name] = static_cast<int>(i);
      guarded(f, [&] { b.validate(); });
      check(std::abs(b.orientation.norm() - 1.0) <= 1e-9, f + ".orientation",
            "quaternion must have unit norm");
      for (std::size_t k = 1; k < b.schedule.size(); ++k) {
        check(b.schedule[k].start > b.schedule[k - 1].start,
              f + ".schedule[" + std::to_string(k) + "].start", "breakpoints must increase");
      }
    }
    for (std::size_t i = 0; i < friction.size(); ++i) {
      const FrictionPair& p = friction[i];
      const std::string f = "friction[" + std::to_string(i) + "]";
      check(mpm_names.count(p.mpm_body) > 0, f + ".mpm_body", "unknown body '" + p.mpm_body + "'");
      check(rigid_names.count(p.rigid_body) > 0, f + ".rigid_body",
            "unknown body '" + p.rigid_body + "'");
      check(p.mu >= 0.0, f + ".mu", "friction coefficient must be >= 0");
    }
    return out;
  }

  /// Throws ConfigError listing every problem.
  void validate() const {
    const std::vector<std::string> errs = errors();
    if (errs.empty()) return;
    std::ostringstream os;
    os << "invalid scene '" << name << "':";
    for (const std::string& e : errs) os << "\n  " << e;
    throw ConfigError(os.str());
  }

  FrictionTable friction_table() const {
    FrictionTable table;
    table.default_mu = default_friction;
    for (const FrictionPair& p : friction) {
      int a = -1, b = -1;
      for (std::size_t i = 0; i < mpm_bodies.size(); ++i) {
        if (mpm_bodies[i].name == p.mpm_body) a = static_cast<int>(i);
      }
      for (std::size_t i = 0; i < rigid_bodies.size(); ++i) {
        if (rigid_bodies[i].name == p.rigid_body) b = static_cast<int>(i);
      }
      table.pairs[{a, b}] = p.mu;
    }
    return table;
  }
};

}  // namespace convex_mpm
