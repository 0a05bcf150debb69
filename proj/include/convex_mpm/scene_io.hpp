#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "convex_mpm/scene.hpp"

namespace convex_mpm {

inline constexpr const char* kVersion = "1.0.0";

namespace scene_json {

using Json = nlohmann::json;

inline constexpr std::array<const char*, 6> kDofNames = {"wx", "wy", "wz", "vx", "vy", "vz"};

/// Walks a JSON document and records every error with its path.
class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& message) {
    errors.push_back(path + ": " + message);
  }

  /// Reports keys of `obj` not in `allowed`.
  bool object(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items()) {
      if (!keys.count(key)) fail(path + "." + key, "unknown field");
    }
    return true;
  }

  void number(const Json& obj, const char* key, const std::string& path, double* out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_number()) return fail(path + "." + key, "expected a number");
    *out = v.get<double>();
  }

  void integer(const Json& obj, const char* key, const std::string& path, int* out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_number_integer()) return fail(path + "." + key, "expected an integer");
    *out = v.get<int>();
  }

  void boolean(const Json& obj, const char* key, const std::string& path, bool* out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_boolean()) return fail(path + "." + key, "expected true or false");
    *out = v.get<bool>();
  }

  void string(const Json& obj, const char* key, const std::string& path, std::string* out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_string()) return fail(path + "." + key, "expected a string");
    *out = v.get<std::string>();
  }

  template <int N>
  void vector(const Json& obj, const char* key, const std::string& path,
              Eigen::Matrix<double, N, 1>* out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_array() || v.size() != N) {
      return fail(path + "." + key, "expected an array of " + std::to_string(N) + " numbers");
    }
    for (int i = 0; i < N; ++i) {
      if (!v[i].is_number()) return fail(path + "." + key, "expected numbers");
      (*out)[i] = v[i].get<double>();
    }
  }

  void matrix(const Json& obj, const char* key, const std::string& path, Matrix3* out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    const std::string p = path + "." + key;
    if (!v.is_array() || v.size() != 3) return fail(p, "expected 3 rows of 3 numbers");
    for (int r = 0; r < 3; ++r) {
      if (!v[r].is_array() || v[r].size() != 3) return fail(p, "expected 3 rows of 3 numbers");
      for (int c = 0; c < 3; ++c) {
        if (!v[r][c].is_number()) return fail(p, "expected numbers");
        (*out)(r, c) = v[r][c].get<double>();
      }
    }
  }

  void quaternion(const Json& obj, const char* key, const std::string& path, Quaternion* out) {
    Eigen::Vector4d q(out->w(), out->x(), out->y(), out->z());
    vector<4>(obj, key, path, &q);
    *out = Quaternion(q[0], q[1], q[2], q[3]);
  }

  Shape shape(const Json& j, const std::string& path) {
    Shape s;
    if (!object(j, path, {"type", "radius", "half_length", "half_extents", "position", "rotation"})) {
      return s;
    }
    std::string type;
    string(j, "type", path, &type);
    auto require = [&](const char* key) {
      if (!j.contains(key)) fail(path + "." + key, "required for " + type);
    };
    auto forbid = [&](std::initializer_list<const char*> keys) {
      for (const char* key : keys) {
        if (j.contains(key)) fail(path + "." + key, "not a parameter of " + type);
      }
    };
    if (type == "halfspace") {
      forbid({"radius", "half_length", "half_extents"});
      s.geometry = HalfSpace{};
    } else if (type == "sphere") {
      Sphere g;
      require("radius");
      forbid({"half_length", "half_extents"});
      number(j, "radius", path, &g.radius);
      s.geometry = g;
    } else if (type == "box") {
      Box g;
      require("half_extents");
      forbid({"radius", "half_length"});
      vector<3>(j, "half_extents", path, &g.half_extents);
      s.geometry = g;
    } else if (type == "cylinder" || type == "capsule") {
      double r = 1.0, l = 1.0;
      require("radius");
      require("half_length");
      forbid({"half_extents"});
      number(j, "radius", path, &r);
      number(j, "half_length", path, &l);
      if (type == "cylinder") {
        s.geometry = Cylinder{r, l};
      } else {
        s.geometry = Capsule{r, l};
      }
    } else {
      fail(path + ".type", "expected one of halfspace, sphere, box, cylinder, capsule");
    }
    vector<3>(j, "position", path, &s.pose.translation);
    matrix(j, "rotation", path, &s.pose.rotation);
    return s;
  }

  std::vector<ScheduleSegment> schedule(const Json& j, const std::string& path) {
    std::vector<ScheduleSegment> out;
    if (!j.is_array()) {
      fail(path, "expected an array");
      return out;
    }
    for (std::size_t k = 0; k < j.size(); ++k) {
      const std::string p = path + "[" + std::to_string(k) + "]";
      ScheduleSegment s;
      if (object(j[k], p, {"start", "linear", "angular"})) {
        number(j[k], "start", p, &s.start);
        vector<3>(j[k], "linear", p, &s.linear);
        vector<3>(j[k], "angular", p, &s.angular);
      }
      out.push_back(s);
    }
    return out;
  }

  MpmBodyConfig mpm_body(const Json& j, const std::string& path) {
    MpmBodyConfig b;
    if (!object(j, path, {"name", "shape", "density", "youngs_modulus", "poisson_ratio",
                          "yield_stress", "velocity", "particles_per_cell"})) {
      return b;
    }
    string(j, "name", path, &b.name);
    if (j.contains("shape")) {
      b.shape = shape(j.at("shape"), path + ".shape");
    } else {
      fail(path + ".shape", "required");
    }
    number(j, "density", path, &b.density);
    number(j, "youngs_modulus", path, &b.youngs_modulus);
    number(j, "poisson_ratio", path, &b.poisson_ratio);
    if (j.contains("yield_stress") && !j.at("yield_stress").is_null()) {
      double eta = 0.0;
      number(j, "yield_stress", path, &eta);
      b.yield_stress = eta;
    }
    vector<3>(j, "velocity", path, &b.velocity);
    integer(j, "particles_per_cell", path, &b.particles_per_cell);
    return b;
  }

  RigidBody rigid_body(const Json& j, const std::string& path) {
    RigidBody b;
    if (!object(j, path, {"name", "shape", "actuation", "mass", "density", "inertia", "locked",
                          "gravity", "position", "orientation", "linear_velocity",
                          "angular_velocity", "schedule"})) {
      return b;
    }
    string(j, "name", path, &b.name);
    if (j.contains("shape")) {
      b.shape = shape(j.at("shape"), path + ".shape");
    } else {
      fail(path + ".shape", "required");
    }
    std::string actuation = "free";
    string(j, "actuation", path, &actuation);
    if (actuation == "kinematic") {
      b.actuation = Actuation::kKinematic;
    } else if (actuation != "free") {
      fail(path + ".actuation", "expected free or kinematic");
    }
    if (j.contains("mass") && j.contains("density")) {
      fail(path + ".density", "give either mass or density, not both");
    }
    number(j, "mass", path, &b.mass);
    if (j.contains("density")) {
      double rho = 0.0;
      number(j, "density", path, &rho);
      if (!(rho > 0.0)) fail(path + ".density", "must be > 0");
      if (b.shape.bounded()) b.mass = rho * shape_volume(b.shape);
    }
    if (j.contains("inertia")) {
      matrix(j, "inertia", path, &b.inertia);
    } else if (b.shape.bounded()) {
      const Matrix3& R = b.shape.pose.rotation;
      b.inertia = R * shape_unit_inertia(b.shape, b.mass) * R.transpose();
    }
    if (j.contains("locked")) {
      const Json& l = j.at("locked");
      if (!l.is_array()) {
        fail(path + ".locked", "expected an array of DoF names");
      } else {
        for (const Json& name : l) {
          bool found = false;
          for (int k = 0; k < 6; ++k) {
            if (name.is_string() && name.get<std::string>() == kDofNames[k]) {
              b.locked[k] = true;
              found = true;
            }
          }
          if (!found) fail(path + ".locked", "expected names among wx wy wz vx vy vz");
        }
      }
    }
    boolean(j, "gravity", path, &b.gravity);
    vector<3>(j, "position", path, &b.position);
    quaternion(j, "orientation", path, &b.orientation);
    vector<3>(j, "linear_velocity", path, &b.linear_velocity);
    vector<3>(j, "angular_velocity", path, &b.angular_velocity);
    if (j.contains("schedule")) b.schedule = schedule(j.at("schedule"), path + ".schedule");
    return b;
  }

  SceneConfig scene(const Json& j) {
    SceneConfig s;
    if (!object(j, "scene", {"name", "gravity", "dt", "steps", "grid_spacing", "mpm_bodies",
                             "rigid_bodies", "default_friction", "friction", "contact", "tolerance",
                             "max_solver_iterations", "output_stride"})) {
      return s;
    }
    string(j, "name", "scene", &s.name);
    vector<3>(j, "gravity", "scene", &s.gravity);
    number(j, "dt", "scene", &s.dt);
    integer(j, "steps", "scene", &s.steps);
    number(j, "grid_spacing", "scene", &s.grid_spacing);
    number(j, "default_friction", "scene", &s.default_friction);
    number(j, "tolerance", "scene", &s.tolerance);
    integer(j, "max_solver_iterations", "scene", &s.max_solver_iterations);
    integer(j, "output_stride", "scene", &s.output_stride);
    if (j.contains("contact")) {
      const Json& c = j.at("contact");
      if (object(c, "contact", {"stabilization", "near_rigid", "tangential_ratio",
                                "max_stabilization_velocity"})) {
        number(c, "stabilization", "contact", &s.contact.stabilization);
        number(c, "near_rigid", "contact", &s.contact.near_rigid);
        number(c, "tangential_ratio", "contact", &s.contact.tangential_ratio);
        number(c, "max_stabilization_velocity", "contact", &s.contact.max_stabilization_velocity);
      }
    }
    auto each = [&](const char* key, auto&& fn) {
      if (!j.contains(key)) return;
      const Json& a = j.at(key);
      if (!a.is_array()) return fail(std::string(key), "expected an array");
      for (std::size_t k = 0; k < a.size(); ++k) fn(a[k], std::string(key) + "[" + std::to_string(k) + "]");
    };
    each("mpm_bodies", [&](const Json& b, const std::string& p) { s.mpm_bodies.push_back(mpm_body(b, p)); });
    each("rigid_bodies", [&](const Json& b, const std::string& p) { s.rigid_bodies.push_back(rigid_body(b, p)); });
    each("friction", [&](const Json& f, const std::string& p) {
      FrictionPair pair;
      if (object(f, p, {"mpm_body", "rigid_body", "mu"})) {
        string(f, "mpm_body", p, &pair.mpm_body);
        string(f, "rigid_body", p, &pair.rigid_body);
        number(f, "mu", p, &pair.mu);
      }
      s.friction.push_back(pair);
    });
    return s;
  }
};

inline Json to_json(const Vector3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Json to_json(const Matrix3& m) {
  Json rows = Json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(Json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

inline Json to_json(const Shape& s) {
  Json j;
  j["type"] = s.type_name();
  std::visit(
      [&](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, Sphere>) {
          j["radius"] = g.radius;
        } else if constexpr (std::is_same_v<G, Box>) {
          j["half_extents"] = to_json(g.half_extents);
        } else if constexpr (std::is_same_v<G, Cylinder> || std::is_same_v<G, Capsule>) {
          j["radius"] = g.radius;
          j["half_length"] = g.half_length;
        }
      },
      s.geometry);
  j["position"] = to_json(s.pose.translation);
  j["rotation"] = to_json(s.pose.rotation);
  return j;
}

}  // namespace scene_json

/// Serializes a scene; every field is written explicitly.
inline nlohmann::json scene_to_json(const SceneConfig& s) {
  using scene_json::Json;
  using scene_json::to_json;
  Json j;
  j["name"] = s.name;
  j["gravity"] = to_json(s.gravity);
  j["dt"] = s.dt;
  j["steps"] = s.steps;
  j["grid_spacing"] = s.grid_spacing;
  j["default_friction"] = s.default_friction;
  j["tolerance"] = s.tolerance;
  j["max_solver_iterations"] = s.max_solver_iterations;
  j["output_stride"] = s.output_stride;
  j["contact"] = {{"stabilization", s.contact.stabilization},
                  {"near_rigid", s.contact.near_rigid},
                  {"tangential_ratio", s.contact.tangential_ratio},
                  {"max_stabilization_velocity", s.contact.max_stabilization_velocity}};
  j["mpm_bodies"] = Json::array();
  for (const MpmBodyConfig& b : s.mpm_bodies) {
    Json o;
    o["name"] = b.name;
    o["shape"] = to_json(b.shape);
    o["density"] = b.density;
    o["youngs_modulus"] = b.youngs_modulus;
    o["poisson_ratio"] = b.poisson_ratio;
    o["yield_stress"] = b.yield_stress ? Json(*b.yield_stress) : Json(nullptr);
    o["velocity"] = to_json(b.velocity);
    o["particles_per_cell"] = b.particles_per_cell;
    j["mpm_bodies"].push_back(o);
  }
  j["rigid_bodies"] = Json::array();
  for (const RigidBody& b : s.rigid_bodies) {
    Json o;
    o["name"] = b.name;
    o["shape"] = to_json(b.shape);
    o["actuation"] = b.kinematic() ? "kinematic" : "free";
    o["mass"] = b.mass;
    o["inertia"] = to_json(b.inertia);
    Json locked = Json::array();
    for (int k = 0; k < 6; ++k) {
      if (b.locked[k]) locked.push_back(scene_json::kDofNames[k]);
    }
    o["locked"] = locked;
    o["gravity"] = b.gravity;
    o["position"] = to_json(b.position);
    o["orientation"] = Json::array({b.orientation.w(), b.orientation.x(), b.orientation.y(), b.orientation.z()});
    o["linear_velocity"] = to_json(b.linear_velocity);
    o["angular_velocity"] = to_json(b.angular_velocity);
    Json sched = Json::array();
    for (const ScheduleSegment& seg : b.schedule) {
      sched.push_back({{"start", seg.start}, {"linear", to_json(seg.linear)}, {"angular", to_json(seg.angular)}});
    }
    o["schedule"] = sched;
    j["rigid_bodies"].push_back(o);
  }
  j["friction"] = Json::array();
  for (const FrictionPair& p : s.friction) {
    j["friction"].push_back({{"mpm_body", p.mpm_body}, {"rigid_body", p.rigid_body}, {"mu", p.mu}});
  }
  return j;
}

inline std::string serialize_scene(const SceneConfig& s) { return scene_to_json(s).dump(2) + "\n"; }

/// Parses and validates a scene. Throws ConfigError listing every problem
/// found, both schema and physics.
inline SceneConfig parse_scene_json(const nlohmann::json& j) {
  scene_json::Reader reader;
  SceneConfig scene = reader.scene(j);
  std::vector<std::string> errors = reader.errors;
  for (const std::string& e : scene.errors()) errors.push_back(e);
  if (!errors.empty()) {
    std::ostringstream os;
    os << "invalid scene:";
    for (const std::string& e : errors) os << "\n  " << e;
    throw ConfigError(os.str());
  }
  return scene;
}

inline SceneConfig parse_scene_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed scene file: ") + e.what());
  }
  return parse_scene_json(j);
}

inline SceneConfig parse_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scene_string(buffer.str());
}

}  // namespace convex_mpm
