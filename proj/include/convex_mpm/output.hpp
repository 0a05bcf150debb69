#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "convex_mpm/scene_io.hpp"
#include "convex_mpm/simulation.hpp"

namespace convex_mpm {

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

/// Writes a run to a directory:
///
///   frame_NNNNNN.bin     one ASCII header line, then count x 3 doubles (x, y, z)
///   snapshot_NNNNNN.bin  optional; header, then per particle x, v, F, Fp, C, R0
///                        (3 + 3 + 4 * 9 doubles, matrices column-major)
///   rigid_poses.csv      time, body, position, quaternion (w, x, y, z)
///   diagnostics.csv      one row per step
///   scene.json           the scene that was run
///
/// Every file starts with a header naming the scene, dt and format version.
/// Doubles are native-endian.
class TrajectoryWriter {
 public:
  TrajectoryWriter(std::filesystem::path dir, const SceneConfig& scene, bool snapshots)
      : dir_(std::move(dir)), scene_(scene), snapshots_(snapshots) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) {
      throw ConfigError("cannot create output directory '" + dir_.string() + "'");
    }
    poses_.open(dir_ / "rigid_poses.csv");
    diagnostics_.open(dir_ / "diagnostics.csv");
    std::ofstream scene_file(dir_ / "scene.json");
    if (!poses_ || !diagnostics_ || !scene_file) {
      throw ConfigError("output directory '" + dir_.string() + "' is not writable");
    }
    scene_file << serialize_scene(scene_);
    poses_ << "# " << header() << "\n";
    poses_ << "time,body,px,py,pz,qw,qx,qy,qz\n";
    diagnostics_ << "# " << header() << "\n";
    diagnostics_ << "step,time,particles,nodes,contacts,participating_dofs,newton_iterations,"
                    "sap_iterations,sap_optimality,inactive,stiction,sliding,max_penetration,"
                    "kinetic_energy,potential_energy,inverted,plastic_projections,plastic_skipped";
    for (const RigidBody& b : scene_.rigid_bodies) {
      diagnostics_ << "," << b.name << "_fx," << b.name << "_fy," << b.name << "_fz," << b.name
                   << "_slip";
    }
    diagnostics_ << "\n";
  }

  std::string header() const {
    const Vector3& g = scene_.gravity;
    return "convex_mpm version=" + std::string(kVersion) + " scene=" + scene_.name +
           " dt=" + format_double(scene_.dt) + " gravity=" + format_double(g.x()) + "," +
           format_double(g.y()) + "," + format_double(g.z());
  }

  void write_frame(const SystemState& state) {
    const std::string index = frame_index();
    const ParticleSet& p = state.particles;
    {
      std::ofstream out(dir_ / ("frame_" + index + ".bin"), std::ios::binary);
      out << header() << " frame=" << frames_ << " step=" << state.step
          << " time=" << format_double(state.time) << " count=" << p.size() << "\n";
      for (const Vector3& x : p.x) out.write(reinterpret_cast<const char*>(x.data()), 3 * sizeof(double));
      if (!out) throw ConfigError("failed writing frame to '" + dir_.string() + "'");
    }
    if (snapshots_) {
      std::ofstream out(dir_ / ("snapshot_" + index + ".bin"), std::ios::binary);
      out << header() << " frame=" << frames_ << " step=" << state.step
          << " time=" << format_double(state.time) << " count=" << p.size()
          << " layout=x,v,F,Fp,C,R0\n";
      for (std::size_t i = 0; i < p.size(); ++i) {
        out.write(reinterpret_cast<const char*>(p.x[i].data()), 3 * sizeof(double));
        out.write(reinterpret_cast<const char*>(p.v[i].data()), 3 * sizeof(double));
        for (const Matrix3* m : {&p.F[i], &p.Fp[i], &p.C[i], &p.R0[i]}) {
          out.write(reinterpret_cast<const char*>(m->data()), 9 * sizeof(double));
        }
      }
      if (!out) throw ConfigError("failed writing snapshot to '" + dir_.string() + "'");
    }
    for (const RigidBody& b : state.bodies) {
      const Quaternion& q = b.orientation;
      poses_ << format_double(state.time) << "," << b.name << "," << format_double(b.position.x())
             << "," << format_double(b.position.y()) << "," << format_double(b.position.z()) << ","
             << format_double(q.w()) << "," << format_double(q.x()) << "," << format_double(q.y())
             << "," << format_double(q.z()) << "\n";
    }
    ++frames_;
  }

  void write_diagnostics(const StepDiagnostics& d) {
    diagnostics_ << d.step << "," << format_double(d.time) << "," << d.num_particles << ","
                 << d.num_nodes << "," << d.num_contacts << "," << d.participating_dofs << ","
                 << d.newton_iterations << "," << d.sap_iterations << ","
                 << format_double(d.sap_optimality) << "," << d.regimes[0] << "," << d.regimes[1]
                 << "," << d.regimes[2] << "," << format_double(d.max_penetration) << ","
                 << format_double(d.kinetic_energy) << "," << format_double(d.potential_energy)
                 << "," << d.inverted_particles << "," << d.plastic_projections << ","
                 << d.plastic_skipped;
    for (std::size_t b = 0; b < d.body_force.size(); ++b) {
      diagnostics_ << "," << format_double(d.body_force[b].x()) << ","
                   << format_double(d.body_force[b].y()) << "," << format_double(d.body_force[b].z())
                   << "," << format_double(d.body_slip[b]);
    }
    diagnostics_ << "\n";
  }

  int frames_written() const { return frames_; }

  void flush() {
    poses_.flush();
    diagnostics_.flush();
  }

 private:
  std::string frame_index() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06d", frames_);
    return buf;
  }

  std::filesystem::path dir_;
  SceneConfig scene_;
  bool snapshots_ = false;
  std::ofstream poses_;
  std::ofstream diagnostics_;
  int frames_ = 0;
};

/// Reads the positions of a particle frame file.
inline std::vector<Vector3> read_frame(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open frame '" + path.string() + "'");
  std::string header;
  std::getline(in, header);
  const auto pos = header.find(" count=");
  if (pos == std::string::npos) throw ConfigError("frame '" + path.string() + "' has no count");
  const std::size_t count = std::stoull(header.substr(pos + 7));
  std::vector<Vector3> x(count);
  for (Vector3& p : x) in.read(reinterpret_cast<char*>(p.data()), 3 * sizeof(double));
  if (!in) throw ConfigError("frame '" + path.string() + "' is truncated");
  return x;
}

}  // namespace convex_mpm
