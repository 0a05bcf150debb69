#pragma once

#include <cstddef>
#include <vector>

#include "convex_mpm/types.hpp"

namespace convex_mpm {

/// Lagrangian material points, stored as parallel arrays.
///
/// For particle p: position x, velocity v, total deformation gradient F,
/// plastic deformation gradient Fp, affine velocity C (APIC), lagged rotation
/// R0 used by the corotational strain, mass, reference volume and the index of
/// the MPM body (and thus material) the particle was seeded from.
struct ParticleSet {
  std::vector<Vector3> x;
  std::vector<Vector3> v;
  std::vector<Matrix3> F;
  std::vector<Matrix3> Fp;
  std::vector<Matrix3> C;
  std::vector<Matrix3> R0;
  std::vector<double> mass;
  std::vector<double> volume;
  std::vector<int> body;

  std::size_t size() const { return x.size(); }
  bool empty() const { return x.empty(); }

  void reserve(std::size_t n) {
    x.reserve(n);
    v.reserve(n);
    F.reserve(n);
    Fp.reserve(n);
    C.reserve(n);
    R0.reserve(n);
    mass.reserve(n);
    volume.reserve(n);
    body.reserve(n);
  }

  /// Appends an undeformed particle (F = Fp = R0 = I, C = 0).
  void add(const Vector3& position, const Vector3& velocity, double m, double vol,
           int body_index = 0) {
    x.push_back(position);
    v.push_back(velocity);
    F.push_back(Matrix3::Identity());
    Fp.push_back(Matrix3::Identity());
    C.push_back(Matrix3::Zero());
    R0.push_back(Matrix3::Identity());
    mass.push_back(m);
    volume.push_back(vol);
    body.push_back(body_index);
  }

  void append(const ParticleSet& other) {
    x.insert(x.end(), other.x.begin(), other.x.end());
    v.insert(v.end(), other.v.begin(), other.v.end());
    F.insert(F.end(), other.F.begin(), other.F.end());
    Fp.insert(Fp.end(), other.Fp.begin(), other.Fp.end());
    C.insert(C.end(), other.C.begin(), other.C.end());
    R0.insert(R0.end(), other.R0.begin(), other.R0.end());
    mass.insert(mass.end(), other.mass.begin(), other.mass.end());
    volume.insert(volume.end(), other.volume.begin(), other.volume.end());
    body.insert(body.end(), other.body.begin(), other.body.end());
  }

  double total_mass() const {
    double m = 0.0;
    for (double mp : mass) m += mp;
    return m;
  }

  Vector3 total_momentum() const {
    Vector3 p = Vector3::Zero();
    for (std::size_t i = 0; i < size(); ++i) p += mass[i] * v[i];
    return p;
  }

  Vector3 center_of_mass() const {
    Vector3 c = Vector3::Zero();
    for (std::size_t i = 0; i < size(); ++i) c += mass[i] * x[i];
    return c / total_mass();
  }
};

}  // namespace convex_mpm
