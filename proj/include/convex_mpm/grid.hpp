#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "convex_mpm/particles.hpp"
#include "convex_mpm/types.hpp"

namespace convex_mpm {

/// Number of grid nodes in the support of a quadratic B-spline particle.
inline constexpr int kStencilSize = 27;

/// Packs a node coordinate into a 64-bit key; each axis must lie in [-2^20, 2^20).
inline std::uint64_t node_key(const Vector3i& c) {
  constexpr std::int64_t offset = 1 << 20;
  const auto u = [](int v) { return static_cast<std::uint64_t>(v + offset) & 0x1FFFFFu; };
  return (u(c.x()) << 42) | (u(c.y()) << 21) | u(c.z());
}

/// Interpolation data for one particle: tensor-product quadratic B-spline
/// weights and gradients over the 3x3x3 nodes starting at `base`.
/// Entry a = (dx * 3 + dy) * 3 + dz refers to node base + (dx, dy, dz).
struct KernelStencil {
  Vector3i base = Vector3i::Zero();
  std::array<double, kStencilSize> w{};
  std::array<Vector3, kStencilSize> grad{};
  /// Index of each stencil node in the owning grid, or -1 when the node was pruned.
  std::array<int, kStencilSize> node{};

  static Vector3i offset(int a) { return Vector3i(a / 9, (a / 3) % 3, a % 3); }
  Vector3i coordinate(int a) const { return base + offset(a); }
};

/// Quadratic B-spline stencil of a particle at `x` on a grid of spacing `h`.
inline KernelStencil compute_stencil(const Vector3& x, double h) {
  KernelStencil s;
  std::array<std::array<double, 3>, 3> w1{};
  std::array<std::array<double, 3>, 3> dw1{};
  for (int a = 0; a < 3; ++a) {
    const double xs = x[a] / h;
    const int base = static_cast<int>(std::floor(xs - 0.5));
    const double fx = xs - base;  // in [0.5, 1.5)
    s.base[a] = base;
    w1[a] = {0.5 * (1.5 - fx) * (1.5 - fx), 0.75 - (fx - 1.0) * (fx - 1.0),
             0.5 * (fx - 0.5) * (fx - 0.5)};
    dw1[a] = {(fx - 1.5) / h, -2.0 * (fx - 1.0) / h, (fx - 0.5) / h};
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        const int a = (i * 3 + j) * 3 + k;
        s.w[a] = w1[0][i] * w1[1][j] * w1[2][k];
        s.grad[a] = Vector3(dw1[0][i] * w1[1][j] * w1[2][k], w1[0][i] * dw1[1][j] * w1[2][k],
                            w1[0][i] * w1[1][j] * dw1[2][k]);
      }
    }
  }
  s.node.fill(-1);
  return s;
}

/// Active Eulerian nodes with lumped mass and velocity.
///
/// Nodes are stored in lexicographic order of their integer coordinate, so
/// iteration (and therefore every assembled system) is deterministic.
class SparseGrid {
 public:
  SparseGrid() = default;
  explicit SparseGrid(double h) : h_(h) {}

  double spacing() const { return h_; }
  int num_nodes() const { return static_cast<int>(coords_.size()); }
  bool empty() const { return coords_.empty(); }

  const std::vector<Vector3i>& coordinates() const { return coords_; }
  const Vector3i& coordinate(int i) const { return coords_[i]; }
  Vector3 position(int i) const { return h_ * coords_[i].cast<double>(); }

  std::vector<double>& mass() { return mass_; }
  const std::vector<double>& mass() const { return mass_; }
  std::vector<Vector3>& velocity() { return velocity_; }
  const std::vector<Vector3>& velocity() const { return velocity_; }

  /// Index of the node at `c`, or -1.
  int find(const Vector3i& c) const {
    const auto it = index_.find(node_key(c));
    return it == index_.end() ? -1 : it->second;
  }

  /// Replaces the node set with `coords` (sorted and deduplicated here).
  void set_nodes(std::vector<Vector3i> coords) {
    std::sort(coords.begin(), coords.end(), [](const Vector3i& a, const Vector3i& b) {
      return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
    });
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    coords_ = std::move(coords);
    index_.clear();
    index_.reserve(coords_.size() * 2);
    for (int i = 0; i < num_nodes(); ++i) index_.emplace(node_key(coords_[i]), i);
    mass_.assign(coords_.size(), 0.0);
    velocity_.assign(coords_.size(), Vector3::Zero());
  }

 private:
  double h_ = 1.0;
  std::vector<Vector3i> coords_;
  std::vector<double> mass_;
  std::vector<Vector3> velocity_;
  std::unordered_map<std::uint64_t, int> index_;
};

}  // namespace convex_mpm
