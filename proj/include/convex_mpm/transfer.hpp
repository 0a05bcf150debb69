#pragma once

#include <span>
#include <vector>

#include "convex_mpm/grid.hpp"
#include "convex_mpm/particles.hpp"
#include "convex_mpm/types.hpp"

namespace convex_mpm {

/// Nodes lighter than this fraction of the heaviest node are dropped after P2G.
inline constexpr double kNodePruneRatio = 1e-15;

/// Computes a stencil for every particle.
inline std::vector<KernelStencil> compute_stencils(const ParticleSet& particles, double h) {
  std::vector<KernelStencil> stencils;
  stencils.reserve(particles.size());
  for (const Vector3& x : particles.x) stencils.push_back(compute_stencil(x, h));
  return stencils;
}

/// APIC particle-to-grid transfer of mass and momentum.
///
///   m_i = sum_p w_ip m_p
///   v_i = (1/m_i) sum_p w_ip m_p (v_p + C_p (x_i - x_p))
///
/// Massless nodes are absent from the returned grid. If `stencils` is given it
/// receives the particle stencils with their node indices bound to the grid.
inline SparseGrid particles_to_grid(const ParticleSet& particles, double h,
                                    std::vector<KernelStencil>* stencils = nullptr) {
  std::vector<KernelStencil> local = compute_stencils(particles, h);

  std::vector<Vector3i> coords;
  coords.reserve(local.size() * kStencilSize);
  for (const KernelStencil& s : local) {
    for (int a = 0; a < kStencilSize; ++a) coords.push_back(s.coordinate(a));
  }
  SparseGrid grid(h);
  grid.set_nodes(std::move(coords));

  // Bind stencils, then accumulate in particle order.
  for (KernelStencil& s : local) {
    for (int a = 0; a < kStencilSize; ++a) s.node[a] = grid.find(s.coordinate(a));
  }
  std::vector<double> mass(grid.num_nodes(), 0.0);
  std::vector<Vector3> momentum(grid.num_nodes(), Vector3::Zero());
  for (std::size_t p = 0; p < particles.size(); ++p) {
    const KernelStencil& s = local[p];
    for (int a = 0; a < kStencilSize; ++a) {
      const int i = s.node[a];
      const double wm = s.w[a] * particles.mass[p];
      mass[i] += wm;
      momentum[i] += wm * (particles.v[p] + particles.C[p] * (grid.position(i) - particles.x[p]));
    }
  }

  double max_mass = 0.0;
  for (double m : mass) max_mass = std::max(max_mass, m);
  const double threshold = kNodePruneRatio * max_mass;
  std::vector<Vector3i> kept;
  std::vector<int> remap(grid.num_nodes(), -1);
  for (int i = 0; i < grid.num_nodes(); ++i) {
    if (mass[i] > threshold) {
      remap[i] = static_cast<int>(kept.size());
      kept.push_back(grid.coordinate(i));
    }
  }
  SparseGrid pruned(h);
  pruned.set_nodes(kept);
  for (int i = 0; i < grid.num_nodes(); ++i) {
    const int j = remap[i];
    if (j < 0) continue;
    pruned.mass()[j] = mass[i];
    pruned.velocity()[j] = momentum[i] / mass[i];
  }
  if (stencils != nullptr) {
    for (KernelStencil& s : local) {
      for (int a = 0; a < kStencilSize; ++a) s.node[a] = s.node[a] < 0 ? -1 : remap[s.node[a]];
    }
    *stencils = std::move(local);
  }
  return pruned;
}

/// F_new = (I + dt * sum_i v_i grad(w_ip)^T) F.
inline Matrix3 update_deformation_gradient(const Matrix3& F, const KernelStencil& stencil,
                                           std::span<const Vector3> grid_velocity, double dt) {
  Matrix3 L = Matrix3::Zero();
  for (int a = 0; a < kStencilSize; ++a) {
    const int i = stencil.node[a];
    if (i < 0) continue;
    L += grid_velocity[i] * stencil.grad[a].transpose();
  }
  return (Matrix3::Identity() + dt * L) * F;
}

/// Grid-to-particle transfer and advection with stencils frozen at the start
/// of the step:
///
///   v_p = sum_i w_ip v_i,  C_p = (4/h^2) sum_i w_ip v_i (x_i - x_p)^T,
///   F_p <- (I + dt sum_i v_i grad(w_ip)^T) F_p,  x_p <- x_p + dt v_p.
///
/// Returns the number of particles whose updated F has det <= 0.
inline int grid_to_particles(const SparseGrid& grid, std::span<const Vector3> grid_velocity,
                             std::span<const KernelStencil> stencils, double dt,
                             ParticleSet* particles) {
  const double h = grid.spacing();
  const double d_inv = 4.0 / (h * h);
  int inverted = 0;
  for (std::size_t p = 0; p < particles->size(); ++p) {
    const KernelStencil& s = stencils[p];
    const Vector3 xp = particles->x[p];
    Vector3 v = Vector3::Zero();
    Matrix3 B = Matrix3::Zero();
    for (int a = 0; a < kStencilSize; ++a) {
      const int i = s.node[a];
      if (i < 0) continue;
      v += s.w[a] * grid_velocity[i];
      B += s.w[a] * grid_velocity[i] * (grid.position(i) - xp).transpose();
    }
    particles->F[p] = update_deformation_gradient(particles->F[p], s, grid_velocity, dt);
    if (particles->F[p].determinant() <= 0.0) ++inverted;
    particles->v[p] = v;
    particles->C[p] = d_inv * B;
    particles->x[p] = xp + dt * v;
  }
  return inverted;
}

}  // namespace convex_mpm
