#pragma once

#include <array>
#include <vector>

#include <Eigen/SparseCore>

#include "convex_mpm/grid.hpp"
#include "convex_mpm/types.hpp"

namespace convex_mpm {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Symmetric matrix over grid-node DoFs made of 3x3 blocks. Node j may couple
/// to node i only when their coordinates differ by at most 2 on every axis,
/// which is the reach of two overlapping quadratic B-spline stencils.
class BlockSparseMatrix {
 public:
  static constexpr int kReach = 2;
  static constexpr int kWidth = 2 * kReach + 1;
  static constexpr int kNeighbors = kWidth * kWidth * kWidth;

  static int neighbor_slot(const Vector3i& d) {
    return ((d.x() + kReach) * kWidth + (d.y() + kReach)) * kWidth + (d.z() + kReach);
  }

  BlockSparseMatrix() = default;

  explicit BlockSparseMatrix(const SparseGrid& grid)
      : num_nodes_(grid.num_nodes()),
        neighbor_(static_cast<std::size_t>(num_nodes_) * kNeighbors, -1),
        blocks_(static_cast<std::size_t>(num_nodes_) * kNeighbors, Matrix3::Zero()),
        touched_(static_cast<std::size_t>(num_nodes_) * kNeighbors, 0) {
    for (int i = 0; i < num_nodes_; ++i) {
      const Vector3i& c = grid.coordinate(i);
      for (int dx = -kReach; dx <= kReach; ++dx) {
        for (int dy = -kReach; dy <= kReach; ++dy) {
          for (int dz = -kReach; dz <= kReach; ++dz) {
            const Vector3i d(dx, dy, dz);
            neighbor_[slot_index(i, neighbor_slot(d))] = grid.find(c + d);
          }
        }
      }
    }
  }

  int num_nodes() const { return num_nodes_; }
  int rows() const { return 3 * num_nodes_; }

  /// Adds `block` to block (i, j) where j = i + offset. The caller keeps the
  /// matrix symmetric by also adding the transpose at (j, i).
  void add(int i, const Vector3i& offset, const Matrix3& block) {
    const std::size_t s = slot_index(i, neighbor_slot(offset));
    blocks_[s] += block;
    touched_[s] = 1;
  }

  void add_diagonal(int i, const Matrix3& block) { add(i, Vector3i::Zero(), block); }

  const Matrix3& diagonal_block(int i) const {
    return blocks_[slot_index(i, neighbor_slot(Vector3i::Zero()))];
  }

  /// y = A x
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(rows());
    for (int i = 0; i < num_nodes_; ++i) {
      for (int s = 0; s < kNeighbors; ++s) {
        const std::size_t k = slot_index(i, s);
        if (!touched_[k]) continue;
        const int j = neighbor_[k];
        y.segment<3>(3 * i) += blocks_[k] * x.segment<3>(3 * j);
      }
    }
    return y;
  }

  /// Converts to a compressed sparse matrix, placing DoF 0 at row/column `offset`.
  void append_triplets(std::vector<Triplet>* triplets, int offset = 0) const {
    for (int i = 0; i < num_nodes_; ++i) {
      for (int s = 0; s < kNeighbors; ++s) {
        const std::size_t k = slot_index(i, s);
        if (!touched_[k]) continue;
        const int j = neighbor_[k];
        for (int a = 0; a < 3; ++a) {
          for (int b = 0; b < 3; ++b) {
            triplets->emplace_back(offset + 3 * i + a, offset + 3 * j + b, blocks_[k](a, b));
          }
        }
      }
    }
  }

  SparseMatrix to_sparse() const {
    std::vector<Triplet> triplets;
    append_triplets(&triplets);
    SparseMatrix A(rows(), rows());
    A.setFromTriplets(triplets.begin(), triplets.end());
    return A;
  }

 private:
  std::size_t slot_index(int i, int slot) const {
    return static_cast<std::size_t>(i) * kNeighbors + slot;
  }

  int num_nodes_ = 0;
  std::vector<int> neighbor_;
  std::vector<Matrix3> blocks_;
  std::vector<char> touched_;
};

}  // namespace convex_mpm
