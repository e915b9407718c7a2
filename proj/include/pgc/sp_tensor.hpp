#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pgc/graph.hpp"
#include "pgc/matrix.hpp"

namespace pgc {

/// n x n binary matrix in compressed sparse row form; column indices are sorted
/// within each row.
struct BinaryCsr {
  std::vector<std::size_t> row_ptr;
  std::vector<NodeId> cols;

  std::size_t rows() const { return row_ptr.empty() ? 0 : row_ptr.size() - 1; }
  std::size_t nnz() const { return cols.size(); }
  std::span<const NodeId> row(std::size_t i) const {
    return {cols.data() + row_ptr[i], row_ptr[i + 1] - row_ptr[i]};
  }
  bool contains(std::size_t i, NodeId k) const;
};

/// Exact-distance indicator matrices SP^0..SP^r of one graph.
///
/// mats[j](i, k) = 1 iff the shortest-path distance between i and k is exactly
/// j. inv_degrees[j][i] is the reciprocal of the row sum of mats[j], or 0 for an
/// empty row.
struct SPTensor {
  int r = 0;
  std::size_t n = 0;
  std::vector<BinaryCsr> mats;
  std::vector<Vector> inv_degrees;
};

/// One BFS per source node, cut off at depth r. O(n (n + m)) worst case.
SPTensor compute_sp_tensor(const Graph& graph, int r);

std::vector<SPTensor> compute_sp_tensors(std::span<const Graph> graphs, int r);

/// (D^j)^-1 SP^j h: row i is the mean of h over nodes at distance exactly j
/// from i, or zero if there are none.
Matrix propagate(const SPTensor& sp, int j, const Matrix& h);

/// Adjoint of propagate(sp, j, .), i.e. SP^j (D^j)^-1 g.
Matrix propagate_transpose(const SPTensor& sp, int j, const Matrix& g);

/// Random-walk normalized neighborhood mean over self plus distance-1 nodes,
/// (SP^0 + SP^1) averaged row-wise. Requires sp.r >= 1.
Matrix propagate_joint(const SPTensor& sp, const Matrix& h);
Matrix propagate_joint_transpose(const SPTensor& sp, const Matrix& g);

}  // namespace pgc
