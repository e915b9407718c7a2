#include "pgc/sp_tensor.hpp"

#include <algorithm>
#include <limits>

#include "pgc/errors.hpp"

namespace pgc {

bool BinaryCsr::contains(std::size_t i, NodeId k) const {
  auto r = row(i);
  return std::binary_search(r.begin(), r.end(), k);
}

SPTensor compute_sp_tensor(const Graph& graph, int r) {
  require(r >= 0, "compute_sp_tensor: r must be non-negative");
  const std::size_t n = graph.node_count();
  const auto depth_limit = static_cast<std::size_t>(r);

  SPTensor sp;
  sp.r = r;
  sp.n = n;
  sp.mats.resize(depth_limit + 1);
  for (auto& m : sp.mats) {
    m.row_ptr.reserve(n + 1);
    m.row_ptr.push_back(0);
  }

  constexpr std::size_t unseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(n, unseen);
  std::vector<NodeId> frontier;
  std::vector<NodeId> next;
  std::vector<NodeId> visited;
  std::vector<std::vector<NodeId>> rings(depth_limit + 1);

  for (NodeId s = 0; s < n; ++s) {
    for (auto& ring : rings) ring.clear();
    visited.clear();
    frontier.assign(1, s);
    dist[s] = 0;
    visited.push_back(s);
    rings[0].push_back(s);
    for (std::size_t d = 1; d <= depth_limit && !frontier.empty(); ++d) {
      next.clear();
      for (NodeId v : frontier) {
        for (NodeId u : graph.neighbors(v)) {
          if (dist[u] != unseen) continue;
          dist[u] = d;
          visited.push_back(u);
          next.push_back(u);
          rings[d].push_back(u);
        }
      }
      frontier.swap(next);
    }
    for (std::size_t d = 0; d <= depth_limit; ++d) {
      auto& ring = rings[d];
      std::sort(ring.begin(), ring.end());
      auto& m = sp.mats[d];
      m.cols.insert(m.cols.end(), ring.begin(), ring.end());
      m.row_ptr.push_back(m.cols.size());
    }
    for (NodeId v : visited) dist[v] = unseen;
  }

  sp.inv_degrees.resize(depth_limit + 1);
  for (std::size_t d = 0; d <= depth_limit; ++d) {
    Vector inv(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto deg = sp.mats[d].row_ptr[i + 1] - sp.mats[d].row_ptr[i];
      inv[static_cast<Eigen::Index>(i)] = deg == 0 ? 0.0 : 1.0 / static_cast<double>(deg);
    }
    sp.inv_degrees[d] = std::move(inv);
  }
  return sp;
}

std::vector<SPTensor> compute_sp_tensors(std::span<const Graph> graphs, int r) {
  std::vector<SPTensor> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(compute_sp_tensor(g, r));
  return out;
}

namespace {

void check_args(const SPTensor& sp, int j, const Matrix& h, const char* who) {
  require(j >= 0 && j <= sp.r, std::string(who) + ": distance " + std::to_string(j) +
                                   " outside 0.." + std::to_string(sp.r));
  require(static_cast<std::size_t>(h.rows()) == sp.n,
          std::string(who) + ": input has " + std::to_string(h.rows()) + " rows, graph has " +
              std::to_string(sp.n) + " nodes");
}

}  // namespace

Matrix propagate(const SPTensor& sp, int j, const Matrix& h) {
  check_args(sp, j, h, "propagate");
  if (j == 0) return h;
  const auto& m = sp.mats[static_cast<std::size_t>(j)];
  const auto& inv = sp.inv_degrees[static_cast<std::size_t>(j)];
  Matrix out = Matrix::Zero(h.rows(), h.cols());
  for (std::size_t i = 0; i < sp.n; ++i) {
    auto row = m.row(i);
    if (row.empty()) continue;
    auto dst = out.row(static_cast<Eigen::Index>(i));
    for (NodeId k : row) dst += h.row(k);
    dst *= inv[static_cast<Eigen::Index>(i)];
  }
  return out;
}

Matrix propagate_transpose(const SPTensor& sp, int j, const Matrix& g) {
  check_args(sp, j, g, "propagate_transpose");
  if (j == 0) return g;
  const auto& m = sp.mats[static_cast<std::size_t>(j)];
  const auto& inv = sp.inv_degrees[static_cast<std::size_t>(j)];
  // SP^j is symmetric, so column i of SP^j D^-1 is row i of SP^j scaled per entry.
  Matrix out = Matrix::Zero(g.rows(), g.cols());
  for (std::size_t i = 0; i < sp.n; ++i) {
    auto dst = out.row(static_cast<Eigen::Index>(i));
    for (NodeId k : m.row(i)) dst += inv[k] * g.row(k);
  }
  return out;
}

Matrix propagate_joint(const SPTensor& sp, const Matrix& h) {
  require(sp.r >= 1, "propagate_joint: needs distance-1 matrix (r >= 1)");
  check_args(sp, 1, h, "propagate_joint");
  const auto& adj = sp.mats[1];
  Matrix out(h.rows(), h.cols());
  for (std::size_t i = 0; i < sp.n; ++i) {
    auto dst = out.row(static_cast<Eigen::Index>(i));
    dst = h.row(static_cast<Eigen::Index>(i));
    auto row = adj.row(i);
    for (NodeId k : row) dst += h.row(k);
    dst *= 1.0 / static_cast<double>(row.size() + 1);
  }
  return out;
}

Matrix propagate_joint_transpose(const SPTensor& sp, const Matrix& g) {
  require(sp.r >= 1, "propagate_joint_transpose: needs distance-1 matrix (r >= 1)");
  check_args(sp, 1, g, "propagate_joint_transpose");
  const auto& adj = sp.mats[1];
  auto inv = [&](std::size_t i) { return 1.0 / static_cast<double>(adj.row(i).size() + 1); };
  Matrix out(g.rows(), g.cols());
  for (std::size_t i = 0; i < sp.n; ++i) {
    auto dst = out.row(static_cast<Eigen::Index>(i));
    dst = inv(i) * g.row(static_cast<Eigen::Index>(i));
    for (NodeId k : adj.row(i)) dst += inv(k) * g.row(k);
  }
  return out;
}

}  // namespace pgc
