#include "pgc/graph.hpp"

#include <algorithm>
#include <sstream>

#include "pgc/errors.hpp"

namespace pgc {

Graph Graph::from_edges(std::size_t node_count, std::span<const Edge> edges, Matrix features,
                        int target, EdgeCleanup* cleanup) {
  require(node_count > 0, "graph must have at least one node");
  require(static_cast<std::size_t>(features.rows()) == node_count,
          "feature matrix has " + std::to_string(features.rows()) + " rows, expected " +
              std::to_string(node_count));

  std::vector<Edge> directed;
  directed.reserve(2 * edges.size());
  EdgeCleanup local;
  for (auto [a, b] : edges) {
    require(a < node_count && b < node_count,
            "edge (" + std::to_string(a) + "," + std::to_string(b) + ") out of range for n=" +
                std::to_string(node_count));
    if (a == b) {
      ++local.self_loops;
      continue;
    }
    directed.emplace_back(a, b);
  }
  std::sort(directed.begin(), directed.end());
  auto last = std::unique(directed.begin(), directed.end());
  local.duplicates = static_cast<std::size_t>(directed.end() - last);
  directed.erase(last, directed.end());

  // Symmetrize; a pair listed in both directions is the normal file encoding and
  // is not counted as a duplicate.
  std::vector<Edge> both;
  both.reserve(2 * directed.size());
  for (auto [a, b] : directed) {
    both.emplace_back(a, b);
    both.emplace_back(b, a);
  }
  std::sort(both.begin(), both.end());
  both.erase(std::unique(both.begin(), both.end()), both.end());

  Graph g;
  g.adjacency_.assign(node_count, {});
  for (auto [a, b] : both) g.adjacency_[a].push_back(b);
  g.edge_count_ = both.size() / 2;
  g.features_ = std::move(features);
  g.target_ = target;
  if (cleanup) {
    cleanup->self_loops += local.self_loops;
    cleanup->duplicates += local.duplicates;
  }
  return g;
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (NodeId v = 0; v < adjacency_.size(); ++v)
    for (NodeId u : adjacency_[v])
      if (v < u) out.emplace_back(v, u);
  return out;
}

Graph Graph::with_features(Matrix features) const {
  require(features.rows() == features_.rows(), "with_features: row count mismatch");
  Graph g = *this;
  g.features_ = std::move(features);
  return g;
}

Graph Graph::relabeled(std::span<const NodeId> perm) const {
  const std::size_t n = node_count();
  require(perm.size() == n, "relabeled: permutation size mismatch");
  std::vector<bool> seen(n, false);
  for (NodeId p : perm) {
    require(p < n && !seen[p], "relabeled: not a permutation");
    seen[p] = true;
  }
  std::vector<Edge> moved;
  moved.reserve(edge_count_);
  for (auto [a, b] : edges()) moved.emplace_back(perm[a], perm[b]);
  Matrix f(features_.rows(), features_.cols());
  for (std::size_t v = 0; v < n; ++v) f.row(perm[v]) = features_.row(v);
  return from_edges(n, moved, std::move(f), target_);
}

std::vector<int> Dataset::targets() const {
  std::vector<int> t;
  t.reserve(graphs.size());
  for (const auto& g : graphs) t.push_back(g.target());
  return t;
}

std::string validate_graph(const Graph& graph, bool one_hot) {
  const std::size_t n = graph.node_count();
  std::ostringstream err;
  for (NodeId v = 0; v < n; ++v) {
    for (NodeId u : graph.neighbors(v)) {
      if (u >= n) {
        err << "neighbor " << u << " of node " << v << " out of range";
        return err.str();
      }
      if (u == v) {
        err << "self-loop at node " << v;
        return err.str();
      }
      const auto& back = graph.neighbors(u);
      if (!std::binary_search(back.begin(), back.end(), v)) {
        err << "edge (" << v << "," << u << ") has no mirror";
        return err.str();
      }
    }
  }
  if (one_hot) {
    const Matrix& x = graph.features();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      int ones = 0;
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (x(i, c) == 1.0) {
          ++ones;
        } else if (x(i, c) != 0.0) {
          ones = -1;
          break;
        }
      }
      if (ones != 1) {
        err << "feature row " << i << " is not one-hot";
        return err.str();
      }
    }
  }
  return {};
}

}  // namespace pgc
