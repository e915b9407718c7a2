#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pgc/matrix.hpp"

namespace pgc {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Counts of input edges discarded while normalizing a graph.
struct EdgeCleanup {
  std::size_t self_loops = 0;
  std::size_t duplicates = 0;
};

/// Undirected, node-labeled graph with a class target.
///
/// Adjacency lists are sorted, symmetric and free of self-loops. Immutable after
/// construction, so instances can be shared across threads.
class Graph {
public:
  /// Builds a graph from an arbitrary edge list: each pair is inserted in both
  /// directions, self-loops and repeated pairs are dropped (and counted in
  /// `cleanup` when given). Throws ContractViolation on n == 0, out-of-range
  /// endpoints or a feature matrix with a row count other than n.
  static Graph from_edges(std::size_t node_count, std::span<const Edge> edges, Matrix features,
                          int target, EdgeCleanup* cleanup = nullptr);

  std::size_t node_count() const { return adjacency_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  std::size_t degree(NodeId v) const { return adjacency_[v].size(); }
  const std::vector<NodeId>& neighbors(NodeId v) const { return adjacency_[v]; }

  /// Undirected edges as (i, j) with i < j, lexicographically sorted.
  std::vector<Edge> edges() const;

  const Matrix& features() const { return features_; }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features_.cols()); }
  int target() const { return target_; }

  Graph with_features(Matrix features) const;

  /// Node v of this graph becomes node perm[v] of the result; features and
  /// edges move consistently.
  Graph relabeled(std::span<const NodeId> perm) const;

private:
  Graph() = default;

  std::vector<std::vector<NodeId>> adjacency_;
  std::size_t edge_count_ = 0;
  Matrix features_;
  int target_ = 0;
};

struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  int num_classes = 0;
  std::size_t feature_dim = 0;
  /// False when the dataset shipped without node labels; features are then
  /// n x 0 until encode_degree_features() is applied.
  bool has_node_labels = false;

  std::size_t size() const { return graphs.size(); }
  std::vector<int> targets() const;
};

/// Reads the standard benchmark text files `<name>_A.txt`,
/// `<name>_graph_indicator.txt`, `<name>_graph_labels.txt` and optionally
/// `<name>_node_labels.txt` from `root` (or from `root/<name>/` when that
/// directory exists).
///
/// Graph labels are remapped to 0..C-1 in sorted order of the original values,
/// node labels are one-hot encoded over the sorted alphabet of the whole
/// dataset. Edge labels are ignored. Throws DataError on missing files,
/// malformed tokens (message carries file and line) and empty graphs.
Dataset load_tu_dataset(const std::filesystem::path& root, const std::string& name);

/// Writes `dataset` in the same text format under `dir` (created if needed).
/// Node labels are written as the argmax column of each feature row.
void write_tu_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Replaces node features by a one-hot encoding of node degree over the sorted
/// set of distinct degrees occurring anywhere in the dataset.
Dataset encode_degree_features(const Dataset& dataset);

struct DatasetStats {
  std::size_t graphs = 0;
  int classes = 0;
  std::size_t feature_dim = 0;
  std::size_t max_nodes = 0;
  double avg_nodes = 0.0;
  double avg_edges = 0.0;
  std::vector<std::size_t> class_counts;
};

DatasetStats describe(const Dataset& dataset);

/// Formats the statistics as a small two-column table.
std::string format_stats(const Dataset& dataset, const DatasetStats& stats);

/// Checks adjacency symmetry, absence of self-loops, index bounds and (when
/// `one_hot` is set) one-hot feature rows. Returns an empty string when valid,
/// otherwise a description of the first violation.
std::string validate_graph(const Graph& graph, bool one_hot);

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Stratified k-fold partition with a rotating validation fold.
///
/// Fold f is the test block of split f and fold (f + 1) mod k its validation
/// block; the remaining folds form the training block. Each class is shuffled
/// with `seed` and dealt round-robin, continuing the deal across classes, so
/// every fold is within one example of the global class proportions and fold
/// sizes differ by at most one. With folds == 2 there is no third fold, so the
/// non-test fold is halved per class into training and validation. Throws
/// ConfigError when folds < 2 or a class has fewer than `folds` members.
std::vector<FoldSplit> stratified_folds(std::span<const int> targets, int folds,
                                        std::uint64_t seed);
std::vector<FoldSplit> stratified_folds(const Dataset& dataset, int folds, std::uint64_t seed);

}  // namespace pgc
