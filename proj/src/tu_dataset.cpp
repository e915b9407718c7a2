#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "pgc/errors.hpp"
#include "pgc/graph.hpp"

namespace pgc {

namespace fs = std::filesystem;

namespace {

struct Row {
  std::size_t line = 0;
  std::vector<long long> values;
};

// Reads a newline-delimited file of comma/whitespace separated integers.
// Blank lines are skipped.
std::vector<Row> read_int_rows(const fs::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Row> rows;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    Row row;
    row.line = line_no;
    std::size_t pos = 0;
    while (pos < text.size()) {
      while (pos < text.size() && (text[pos] == ',' || std::isspace(static_cast<unsigned char>(text[pos]))))
        ++pos;
      if (pos >= text.size()) break;
      std::size_t end = pos;
      while (end < text.size() && text[end] != ',' && !std::isspace(static_cast<unsigned char>(text[end])))
        ++end;
      long long value = 0;
      const char* first = text.data() + pos;
      const char* stop = text.data() + end;
      if (*first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, stop, value);
      if (ec != std::errc() || ptr != stop) {
        throw DataError(path.filename().string() + ":" + std::to_string(line_no) +
                        ": non-integer token '" + text.substr(pos, end - pos) + "'");
      }
      row.values.push_back(value);
      pos = end;
    }
    if (row.values.empty()) continue;
    if (row.values.size() != columns) {
      throw DataError(path.filename().string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(columns) + " value(s), found " +
                      std::to_string(row.values.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

fs::path mandatory(const fs::path& dir, const std::string& name, const std::string& suffix) {
  fs::path p = dir / (name + suffix);
  if (!fs::is_regular_file(p)) throw DataError("missing dataset file " + p.string());
  return p;
}

Matrix one_hot_rows(const std::vector<std::size_t>& columns, std::size_t width) {
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(columns.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < columns.size(); ++i) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(columns[i])) = 1.0;
  return x;
}

}  // namespace

Dataset load_tu_dataset(const fs::path& root, const std::string& name) {
  fs::path dir = root;
  if (fs::is_directory(root / name)) dir = root / name;

  const auto edge_rows = read_int_rows(mandatory(dir, name, "_A.txt"), 2);
  const auto indicator_rows = read_int_rows(mandatory(dir, name, "_graph_indicator.txt"), 1);
  const auto label_rows = read_int_rows(mandatory(dir, name, "_graph_labels.txt"), 1);
  const fs::path node_label_path = dir / (name + "_node_labels.txt");
  const bool has_node_labels = fs::is_regular_file(node_label_path);

  const std::size_t num_graphs = label_rows.size();
  const std::size_t num_nodes = indicator_rows.size();
  if (num_graphs == 0) throw DataError(name + "_graph_labels.txt: no graphs");

  // Global node -> (graph, local index).
  std::vector<std::size_t> graph_of(num_nodes);
  std::vector<NodeId> local_of(num_nodes);
  std::vector<std::size_t> graph_sizes(num_graphs, 0);
  for (std::size_t v = 0; v < num_nodes; ++v) {
    const long long gid = indicator_rows[v].values[0];
    if (gid < 1 || static_cast<std::size_t>(gid) > num_graphs) {
      throw DataError(name + "_graph_indicator.txt:" + std::to_string(indicator_rows[v].line) +
                      ": graph id " + std::to_string(gid) + " out of range 1.." +
                      std::to_string(num_graphs));
    }
    graph_of[v] = static_cast<std::size_t>(gid - 1);
    local_of[v] = static_cast<NodeId>(graph_sizes[graph_of[v]]++);
  }
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (graph_sizes[g] == 0)
      throw DataError(name + ": graph " + std::to_string(g + 1) + " has zero nodes");
  }

  std::vector<std::vector<Edge>> graph_edges(num_graphs);
  for (const auto& row : edge_rows) {
    const long long a = row.values[0];
    const long long b = row.values[1];
    for (long long v : {a, b}) {
      if (v < 1 || static_cast<std::size_t>(v) > num_nodes) {
        throw DataError(name + "_A.txt:" + std::to_string(row.line) + ": node index " +
                        std::to_string(v) + " out of range 1.." + std::to_string(num_nodes));
      }
    }
    const std::size_t ga = graph_of[a - 1];
    if (ga != graph_of[b - 1]) {
      throw DataError(name + "_A.txt:" + std::to_string(row.line) + ": edge joins graphs " +
                      std::to_string(ga + 1) + " and " + std::to_string(graph_of[b - 1] + 1));
    }
    graph_edges[ga].emplace_back(local_of[a - 1], local_of[b - 1]);
  }

  std::set<long long> class_values;
  for (const auto& row : label_rows) class_values.insert(row.values[0]);
  std::map<long long, int> class_index;
  for (long long c : class_values) class_index.emplace(c, static_cast<int>(class_index.size()));

  std::vector<std::size_t> node_column(num_nodes, 0);
  std::size_t feature_dim = 0;
  if (has_node_labels) {
    const auto node_rows = read_int_rows(node_label_path, 1);
    if (node_rows.size() != num_nodes) {
      throw DataError(name + "_node_labels.txt: " + std::to_string(node_rows.size()) +
                      " labels for " + std::to_string(num_nodes) + " nodes");
    }
    std::set<long long> alphabet;
    for (const auto& row : node_rows) alphabet.insert(row.values[0]);
    std::map<long long, std::size_t> column;
    for (long long l : alphabet) column.emplace(l, column.size());
    for (std::size_t v = 0; v < num_nodes; ++v) node_column[v] = column.at(node_rows[v].values[0]);
    feature_dim = alphabet.size();
  }

  std::vector<std::vector<std::size_t>> columns_per_graph(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) columns_per_graph[g].resize(graph_sizes[g]);
  for (std::size_t v = 0; v < num_nodes; ++v) columns_per_graph[graph_of[v]][local_of[v]] = node_column[v];

  Dataset ds;
  ds.name = name;
  ds.num_classes = static_cast<int>(class_index.size());
  ds.feature_dim = feature_dim;
  ds.has_node_labels = has_node_labels;
  ds.graphs.reserve(num_graphs);
  EdgeCleanup cleanup;
  for (std::size_t g = 0; g < num_graphs; ++g) {
    Matrix x = has_node_labels ? one_hot_rows(columns_per_graph[g], feature_dim)
                               : Matrix(static_cast<Eigen::Index>(graph_sizes[g]), 0);
    ds.graphs.push_back(Graph::from_edges(graph_sizes[g], graph_edges[g], std::move(x),
                                          class_index.at(label_rows[g].values[0]), &cleanup));
  }
  if (cleanup.self_loops > 0 || cleanup.duplicates > 0) {
    spdlog::info("{}: dropped {} self-loop(s) and {} duplicate edge(s)", name, cleanup.self_loops,
                 cleanup.duplicates);
  }
  return ds;
}

void write_tu_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string& name = dataset.name;
  std::ofstream a(dir / (name + "_A.txt"));
  std::ofstream gi(dir / (name + "_graph_indicator.txt"));
  std::ofstream gl(dir / (name + "_graph_labels.txt"));
  std::ofstream nl;
  if (dataset.has_node_labels) nl.open(dir / (name + "_node_labels.txt"));
  if (!a || !gi || !gl || (dataset.has_node_labels && !nl))
    throw DataError("cannot write dataset files under " + dir.string());

  std::size_t offset = 1;
  for (std::size_t g = 0; g < dataset.graphs.size(); ++g) {
    const Graph& graph = dataset.graphs[g];
    for (NodeId v = 0; v < graph.node_count(); ++v) {
      gi << (g + 1) << '\n';
      for (NodeId u : graph.neighbors(v)) a << (offset + v) << ", " << (offset + u) << '\n';
      if (dataset.has_node_labels) {
        Eigen::Index col = 0;
        graph.features().row(v).maxCoeff(&col);
        nl << col << '\n';
      }
    }
    gl << graph.target() << '\n';
    offset += graph.node_count();
  }
}

Dataset encode_degree_features(const Dataset& dataset) {
  std::set<std::size_t> degrees;
  for (const auto& g : dataset.graphs)
    for (NodeId v = 0; v < g.node_count(); ++v) degrees.insert(g.degree(v));
  std::map<std::size_t, std::size_t> column;
  for (std::size_t d : degrees) column.emplace(d, column.size());

  Dataset out;
  out.name = dataset.name;
  out.num_classes = dataset.num_classes;
  out.feature_dim = degrees.size();
  out.has_node_labels = false;
  out.graphs.reserve(dataset.graphs.size());
  for (const auto& g : dataset.graphs) {
    std::vector<std::size_t> cols(g.node_count());
    for (NodeId v = 0; v < g.node_count(); ++v) cols[v] = column.at(g.degree(v));
    out.graphs.push_back(g.with_features(one_hot_rows(cols, out.feature_dim)));
  }
  return out;
}

DatasetStats describe(const Dataset& dataset) {
  DatasetStats s;
  s.graphs = dataset.graphs.size();
  s.classes = dataset.num_classes;
  s.feature_dim = dataset.feature_dim;
  s.class_counts.assign(static_cast<std::size_t>(std::max(dataset.num_classes, 0)), 0);
  double nodes = 0.0;
  double edges = 0.0;
  for (const auto& g : dataset.graphs) {
    s.max_nodes = std::max(s.max_nodes, g.node_count());
    nodes += static_cast<double>(g.node_count());
    edges += static_cast<double>(g.edge_count());
    ++s.class_counts[static_cast<std::size_t>(g.target())];
  }
  if (s.graphs > 0) {
    s.avg_nodes = nodes / static_cast<double>(s.graphs);
    s.avg_edges = edges / static_cast<double>(s.graphs);
  }
  return s;
}

std::string format_stats(const Dataset& dataset, const DatasetStats& stats) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "Dataset          " << dataset.name << '\n';
  out << "#Nodes (Max)     " << stats.max_nodes << '\n';
  out << "#Nodes (Avg)     " << stats.avg_nodes << '\n';
  out << "#Graphs          " << stats.graphs << '\n';
  out << "#Edges (Avg)     " << stats.avg_edges << '\n';
  out << "#Classes         " << stats.classes << '\n';
  out << "Class counts    ";
  for (auto c : stats.class_counts) out << ' ' << c;
  out << '\n';
  out << "Feature dim      " << stats.feature_dim
      << (dataset.has_node_labels ? " (node labels)" : " (no node labels)") << '\n';
  return out.str();
}

}  // namespace pgc
