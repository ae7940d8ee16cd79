#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "graphcontrol/errors.hpp"
#include "graphcontrol/rng.hpp"

namespace graphcontrol {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Immutable undirected graph in CSR form. Neighbor lists are sorted and
/// duplicate-free; every edge is stored in both directions. A self-loop, when
/// present, is stored once and counts 1 toward the degree.
class Graph {
 public:
  Graph() = default;

  /// Builds a graph from an edge list in either orientation. Duplicates and
  /// reversed duplicates collapse to one undirected edge. Self-loops are kept
  /// only when `keep_self_loops` is set, otherwise dropped.
  static Graph from_edges(std::size_t num_nodes, std::span<const Edge> edges, bool keep_self_loops = false) {
    std::vector<Edge> directed;
    directed.reserve(edges.size() * 2);
    for (auto [u, v] : edges) {
      if (u >= num_nodes || v >= num_nodes)
        throw DataError("edge (" + std::to_string(u) + ", " + std::to_string(v) + ") out of range for " +
                        std::to_string(num_nodes) + " nodes");
      if (u == v) {
        if (keep_self_loops) directed.emplace_back(u, u);
        continue;
      }
      directed.emplace_back(u, v);
      directed.emplace_back(v, u);
    }
    std::sort(directed.begin(), directed.end());
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

    Graph g;
    g.offsets_.assign(num_nodes + 1, 0);
    for (auto [u, v] : directed) ++g.offsets_[u + 1];
    for (std::size_t i = 0; i < num_nodes; ++i) g.offsets_[i + 1] += g.offsets_[i];
    g.neighbors_.reserve(directed.size());
    for (auto [u, v] : directed) g.neighbors_.push_back(v);
    return g;
  }

  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }

  /// Number of undirected edges (a self-loop counts as one edge).
  std::size_t num_edges() const {
    std::size_t loops = 0;
    for (std::size_t v = 0; v < num_nodes(); ++v)
      if (has_edge(static_cast<NodeId>(v), static_cast<NodeId>(v))) ++loops;
    return (neighbors_.size() - loops) / 2 + loops;
  }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {neighbors_.data() + offsets_[v], neighbors_.data() + offsets_[v + 1]};
  }
  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> d(num_nodes());
    for (std::size_t v = 0; v < d.size(); ++v) d[v] = degree(static_cast<NodeId>(v));
    return d;
  }
  bool has_edge(NodeId u, NodeId v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  /// Each undirected edge once, as (u, v) with u <= v, sorted.
  std::vector<Edge> edge_list() const {
    std::vector<Edge> out;
    for (std::size_t u = 0; u < num_nodes(); ++u)
      for (auto v : neighbors(static_cast<NodeId>(u)))
        if (u <= v) out.emplace_back(static_cast<NodeId>(u), v);
    return out;
  }

  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const NodeId> adjacency() const { return neighbors_; }

  bool has_attributes() const { return attributes_.has_value(); }
  const DenseMatrix& attributes() const {
    if (!attributes_) throw DataError("graph has no node attributes");
    return *attributes_;
  }
  std::size_t attribute_dim() const { return attributes_ ? static_cast<std::size_t>(attributes_->cols()) : 0; }

  bool has_labels() const { return labels_.has_value(); }
  std::span<const int> labels() const {
    if (!labels_) throw DataError("graph has no labels");
    return *labels_;
  }
  int num_classes() const { return num_classes_; }

  Graph with_attributes(DenseMatrix attributes) const {
    if (static_cast<std::size_t>(attributes.rows()) != num_nodes())
      throw DataError("attribute row count " + std::to_string(attributes.rows()) + " does not match " +
                      std::to_string(num_nodes()) + " nodes");
    Graph g = *this;
    g.attributes_ = std::move(attributes);
    return g;
  }

  Graph with_labels(std::vector<int> labels, int num_classes) const {
    if (labels.size() != num_nodes())
      throw DataError("label count " + std::to_string(labels.size()) + " does not match " +
                      std::to_string(num_nodes()) + " nodes");
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] < 0 || labels[i] >= num_classes)
        throw DataError("label out of range: node " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                        " with " + std::to_string(num_classes) + " classes");
    Graph g = *this;
    g.labels_ = std::move(labels);
    g.num_classes_ = num_classes;
    return g;
  }

  Graph without_attributes() const {
    Graph g = *this;
    g.attributes_.reset();
    return g;
  }

  /// Connectivity only; labels and attributes are dropped.
  Graph structure_only() const {
    Graph g;
    g.offsets_ = offsets_;
    g.neighbors_ = neighbors_;
    return g;
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    if (a.offsets_ != b.offsets_ || a.neighbors_ != b.neighbors_) return false;
    if (a.labels_ != b.labels_ || a.num_classes_ != b.num_classes_) return false;
    if (a.attributes_.has_value() != b.attributes_.has_value()) return false;
    return !a.attributes_ || *a.attributes_ == *b.attributes_;
  }

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> neighbors_;
  std::optional<DenseMatrix> attributes_;
  std::optional<std::vector<int>> labels_;
  int num_classes_ = 0;
};

/// Attribute-free view handed to structural pre-training. Labels and
/// attributes are stripped at construction, so any attribute access through
/// graph() raises DataError.
class StructureView {
 public:
  explicit StructureView(const Graph& g) : graph_(g.structure_only()) {}
  const Graph& graph() const { return graph_; }
  std::size_t num_nodes() const { return graph_.num_nodes(); }

 private:
  Graph graph_;
};

struct DataSplit {
  std::vector<NodeId> train_ids;
  std::vector<NodeId> test_ids;
  std::uint64_t seed = 0;
};

struct DatasetBundle {
  Graph graph;
  std::string name;
  bool is_attributed = false;

  void validate() const {
    if (is_attributed != graph.has_attributes())
      throw DataError("dataset '" + name + "': is_attributed flag disagrees with attribute presence");
  }
};

/// Uniform train/test partition with |train| = round(train_fraction * N).
inline DataSplit make_split(const Graph& graph, double train_fraction, std::uint64_t seed) {
  if (!graph.has_labels()) throw DataError("make_split requires labels");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0, 1), got " + std::to_string(train_fraction));
  const auto n = graph.num_nodes();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n)
    throw ConfigError("train_fraction " + std::to_string(train_fraction) + " on " + std::to_string(n) +
                      " nodes leaves an empty train or test set");
  std::vector<NodeId> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<NodeId>(i);
  Engine eng(seed);
  shuffle(perm.begin(), perm.end(), eng);
  DataSplit split;
  split.seed = seed;
  split.train_ids.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test_ids.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

/// Few-shot protocol: a 1:9 candidate/test partition drawn with `seed`, then
/// `shots` nodes per class drawn from the candidates with sub-seed seed ^ 1.
/// Leftover candidates are unused.
inline DataSplit make_fewshot_split(const Graph& graph, std::size_t shots, std::uint64_t seed) {
  if (shots == 0) throw ConfigError("shots must be positive");
  const DataSplit pool = make_split(graph, 0.1, seed);
  const auto labels = graph.labels();
  Engine eng(seed ^ 1ULL);
  DataSplit split;
  split.seed = seed;
  split.test_ids = pool.test_ids;
  for (int c = 0; c < graph.num_classes(); ++c) {
    std::vector<NodeId> members;
    for (auto v : pool.train_ids)
      if (labels[v] == c) members.push_back(v);
    if (members.size() < shots)
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                      " candidates, fewer than shots=" + std::to_string(shots));
    shuffle(members.begin(), members.end(), eng);
    split.train_ids.insert(split.train_ids.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(shots));
  }
  std::sort(split.train_ids.begin(), split.train_ids.end());
  return split;
}

}  // namespace graphcontrol
