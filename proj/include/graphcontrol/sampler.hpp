#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "graphcontrol/errors.hpp"
#include "graphcontrol/graph.hpp"
#include "graphcontrol/rng.hpp"

namespace graphcontrol {

inline constexpr std::size_t kDefaultWalkSteps = 256;
inline constexpr double kDefaultRestartRate = 0.8;

/// Local graph around a center node. Local id i corresponds to node_ids[i];
/// node_ids is sorted ascending.
struct Subgraph {
  std::size_t center_local_id = 0;
  std::vector<NodeId> node_ids;
  Graph local;
  std::optional<DenseMatrix> local_attributes;
  std::optional<int> label;

  std::size_t size() const { return node_ids.size(); }
};

/// The node sequence of one walk with restart, starting at `center` and
/// taking `walk_steps` steps (so walk_steps + 1 entries). Each step draws one
/// uniform for the restart decision; a move then draws one index for the
/// neighbor. A node without neighbors sends the walk back to the center.
inline std::vector<NodeId> rwr_trajectory(const Graph& graph, NodeId center, std::size_t walk_steps,
                                          double restart_rate, std::uint64_t rng_seed) {
  if (center >= graph.num_nodes())
    throw DataError("rwr: center " + std::to_string(center) + " out of range");
  if (!(restart_rate >= 0.0 && restart_rate <= 1.0))
    throw ConfigError("restart_rate must lie in [0, 1]");
  if (walk_steps < 1) throw ConfigError("walk_steps must be at least 1");
  Engine eng(rng_seed);
  std::vector<NodeId> path;
  path.reserve(walk_steps + 1);
  NodeId current = center;
  path.push_back(current);
  for (std::size_t step = 0; step < walk_steps; ++step) {
    const bool restart = uniform01(eng) < restart_rate;
    const auto nb = graph.neighbors(current);
    if (restart || nb.empty()) {
      current = center;
    } else {
      current = nb[uniform_index(eng, nb.size())];
    }
    path.push_back(current);
  }
  return path;
}

/// Sorted set of nodes visited by rwr_trajectory (center included).
inline std::vector<NodeId> rwr_sample(const Graph& graph, NodeId center, std::size_t walk_steps, double restart_rate,
                                      std::uint64_t rng_seed) {
  auto nodes = rwr_trajectory(graph, center, walk_steps, restart_rate, rng_seed);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

/// Induced subgraph on `nodes` (any order, duplicates ignored) with local ids
/// in ascending global-id order. Attribute rows and the center label are
/// carried over when the parent has them.
inline Subgraph induce_subgraph(const Graph& graph, std::vector<NodeId> nodes, NodeId center) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), center);
  if (it == nodes.end() || *it != center)
    throw DataError("induce_subgraph: center " + std::to_string(center) + " is not in the node set");
  for (auto v : nodes)
    if (v >= graph.num_nodes()) throw DataError("induce_subgraph: node " + std::to_string(v) + " out of range");

  Subgraph sub;
  sub.center_local_id = static_cast<std::size_t>(it - nodes.begin());
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (auto v : graph.neighbors(nodes[i])) {
      if (v < nodes[i]) continue;
      const auto jt = std::lower_bound(nodes.begin(), nodes.end(), v);
      if (jt != nodes.end() && *jt == v)
        edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(jt - nodes.begin()));
    }
  }
  sub.local = Graph::from_edges(nodes.size(), edges, /*keep_self_loops=*/true);
  if (graph.has_attributes()) {
    const auto& x = graph.attributes();
    DenseMatrix rows(static_cast<Eigen::Index>(nodes.size()), x.cols());
    for (std::size_t i = 0; i < nodes.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = x.row(nodes[i]);
    sub.local_attributes = std::move(rows);
  }
  if (graph.has_labels()) sub.label = graph.labels()[center];
  sub.node_ids = std::move(nodes);
  return sub;
}

/// Independently removes each undirected edge with probability `drop`.
inline Graph drop_edges(const Graph& graph, double drop, Engine& eng) {
  std::vector<Edge> kept;
  for (auto e : graph.edge_list())
    if (uniform01(eng) >= drop) kept.push_back(e);
  return Graph::from_edges(graph.num_nodes(), kept, /*keep_self_loops=*/true);
}

}  // namespace graphcontrol
