#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "graphcontrol/graph.hpp"
#include "graphcontrol/rng.hpp"

// Small generated graphs for tests, samples and offline surrogates of the
// benchmark datasets.

namespace graphcontrol {

/// Planted partition: `sizes[c]` nodes in block c, edge probability p_in
/// inside a block and p_out across blocks. Node labels are block ids.
inline Graph stochastic_block_graph(const std::vector<std::size_t>& sizes, double p_in, double p_out, std::uint64_t seed) {
  std::vector<int> block;
  for (std::size_t c = 0; c < sizes.size(); ++c) block.insert(block.end(), sizes[c], static_cast<int>(c));
  const auto n = block.size();
  Engine eng(seed);
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (uniform01(eng) < (block[u] == block[v] ? p_in : p_out)) edges.emplace_back(u, v);
  return Graph::from_edges(n, edges).with_labels(block, static_cast<int>(sizes.size()));
}

struct SyntheticCitationOptions {
  std::size_t nodes = 600;
  int classes = 7;
  double average_degree = 5.0;
  double homophily = 0.8;     // fraction of edges inside a class
  std::size_t vocabulary = 300;
  std::size_t words_per_node = 18;
  double topic_purity = 0.35;  // probability that a word comes from the class topic
  std::uint64_t seed = 0;
};

/// A citation-like graph: homophilous block structure and bag-of-words
/// attributes in which each class has its own topic slice of the vocabulary.
/// Structure is only weakly informative, attributes moderately so.
inline DatasetBundle synthetic_citation(const SyntheticCitationOptions& o) {
  Engine eng(o.seed);
  const auto n = o.nodes;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(uniform_index(eng, static_cast<std::uint64_t>(o.classes)));
  std::vector<std::vector<NodeId>> members(static_cast<std::size_t>(o.classes));
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(static_cast<NodeId>(i));

  const auto m = static_cast<std::size_t>(o.average_degree * static_cast<double>(n) / 2.0);
  std::vector<Edge> edges;
  while (edges.size() < m) {
    const auto u = static_cast<NodeId>(uniform_index(eng, n));
    NodeId v;
    if (uniform01(eng) < o.homophily) {
      const auto& same = members[static_cast<std::size_t>(labels[u])];
      v = same[uniform_index(eng, same.size())];
    } else {
      v = static_cast<NodeId>(uniform_index(eng, n));
    }
    if (u != v) edges.emplace_back(u, v);
  }

  DenseMatrix x = DenseMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(o.vocabulary));
  const std::size_t slice = o.vocabulary / static_cast<std::size_t>(o.classes);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t w = 0; w < o.words_per_node; ++w) {
      std::size_t word;
      if (uniform01(eng) < o.topic_purity)
        word = static_cast<std::size_t>(labels[i]) * slice + uniform_index(eng, slice);
      else
        word = uniform_index(eng, o.vocabulary);
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(word)) = 1.0;
    }
  }
  DatasetBundle b;
  b.graph = Graph::from_edges(n, edges).with_attributes(std::move(x)).with_labels(std::move(labels), o.classes);
  b.name = "synthetic_citation";
  b.is_attributed = true;
  return b;
}

/// An airport-like network without attributes: a preferential-attachment
/// graph whose labels are activity quartiles (degree rank), so the classes
/// are structural roles.
inline DatasetBundle synthetic_airport(std::size_t nodes, std::size_t attach, std::uint64_t seed) {
  Engine eng(seed);
  std::vector<Edge> edges;
  std::vector<NodeId> targets;
  for (NodeId v = 0; v <= attach; ++v)
    for (NodeId u = 0; u < v; ++u) {
      edges.emplace_back(u, v);
      targets.push_back(u);
      targets.push_back(v);
    }
  for (auto v = static_cast<NodeId>(attach + 1); v < nodes; ++v) {
    for (std::size_t a = 0; a < attach; ++a) {
      const NodeId u = targets[uniform_index(eng, targets.size())];
      edges.emplace_back(u, v);
      targets.push_back(u);
      targets.push_back(v);
    }
  }
  Graph g = Graph::from_edges(nodes, edges);
  std::vector<NodeId> order(nodes);
  for (std::size_t i = 0; i < nodes; ++i) order[i] = static_cast<NodeId>(i);
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return g.degree(a) < g.degree(b); });
  std::vector<int> labels(nodes);
  for (std::size_t r = 0; r < nodes; ++r) labels[order[r]] = static_cast<int>(4 * r / nodes);
  DatasetBundle b;
  b.graph = g.with_labels(std::move(labels), 4);
  b.name = "synthetic_airport";
  return b;
}

}  // namespace graphcontrol
