#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "graphcontrol/errors.hpp"
#include "graphcontrol/graph.hpp"
#include "graphcontrol/rng.hpp"
#include "graphcontrol/spectral.hpp"

namespace graphcontrol {

/// Binary feature adjacency A'. Stored as a graph whose every node carries a
/// self-loop.
struct FeatureAdjacency {
  Graph graph;

  DenseMatrix dense() const { return dense_adjacency(graph); }
};

/// Normalized linear kernel: K_ij = <x_i, x_j> / (|x_i| |x_j|), and 0 when
/// either row is all zeros. Exactly symmetric; unit diagonal for non-zero rows.
inline DenseMatrix cosine_kernel(const DenseMatrix& attributes) {
  if (attributes.rows() < 1 || attributes.cols() < 1) throw DataError("cosine_kernel: empty attribute matrix");
  if (!attributes.allFinite()) throw DataError("cosine_kernel: attributes contain non-finite values");
  const auto n = attributes.rows();
  const Eigen::VectorXd norms = attributes.rowwise().norm();
  DenseMatrix unit = attributes;
  for (Eigen::Index i = 0; i < n; ++i)
    if (norms(i) > 0.0) unit.row(i) /= norms(i);
  DenseMatrix k = unit * unit.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (norms(i) > 0.0 && norms(j) > 0.0) ? std::clamp(k(i, j), -1.0, 1.0) : 0.0;
      k(i, j) = v;
      k(j, i) = v;
    }
    k(i, i) = norms(i) > 0.0 ? 1.0 : 0.0;
  }
  return k;
}

/// A'_ij = 1 iff K_ij > v, with the diagonal forced to 1.
inline FeatureAdjacency discretize(const DenseMatrix& kernel, double v) {
  if (!std::isfinite(v)) throw ConfigError("discretize: threshold must be finite");
  const auto n = kernel.rows();
  std::vector<Edge> edges;
  for (Eigen::Index i = 0; i < n; ++i) {
    edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(i));
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (kernel(i, j) > v) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
  }
  return {Graph::from_edges(static_cast<std::size_t>(n), edges, /*keep_self_loops=*/true)};
}

/// P' = positional embedding of A' (self-loops included in the degrees).
inline PositionalEmbedding condition_embedding(const FeatureAdjacency& adjacency, std::size_t k = 32) {
  return positional_embedding(adjacency.dense(), k);
}

/// Weighted condition for the soft-kernel ablation: K with negative entries
/// zeroed, embedded as a weighted adjacency.
inline PositionalEmbedding soft_condition_embedding(const DenseMatrix& kernel, std::size_t k = 32) {
  return positional_embedding(DenseMatrix(kernel.cwiseMax(0.0).cwiseMin(1.0)), k);
}

struct DeepWalkConfig {
  std::size_t dim = 64;
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 40;
  std::size_t window = 10;
  std::size_t negatives = 5;
  std::size_t epochs = 1;
  double learning_rate = 0.025;
  std::uint64_t seed = 0;
};

/// Uniform random walks + skip-gram with negative sampling. A negative that
/// coincides with the positive target is kept as a negative. Returns N x dim
/// embeddings with unit-norm rows. Single-threaded and seeded, so repeatable.
inline DenseMatrix deepwalk_embed(const Graph& graph, const DeepWalkConfig& cfg) {
  const auto n = graph.num_nodes();
  if (graph.num_edges() == 0) throw DataError("deepwalk_embed: graph has no edges");
  if (cfg.dim < 2) throw ConfigError("deepwalk_embed: dim must be at least 2");
  if (cfg.walk_length < 2 || cfg.window < 1) throw ConfigError("deepwalk_embed: walk_length >= 2 and window >= 1 required");
  Engine eng(cfg.seed);

  std::vector<std::vector<NodeId>> walks;
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  for (std::size_t r = 0; r < cfg.walks_per_node; ++r) {
    shuffle(order.begin(), order.end(), eng);
    for (auto start : order) {
      if (graph.degree(start) == 0) continue;
      std::vector<NodeId> walk{start};
      while (walk.size() < cfg.walk_length) {
        const auto nb = graph.neighbors(walk.back());
        walk.push_back(nb[uniform_index(eng, nb.size())]);
      }
      walks.push_back(std::move(walk));
    }
  }

  // Negative-sampling distribution: corpus frequency ^ 0.75.
  std::vector<double> cdf(n, 0.0);
  for (const auto& w : walks)
    for (auto v : w) cdf[v] += 1.0;
  double acc = 0.0;
  for (auto& c : cdf) acc = c = acc + std::pow(c, 0.75);
  for (auto& c : cdf) c /= acc;
  auto draw_negative = [&] {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), uniform01(eng));
    return static_cast<NodeId>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(n) - 1));
  };

  const auto d = static_cast<Eigen::Index>(cfg.dim);
  DenseMatrix emb(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index i = 0; i < emb.size(); ++i) emb.data()[i] = uniform(eng, -0.5, 0.5) / static_cast<double>(cfg.dim);
  DenseMatrix ctx = DenseMatrix::Zero(static_cast<Eigen::Index>(n), d);

  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-std::clamp(x, -30.0, 30.0))); };
  std::size_t total_pairs = 0;
  for (const auto& w : walks) total_pairs += w.size();
  total_pairs *= cfg.epochs;
  std::size_t seen = 0;
  Eigen::RowVectorXd grad_in(d);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& walk : walks) {
      for (std::size_t i = 0; i < walk.size(); ++i) {
        const double lr = cfg.learning_rate *
                          std::max(1e-4, 1.0 - static_cast<double>(seen++) / static_cast<double>(total_pairs + 1));
        const auto center = walk[i];
        const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
        const std::size_t hi = std::min(walk.size() - 1, i + cfg.window);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const auto target = walk[j];
          grad_in.setZero();
          for (std::size_t s = 0; s <= cfg.negatives; ++s) {
            NodeId out = target;
            double label = 1.0;
            if (s > 0) {
              out = draw_negative();
              label = 0.0;
            }
            const double g = (label - sigmoid(emb.row(center).dot(ctx.row(out)))) * lr;
            grad_in += g * ctx.row(out);
            ctx.row(out) += g * emb.row(center);
          }
          emb.row(center) += grad_in;
        }
      }
    }
  }
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    const double norm = emb.row(i).norm();
    if (norm > 0.0) emb.row(i) /= norm;
  }
  return emb;
}

}  // namespace graphcontrol
