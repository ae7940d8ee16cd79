#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "graphcontrol/errors.hpp"
#include "graphcontrol/graph.hpp"

namespace graphcontrol {

/// Eigenvectors of the k smallest normalized-Laplacian eigenvalues, one per
/// column in ascending eigenvalue order. Columns past the node count are zero.
struct PositionalEmbedding {
  DenseMatrix matrix;           // N x k
  Eigen::VectorXd eigenvalues;  // min(N, k)
};

inline DenseMatrix dense_adjacency(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  DenseMatrix a = DenseMatrix::Zero(n, n);
  for (Eigen::Index u = 0; u < n; ++u)
    for (auto v : g.neighbors(static_cast<NodeId>(u))) a(u, v) = 1.0;
  return a;
}

/// I - D^{-1/2} W D^{-1/2} for a symmetric non-negative weight matrix. A row
/// with zero degree gets D^{-1/2} = 0, i.e. a unit diagonal and no coupling.
/// Diagonal weights (self-loops) count toward the degree.
inline DenseMatrix normalized_laplacian(const DenseMatrix& weights) {
  const auto n = weights.rows();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = weights.row(i).sum();
    inv_sqrt(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  DenseMatrix lap(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      lap(i, j) = (i == j ? 1.0 : 0.0) - weights(i, j) * inv_sqrt(i) * inv_sqrt(j);
  return lap;
}

inline DenseMatrix normalized_laplacian(const Graph& g) { return normalized_laplacian(dense_adjacency(g)); }

namespace detail {

// Flip so the largest-magnitude entry (lowest index on ties) is non-negative.
inline void normalize_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
  if (v(arg) < 0.0) v = -v;
}

inline bool lexicographic_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a(i) != b(i)) return a(i) < b(i);
  return false;
}

inline constexpr double kEigenTieTolerance = 1e-10;

}  // namespace detail

/// Positional embedding of an arbitrary symmetric weight matrix. Both the
/// structural embedding and the condition embedding go through here.
inline PositionalEmbedding positional_embedding(const DenseMatrix& weights, std::size_t k = 32) {
  const auto n = weights.rows();
  if (n < 1 || k < 1) throw NumericalError("positional_embedding: empty matrix or k = 0");
  if (!weights.allFinite()) throw NumericalError("positional_embedding: adjacency contains non-finite values");

  const Eigen::MatrixXd lap = normalized_laplacian(weights);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eigensolver did not converge: N=" << n << ", ||L||_F=" << lap.norm()
        << ", min=" << lap.minCoeff() << ", max=" << lap.maxCoeff();
    throw NumericalError(msg.str());
  }

  const auto m = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), n);
  std::vector<Eigen::VectorXd> vectors(static_cast<std::size_t>(m));
  std::vector<double> values(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    vectors[j] = solver.eigenvectors().col(j);
    detail::normalize_sign(vectors[j]);
    values[j] = solver.eigenvalues()(j);
  }
  // Within a degenerate eigenspace order columns lexicographically.
  std::size_t begin = 0;
  while (begin < values.size()) {
    std::size_t end = begin + 1;
    while (end < values.size() && values[end] - values[end - 1] <= detail::kEigenTieTolerance) ++end;
    if (end - begin > 1) {
      std::vector<std::size_t> order(end - begin);
      std::iota(order.begin(), order.end(), begin);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return detail::lexicographic_less(vectors[a], vectors[b]); });
      std::vector<Eigen::VectorXd> sorted;
      for (auto idx : order) sorted.push_back(vectors[idx]);
      for (std::size_t i = begin; i < end; ++i) vectors[i] = std::move(sorted[i - begin]);
    }
    begin = end;
  }

  PositionalEmbedding pe;
  pe.matrix = DenseMatrix::Zero(n, static_cast<Eigen::Index>(k));
  pe.eigenvalues.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    pe.matrix.col(j) = vectors[j];
    pe.eigenvalues(j) = values[j];
  }
  return pe;
}

inline PositionalEmbedding positional_embedding(const Graph& g, std::size_t k = 32) {
  return positional_embedding(dense_adjacency(g), k);
}

}  // namespace graphcontrol
