#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphcontrol/checkpoint.hpp"
#include "graphcontrol/errors.hpp"
#include "graphcontrol/graph.hpp"
#include "graphcontrol/nn.hpp"
#include "graphcontrol/optim.hpp"
#include "graphcontrol/parallel.hpp"
#include "graphcontrol/rng.hpp"
#include "graphcontrol/sampler.hpp"
#include "graphcontrol/spectral.hpp"

namespace graphcontrol {

struct PretrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double learning_rate = 0.005;
  double temperature = 0.07;
  std::size_t walk_steps = kDefaultWalkSteps;
  double restart_rate = kDefaultRestartRate;
  OptimizerKind optimizer = OptimizerKind::adam;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
  std::string loss = "infonce";        // "infonce" | "eq1-literal"
  std::string objective = "subgraph";  // "subgraph" | "aug-contrast"
  double edge_drop = 0.2;
  std::size_t batches_per_epoch = 0;   // 0 = one pass over all nodes
  std::size_t positional_dim = kPositionalDim;
  std::size_t hidden_dim = kHiddenDim;
  std::size_t layers = kGinLayers;

  void validate() const {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (loss != "infonce" && loss != "eq1-literal") throw ConfigError("loss must be 'infonce' or 'eq1-literal'");
    if (objective != "subgraph" && objective != "aug-contrast")
      throw ConfigError("objective must be 'subgraph' or 'aug-contrast'");
    if (!(edge_drop >= 0.0 && edge_drop < 1.0)) throw ConfigError("edge_drop must lie in [0, 1)");
  }
};

inline nlohmann::json to_json(const PretrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"temperature", c.temperature},
          {"walk_steps", c.walk_steps},
          {"restart_rate", c.restart_rate},
          {"optimizer", to_string(c.optimizer)},
          {"weight_decay", c.weight_decay},
          {"seed", c.seed},
          {"loss", c.loss},
          {"objective", c.objective},
          {"edge_drop", c.edge_drop},
          {"batches_per_epoch", c.batches_per_epoch},
          {"positional_dim", c.positional_dim},
          {"hidden_dim", c.hidden_dim},
          {"layers", c.layers}};
}

template <class S>
struct ContrastiveResult {
  S loss{};
  Tensor<S> grad_anchor;
  Tensor<S> grad_positive;
};

/// Normalized-similarity InfoNCE with in-batch negatives:
/// logits_ij = cos(a_i, p_j) / tau, loss = mean_i CE(logits_i, target i).
template <class S>
ContrastiveResult<S> infonce_loss(const Tensor<S>& anchors, const Tensor<S>& positives, S temperature) {
  const auto b = anchors.rows();
  if (b < 2 || positives.rows() != b || positives.cols() != anchors.cols())
    throw DataError("infonce_loss: need two B x l matrices with B >= 2");
  auto unit_rows = [](const Tensor<S>& x, Eigen::Matrix<S, Eigen::Dynamic, 1>& norms) {
    norms = x.rowwise().norm();
    for (Eigen::Index i = 0; i < norms.size(); ++i)
      if (!(norms(i) > S(0))) throw NumericalError("infonce_loss: zero-norm embedding row " + std::to_string(i));
    Tensor<S> u = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) u.row(i) /= norms(i);
    return u;
  };
  Eigen::Matrix<S, Eigen::Dynamic, 1> na, np;
  const Tensor<S> ua = unit_rows(anchors, na);
  const Tensor<S> up = unit_rows(positives, np);
  const Tensor<S> logits = (ua * up.transpose()) / temperature;

  ContrastiveResult<S> out;
  Tensor<S> g(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const S max = logits.row(i).maxCoeff();
    const auto e = (logits.row(i).array() - max).exp();
    const S z = e.sum();
    out.loss += (max + std::log(z) - logits(i, i)) / static_cast<S>(b);
    g.row(i) = (e / z).matrix() / static_cast<S>(b);
    g(i, i) -= S(1) / static_cast<S>(b);
  }
  const Tensor<S> d_ua = g * up / temperature;
  const Tensor<S> d_up = g.transpose() * ua / temperature;
  auto through_norm = [](const Tensor<S>& u, const Tensor<S>& du, const Eigen::Matrix<S, Eigen::Dynamic, 1>& norms) {
    Tensor<S> d(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < u.rows(); ++i) d.row(i) = (du.row(i) - u.row(i) * u.row(i).dot(du.row(i))) / norms(i);
    return d;
  };
  out.grad_anchor = through_norm(ua, d_ua, na);
  out.grad_positive = through_norm(up, d_up, np);
  return out;
}

/// The energy form exactly as printed:
/// -E_i |a_i - p_i|^2 + E_i log E_j exp(|a_i - p_j|^2).
template <class S>
ContrastiveResult<S> eq1_literal_loss(const Tensor<S>& anchors, const Tensor<S>& positives) {
  const auto b = anchors.rows();
  if (b < 2 || positives.rows() != b) throw DataError("eq1_literal_loss: need two B x l matrices with B >= 2");
  const S inv_b = S(1) / static_cast<S>(b);
  Tensor<S> dist(b, b);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < b; ++j) dist(i, j) = (anchors.row(i) - positives.row(j)).squaredNorm();
  ContrastiveResult<S> out;
  out.grad_anchor = Tensor<S>::Zero(b, anchors.cols());
  out.grad_positive = Tensor<S>::Zero(b, anchors.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    out.loss -= inv_b * dist(i, i);
    out.grad_anchor.row(i) -= S(2) * inv_b * (anchors.row(i) - positives.row(i));
    out.grad_positive.row(i) += S(2) * inv_b * (anchors.row(i) - positives.row(i));
    const S max = dist.row(i).maxCoeff();
    const auto e = (dist.row(i).array() - max).exp();
    const S z = e.sum();
    out.loss += inv_b * (max + std::log(z * inv_b));
    for (Eigen::Index j = 0; j < b; ++j) {
      const S w = e(j) / z;
      out.grad_anchor.row(i) += S(2) * inv_b * w * (anchors.row(i) - positives.row(j));
      out.grad_positive.row(j) -= S(2) * inv_b * w * (anchors.row(i) - positives.row(j));
    }
  }
  return out;
}

/// One sampled view for contrastive training: a subgraph structure and its
/// positional embedding.
struct StructuralView {
  Graph graph;
  Tensor<float> positional;
};

namespace detail {

inline StructuralView make_view(const Graph& graph, NodeId center, const PretrainConfig& cfg, std::size_t epoch,
                                std::uint64_t view_tag, const Graph* shared = nullptr) {
  Graph local;
  if (shared) {
    Engine eng(derive_seed(cfg.seed, {epoch, center, view_tag, 0xd209ULL}));
    local = drop_edges(*shared, cfg.edge_drop, eng);
  } else {
    const auto nodes =
        rwr_sample(graph, center, cfg.walk_steps, cfg.restart_rate, derive_seed(cfg.seed, {epoch, center, view_tag}));
    local = induce_subgraph(graph, nodes, center).local;
  }
  auto pe = positional_embedding(local, cfg.positional_dim);
  return {std::move(local), pe.matrix.cast<float>()};
}

}  // namespace detail

struct PretrainProgress {
  std::size_t epoch;
  double loss;
};

/// Subgraph instance discrimination on structure alone. Two RWR subgraphs of
/// the same center form a positive pair; the other centers in the batch are
/// negatives. Deterministic given the config, independent of `workers`.
inline Checkpoint pretrain(const StructureView& view, const PretrainConfig& cfg, int workers = 1,
                           const std::function<void(const PretrainProgress&)>& on_epoch = {}) {
  cfg.validate();
  const Graph& graph = view.graph();
  const auto n = graph.num_nodes();
  if (n < cfg.batch_size) throw DataError("pretrain: graph has fewer nodes than batch_size");
  if (graph.num_edges() == 0) throw DataError("pretrain: graph has no edges");

  Engine init(derive_seed(cfg.seed, {0x1417ULL}));
  Checkpoint ckpt;
  ckpt.encoder = GinEncoder<float>::glorot(cfg.positional_dim, cfg.hidden_dim, cfg.layers, init);
  ckpt.config = to_json(cfg);

  Optimizer<float> opt({cfg.optimizer, cfg.learning_rate, cfg.weight_decay});
  std::vector<Tensor<float>*> params;
  GinEncoder<float> grad = ckpt.encoder.zeros_like();
  std::vector<Tensor<float>*> grads;
  ckpt.encoder.visit("", [&](const std::string&, Tensor<float>& t) { params.push_back(&t); });
  grad.visit("", [&](const std::string&, Tensor<float>& t) { grads.push_back(&t); });

  constexpr std::size_t kChunk = 16;
  const auto l = static_cast<Eigen::Index>(cfg.hidden_dim);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), NodeId{0});
    Engine shuffler(derive_seed(cfg.seed, {epoch, 0x5fULL}));
    shuffle(order.begin(), order.end(), shuffler);
    std::size_t num_batches = n / cfg.batch_size;
    if (cfg.batches_per_epoch) num_batches = std::min(num_batches, cfg.batches_per_epoch);

    double epoch_loss = 0.0;
    for (std::size_t batch = 0; batch < num_batches; ++batch) {
      const auto b = cfg.batch_size;
      std::vector<StructuralView> views(2 * b);
      std::vector<GinTrace<float>> traces(2 * b);
      Tensor<float> anchors(static_cast<Eigen::Index>(b), l), positives(static_cast<Eigen::Index>(b), l);
      parallel_for(b, workers, [&](std::size_t s) {
        const NodeId center = order[batch * b + s];
        if (cfg.objective == "aug-contrast") {
          const auto nodes = rwr_sample(graph, center, cfg.walk_steps, cfg.restart_rate,
                                        derive_seed(cfg.seed, {epoch, center, 2}));
          const Graph shared = induce_subgraph(graph, nodes, center).local;
          views[2 * s] = detail::make_view(graph, center, cfg, epoch, 0, &shared);
          views[2 * s + 1] = detail::make_view(graph, center, cfg, epoch, 1, &shared);
        } else {
          views[2 * s] = detail::make_view(graph, center, cfg, epoch, 0);
          views[2 * s + 1] = detail::make_view(graph, center, cfg, epoch, 1);
        }
        anchors.row(static_cast<Eigen::Index>(s)) =
            readout(gin_forward(ckpt.encoder, views[2 * s].graph, views[2 * s].positional, &traces[2 * s]));
        positives.row(static_cast<Eigen::Index>(s)) =
            readout(gin_forward(ckpt.encoder, views[2 * s + 1].graph, views[2 * s + 1].positional, &traces[2 * s + 1]));
      });

      const auto result = cfg.loss == "infonce" ? infonce_loss<float>(anchors, positives, static_cast<float>(cfg.temperature))
                                                : eq1_literal_loss<float>(anchors, positives);
      if (!std::isfinite(result.loss)) throw NumericalError("pretrain: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += result.loss;

      // Fixed chunking keeps the gradient sum order independent of workers.
      const std::size_t chunks = (2 * b + kChunk - 1) / kChunk;
      std::vector<GinEncoder<float>> partial(chunks, ckpt.encoder.zeros_like());
      parallel_for(chunks, workers, [&](std::size_t c) {
        for (std::size_t v = c * kChunk; v < std::min(2 * b, (c + 1) * kChunk); ++v) {
          const auto& g = v % 2 == 0 ? result.grad_anchor : result.grad_positive;
          const Tensor<float> row = g.row(static_cast<Eigen::Index>(v / 2));
          gin_backward(ckpt.encoder, views[v].graph, traces[v],
                       readout_backward(row, static_cast<Eigen::Index>(views[v].graph.num_nodes())), &partial[c]);
        }
      });
      for (auto* t : grads) t->setZero();
      for (auto& p : partial) {
        std::size_t i = 0;
        p.visit("", [&](const std::string&, Tensor<float>& t) { *grads[i++] += t; });
      }
      opt.step(params, grads);
    }
    epoch_loss /= static_cast<double>(std::max<std::size_t>(num_batches, 1));
    ckpt.loss_curve.push_back(epoch_loss);
    if (on_epoch) on_epoch({epoch, epoch_loss});
  }
  return ckpt;
}

}  // namespace graphcontrol
