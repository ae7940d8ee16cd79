#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "graphcontrol/errors.hpp"
#include "graphcontrol/nn.hpp"
#include "graphcontrol/rng.hpp"
#include "graphcontrol/spectral.hpp"

namespace graphcontrol {

struct TensorGradientError {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // entries whose perturbation flipped a ReLU
};

struct GradientReport {
  double max_relative_error = 0.0;
  std::vector<TensorGradientError> tensors;
};

struct GradcheckOptions {
  double step = 1e-5;
  // Denominator floor: error = |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  std::size_t max_entries_per_tensor = 0;  // 0 checks every entry
};

struct LossProbe {
  double loss = 0.0;
  std::uint64_t signature = 0;
};

struct CheckedTensor {
  std::string name;
  Tensor<double>* value;
  const Tensor<double>* analytic;
};

/// Compares analytic gradients with central differences of `probe`. Entries
/// where the +h or -h evaluation changes the activation signature sit on a
/// ReLU kink and are skipped (counted in the report).
inline GradientReport finite_difference_check(const std::vector<CheckedTensor>& tensors,
                                              const std::function<LossProbe()>& probe,
                                              const GradcheckOptions& opts = {}) {
  GradientReport report;
  const auto base = probe();
  for (const auto& t : tensors) {
    if (!t.analytic->allFinite()) throw NumericalError("non-finite analytic gradient in " + t.name);
    TensorGradientError err{t.name};
    const auto size = static_cast<std::size_t>(t.value->size());
    const std::size_t stride = opts.max_entries_per_tensor && size > opts.max_entries_per_tensor
                                   ? (size + opts.max_entries_per_tensor - 1) / opts.max_entries_per_tensor
                                   : 1;
    for (std::size_t i = 0; i < size; i += stride) {
      double& x = t.value->data()[i];
      const double saved = x;
      x = saved + opts.step;
      const auto plus = probe();
      x = saved - opts.step;
      const auto minus = probe();
      x = saved;
      if (plus.signature != base.signature || minus.signature != base.signature) {
        ++err.skipped;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * opts.step);
      const double analytic = t.analytic->data()[i];
      if (!std::isfinite(numeric)) throw NumericalError("non-finite numerical gradient in " + t.name);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), opts.floor});
      err.max_relative_error = std::max(err.max_relative_error, std::abs(analytic - numeric) / denom);
      ++err.checked;
    }
    report.max_relative_error = std::max(report.max_relative_error, err.max_relative_error);
    report.tensors.push_back(std::move(err));
  }
  return report;
}

/// One labelled subgraph for a gradient probe.
struct ProbeSample {
  Graph graph;
  Tensor<double> positional;
  Tensor<double> condition;
  std::optional<Tensor<double>> attributes;
  int label = 0;

  ModelInput<double> input() const {
    return {graph, positional, condition, attributes ? &*attributes : nullptr};
  }
};

/// Mean cross-entropy of the classifier on `batch`; optionally accumulates
/// the analytic gradient of the trainable parameters into `grad`.
inline LossProbe classification_loss(const GraphControlModel<double>& model, const std::vector<ProbeSample>& batch,
                                     GraphControlModel<double>* grad) {
  LossProbe out;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    ForwardTrace<double> tr;
    const auto in = s.input();
    const Tensor<double> rep = represent(model, in, &tr);
    const Tensor<double> logits = model.classifier.forward(rep);
    Tensor<double> d_logits;
    out.loss += scale * softmax_cross_entropy(logits, s.label, scale, grad ? &d_logits : nullptr);
    out.signature = out.signature * 0x100000001b3ULL ^ activation_signature(tr);
    if (grad) {
      const Tensor<double> d_rep = model.classifier.backward(rep, d_logits, &grad->classifier);
      represent_backward(model, in, tr, d_rep, *grad);
    }
  }
  return out;
}

/// Finite-difference verification of every trainable tensor of `model`
/// under the classification loss. Frozen tensors are not part of the check.
inline GradientReport backprop_check(GraphControlModel<double>& model, const std::vector<ProbeSample>& batch,
                                     const GradcheckOptions& opts = {}) {
  if (batch.empty()) throw DataError("backprop_check: empty probe batch");
  auto grad = model.zeros_like();
  classification_loss(model, batch, &grad);
  std::vector<CheckedTensor> tensors;
  visit_trainable(model, grad, [&](const std::string& name, Tensor<double>& p, Tensor<double>& g) {
    tensors.push_back({name, &p, &g});
  });
  return finite_difference_check(tensors, [&] { return classification_loss(model, batch, nullptr); }, opts);
}

struct GradientSuiteOptions {
  std::size_t nodes = 5;
  int classes = 3;
  std::size_t batch = 2;
  std::size_t positional_dim = kPositionalDim;
  std::size_t hidden_dim = kHiddenDim;
  std::size_t layers = kGinLayers;
  std::size_t attribute_dim = 6;
  std::uint64_t seed = 0;
  GradcheckOptions check;
};

struct NamedGradientReport {
  std::string name;
  Architecture arch;
  GradientReport report;
};

/// Random connected probe subgraphs with P from the spectral module and
/// random P' and attributes.
inline std::vector<ProbeSample> random_probe_batch(const GradientSuiteOptions& o, Engine& eng) {
  std::vector<ProbeSample> batch;
  for (std::size_t b = 0; b < o.batch; ++b) {
    std::vector<Edge> edges;
    for (NodeId v = 1; v < o.nodes; ++v) edges.emplace_back(static_cast<NodeId>(uniform_index(eng, v)), v);
    for (std::size_t extra = 0; extra < o.nodes / 2; ++extra) {
      const auto u = static_cast<NodeId>(uniform_index(eng, o.nodes));
      const auto v = static_cast<NodeId>(uniform_index(eng, o.nodes));
      if (u != v) edges.emplace_back(u, v);
    }
    ProbeSample s;
    s.graph = Graph::from_edges(o.nodes, edges);
    s.positional = positional_embedding(s.graph, o.positional_dim).matrix;
    s.condition = Tensor<double>(static_cast<Eigen::Index>(o.nodes), static_cast<Eigen::Index>(o.positional_dim));
    for (Eigen::Index i = 0; i < s.condition.size(); ++i) s.condition.data()[i] = uniform(eng, -1.0, 1.0);
    Tensor<double> x(static_cast<Eigen::Index>(o.nodes), static_cast<Eigen::Index>(o.attribute_dim));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(eng, 0.0, 1.0);
    s.attributes = std::move(x);
    s.label = static_cast<int>(uniform_index(eng, static_cast<std::uint64_t>(o.classes)));
    batch.push_back(std::move(s));
  }
  return batch;
}

/// Finite-difference check of every architecture variant: classifier only,
/// the full composition with trainable copy and zero MLPs, prompts, the
/// trainable frozen branch, the control branch alone and the attribute
/// branch. Zero MLPs and prompts get random non-zero values so every
/// gradient path is exercised.
inline std::vector<NamedGradientReport> gradient_suite(const GradientSuiteOptions& o) {
  struct Variant {
    const char* name;
    Architecture arch;
  };
  const std::vector<Variant> variants{
      {"classifier", {true, false, false, false, false, false}},
      {"graphcontrol", {true, true, false, false, false, true}},
      {"prompt", {true, true, false, true, false, false}},
      {"all_trainable", {true, true, false, false, true, true}},
      {"control_only", {false, true, false, false, false, true}},
      {"attribute_branch", {true, false, true, false, false, false}},
  };
  Engine eng(derive_seed(o.seed, {0x6c4eULL}));
  const auto batch = random_probe_batch(o, eng);
  std::vector<NamedGradientReport> out;
  for (const auto& v : variants) {
    const auto enc = GinEncoder<double>::glorot(o.positional_dim, o.hidden_dim, o.layers, eng);
    auto m = GraphControlModel<double>::from_pretrained(enc, static_cast<std::size_t>(o.classes), eng, v.arch);
    m.copy = GinEncoder<double>::glorot(o.positional_dim, o.hidden_dim, o.layers, eng);
    for (auto* t : {&m.z1.weight, &m.z1.bias, &m.z2.weight, &m.z2.bias, &m.prompt, &m.condition_prompt})
      for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] = uniform(eng, -0.3, 0.3);
    for (auto& layer : m.copy.layers) layer.eps(0, 0) = uniform(eng, -0.2, 0.2);
    if (v.arch.attribute_branch) m.attribute_encoder = GinEncoder<double>::glorot(o.attribute_dim, o.hidden_dim, o.layers, eng);
    out.push_back({v.name, v.arch, backprop_check(m, batch, o.check)});
  }
  return out;
}

}  // namespace graphcontrol
