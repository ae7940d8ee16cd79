#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphcontrol/errors.hpp"
#include "graphcontrol/graph.hpp"
#include "graphcontrol/rng.hpp"

// Differentiable core. Every layer has an explicit forward pass that records
// what its adjoint needs and a backward pass that accumulates parameter
// gradients and returns the gradient with respect to its input. Training runs
// in float; gradient verification instantiates the same templates in double.

namespace graphcontrol {

template <class S>
using Tensor = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::size_t kPositionalDim = 32;
inline constexpr std::size_t kHiddenDim = 64;
inline constexpr std::size_t kGinLayers = 4;

template <class S>
Tensor<S> relu(const Tensor<S>& x) {
  return x.cwiseMax(S(0));
}

template <class S>
void glorot_fill(Tensor<S>& w, Engine& eng) {
  const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<S>(uniform(eng, -a, a));
}

/// y = x W + b, with W stored in x out.
template <class S>
struct Affine {
  Tensor<S> weight;
  Tensor<S> bias;  // 1 x out

  static Affine zeros(std::size_t in, std::size_t out) {
    return {Tensor<S>::Zero(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out)),
            Tensor<S>::Zero(1, static_cast<Eigen::Index>(out))};
  }
  static Affine glorot(std::size_t in, std::size_t out, Engine& eng) {
    Affine a = zeros(in, out);
    glorot_fill(a.weight, eng);
    return a;
  }

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.cols()); }

  Tensor<S> forward(const Tensor<S>& x) const {
    Tensor<S> y = x * weight;
    y.rowwise() += bias.row(0);
    return y;
  }

  /// Accumulates into `grad` (if given) and returns d/dx.
  Tensor<S> backward(const Tensor<S>& x, const Tensor<S>& grad_out, Affine* grad) const {
    if (grad) {
      grad->weight.noalias() += x.transpose() * grad_out;
      grad->bias += grad_out.colwise().sum();
    }
    return grad_out * weight.transpose();
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

/// One GIN layer: h <- MLP((1 + eps) h + sum_{u in N(v)} h_u), where the MLP
/// is affine -> ReLU -> affine.
template <class S>
struct GinLayer {
  Tensor<S> eps;  // 1 x 1
  Affine<S> fc1;
  Affine<S> fc2;
};

template <class S>
struct GinEncoder {
  std::vector<GinLayer<S>> layers;

  static GinEncoder glorot(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_layers, Engine& eng) {
    GinEncoder enc;
    for (std::size_t t = 0; t < num_layers; ++t) {
      const auto in = t == 0 ? input_dim : hidden_dim;
      enc.layers.push_back({Tensor<S>::Zero(1, 1), Affine<S>::glorot(in, hidden_dim, eng),
                            Affine<S>::glorot(hidden_dim, hidden_dim, eng)});
    }
    return enc;
  }
  static GinEncoder zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_layers) {
    GinEncoder enc;
    for (std::size_t t = 0; t < num_layers; ++t) {
      const auto in = t == 0 ? input_dim : hidden_dim;
      enc.layers.push_back({Tensor<S>::Zero(1, 1), Affine<S>::zeros(in, hidden_dim), Affine<S>::zeros(hidden_dim, hidden_dim)});
    }
    return enc;
  }
  GinEncoder zeros_like() const { return zeros(input_dim(), output_dim(), layers.size()); }

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().fc1.in_dim(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().fc2.out_dim(); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t t = 0; t < layers.size(); ++t) {
      const auto p = prefix + ".layers." + std::to_string(t);
      f(p + ".eps", layers[t].eps);
      layers[t].fc1.visit(p + ".fc1", f);
      layers[t].fc2.visit(p + ".fc2", f);
    }
  }

  template <class T>
  GinEncoder<T> cast() const {
    GinEncoder<T> out;
    for (const auto& l : layers)
      out.layers.push_back({l.eps.template cast<T>(), {l.fc1.weight.template cast<T>(), l.fc1.bias.template cast<T>()},
                            {l.fc2.weight.template cast<T>(), l.fc2.bias.template cast<T>()}});
    return out;
  }
};

/// Sum over neighbors plus (1 + eps) times self.
template <class S>
Tensor<S> aggregate(const Graph& graph, const Tensor<S>& h, S eps) {
  Tensor<S> out = (S(1) + eps) * h;
  for (Eigen::Index v = 0; v < h.rows(); ++v)
    for (auto u : graph.neighbors(static_cast<NodeId>(v))) out.row(v) += h.row(u);
  return out;
}

template <class S>
struct GinTrace {
  std::vector<Tensor<S>> inputs;      // h entering layer t
  std::vector<Tensor<S>> aggregated;  // (1 + eps) h + A h
  std::vector<Tensor<S>> hidden_pre;  // fc1 output before ReLU
  std::vector<Tensor<S>> output_pre;  // fc2 output before the inter-layer ReLU
};

template <class S>
Tensor<S> gin_forward(const GinEncoder<S>& enc, const Graph& graph, const Tensor<S>& x, GinTrace<S>* trace = nullptr) {
  if (static_cast<std::size_t>(x.rows()) != graph.num_nodes())
    throw DataError("gin_forward: input has " + std::to_string(x.rows()) + " rows for " +
                    std::to_string(graph.num_nodes()) + " nodes");
  if (static_cast<std::size_t>(x.cols()) != enc.input_dim())
    throw DataError("gin_forward: input width " + std::to_string(x.cols()) + " does not match encoder input " +
                    std::to_string(enc.input_dim()));
  Tensor<S> h = x;
  for (std::size_t t = 0; t < enc.layers.size(); ++t) {
    const auto& layer = enc.layers[t];
    Tensor<S> z = aggregate(graph, h, layer.eps(0, 0));
    Tensor<S> u = layer.fc1.forward(z);
    Tensor<S> o = layer.fc2.forward(relu(u));
    if (trace) {
      trace->inputs.push_back(std::move(h));
      trace->aggregated.push_back(std::move(z));
      trace->hidden_pre.push_back(u);
      trace->output_pre.push_back(o);
    }
    h = t + 1 < enc.layers.size() ? relu(o) : std::move(o);
  }
  return h;
}

/// Backpropagates `grad_out` (N x l) through the encoder. Parameter gradients
/// accumulate into `grad` when given; returns d/dx.
template <class S>
Tensor<S> gin_backward(const GinEncoder<S>& enc, const Graph& graph, const GinTrace<S>& trace, Tensor<S> grad_out,
                       GinEncoder<S>* grad) {
  for (std::size_t t = enc.layers.size(); t-- > 0;) {
    const auto& layer = enc.layers[t];
    GinLayer<S>* g = grad ? &grad->layers[t] : nullptr;
    if (t + 1 < enc.layers.size()) grad_out = grad_out.cwiseProduct((trace.output_pre[t].array() > S(0)).template cast<S>().matrix());
    const Tensor<S> hidden = relu(trace.hidden_pre[t]);
    Tensor<S> d_hidden = layer.fc2.backward(hidden, grad_out, g ? &g->fc2 : nullptr);
    d_hidden = d_hidden.cwiseProduct((trace.hidden_pre[t].array() > S(0)).template cast<S>().matrix());
    const Tensor<S> d_agg = layer.fc1.backward(trace.aggregated[t], d_hidden, g ? &g->fc1 : nullptr);
    if (g) g->eps(0, 0) += d_agg.cwiseProduct(trace.inputs[t]).sum();
    // Adjoint of the aggregation; the adjacency is symmetric.
    grad_out = aggregate(graph, d_agg, layer.eps(0, 0));
  }
  return grad_out;
}

/// Mean over rows.
template <class S>
Tensor<S> readout(const Tensor<S>& node_embeddings) {
  if (node_embeddings.rows() == 0) throw DataError("readout: empty input");
  return node_embeddings.colwise().mean();
}

template <class S>
Tensor<S> readout_backward(const Tensor<S>& grad, Eigen::Index rows) {
  Tensor<S> out(rows, grad.cols());
  out.rowwise() = grad.row(0) / static_cast<S>(rows);
  return out;
}

/// Which pieces of the composite model are active and which are trained.
struct Architecture {
  bool frozen_branch = true;      // g*(P)
  bool control_branch = true;     // Z2(g_c(P + Z1(P')))
  bool attribute_branch = false;  // from-scratch encoder on raw attributes
  bool prompts = false;           // additive prompt features on P and P'
  bool train_frozen = false;
  bool train_copy = true;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Frozen pre-trained encoder, its trainable copy, the two zero MLPs, a linear
/// classifier, and optional prompt vectors / attribute encoder.
template <class S>
struct GraphControlModel {
  Architecture arch;
  GinEncoder<S> frozen;
  GinEncoder<S> copy;
  GinEncoder<S> attribute_encoder;
  Affine<S> z1;
  Affine<S> z2;
  Affine<S> classifier;
  Tensor<S> prompt;            // q, 1 x k
  Tensor<S> condition_prompt;  // q', 1 x k

  std::size_t positional_dim() const { return frozen.input_dim(); }
  std::size_t embedding_dim() const { return frozen.output_dim(); }
  std::size_t num_classes() const { return classifier.out_dim(); }

  /// Builds the model around a pre-trained encoder: the copy is an exact
  /// parameter clone, the zero MLPs start at exactly zero, the classifier is
  /// Glorot-initialized.
  static GraphControlModel from_pretrained(const GinEncoder<S>& pretrained, std::size_t num_classes, Engine& eng,
                                           Architecture arch = {}) {
    GraphControlModel m;
    m.arch = arch;
    m.frozen = pretrained;
    m.copy = pretrained;
    const auto k = pretrained.input_dim();
    const auto l = pretrained.output_dim();
    m.z1 = Affine<S>::zeros(k, k);
    m.z2 = Affine<S>::zeros(l, l);
    m.classifier = Affine<S>::glorot(l, num_classes, eng);
    m.prompt = Tensor<S>::Zero(1, static_cast<Eigen::Index>(k));
    m.condition_prompt = Tensor<S>::Zero(1, static_cast<Eigen::Index>(k));
    return m;
  }

  /// Zero-valued model with identical shapes, used as a gradient buffer.
  GraphControlModel zeros_like() const {
    GraphControlModel g;
    g.arch = arch;
    g.frozen = frozen.zeros_like();
    g.copy = copy.zeros_like();
    if (!attribute_encoder.layers.empty()) g.attribute_encoder = attribute_encoder.zeros_like();
    g.z1 = Affine<S>::zeros(z1.in_dim(), z1.out_dim());
    g.z2 = Affine<S>::zeros(z2.in_dim(), z2.out_dim());
    g.classifier = Affine<S>::zeros(classifier.in_dim(), classifier.out_dim());
    g.prompt = Tensor<S>::Zero(prompt.rows(), prompt.cols());
    g.condition_prompt = Tensor<S>::Zero(condition_prompt.rows(), condition_prompt.cols());
    return g;
  }

  /// Visits every parameter tensor in a fixed order: f(name, tensor, trainable).
  template <class F>
  void visit(F&& f) {
    auto with = [&](bool trainable) {
      return [&f, trainable](const std::string& name, Tensor<S>& t) { f(name, t, trainable); };
    };
    frozen.visit("frozen", with(arch.frozen_branch && arch.train_frozen));
    copy.visit("copy", with(arch.control_branch && arch.train_copy));
    attribute_encoder.visit("attribute_encoder", with(arch.attribute_branch));
    z1.visit("z1", with(arch.control_branch));
    z2.visit("z2", with(arch.control_branch));
    classifier.visit("classifier", with(true));
    f("prompt", prompt, arch.prompts);
    f("condition_prompt", condition_prompt, arch.prompts);
  }

  std::size_t trainable_parameter_count() {
    std::size_t n = 0;
    visit([&](const std::string&, Tensor<S>& t, bool trainable) {
      if (trainable) n += static_cast<std::size_t>(t.size());
    });
    return n;
  }
};

/// Visits (name, parameter, gradient) for trainable tensors of `model`.
template <class S, class F>
void visit_trainable(GraphControlModel<S>& model, GraphControlModel<S>& grad, F&& f) {
  std::vector<std::pair<std::string, Tensor<S>*>> params;
  model.visit([&](const std::string& name, Tensor<S>& t, bool trainable) {
    if (trainable) params.emplace_back(name, &t);
  });
  std::size_t i = 0;
  grad.visit([&](const std::string&, Tensor<S>& g, bool trainable) {
    if (trainable) {
      f(params[i].first, *params[i].second, g);
      ++i;
    }
  });
}

/// Per-sample inputs: the subgraph structure, its positional embedding P,
/// condition embedding P', and (for the attribute branch) raw attributes.
template <class S>
struct ModelInput {
  const Graph& graph;
  const Tensor<S>& positional;
  const Tensor<S>& condition;
  const Tensor<S>* attributes = nullptr;
  // Precomputed readout(g*(P)); only valid while the frozen branch sees no
  // prompt and is not trained.
  const Tensor<S>* frozen_readout = nullptr;
};

template <class S>
struct ForwardTrace {
  Tensor<S> frozen_input;
  GinTrace<S> frozen;
  Tensor<S> condition_input;
  Tensor<S> control_input;
  GinTrace<S> copy;
  Tensor<S> copy_readout;
  GinTrace<S> attribute;
  Tensor<S> representation;
};

/// H_c = readout(g*(P + q)) + Z2(readout(g_c((P + q) + Z1(P' + q')))), with q
/// and q' present only under prompt tuning and each branch switchable by the
/// architecture flags. Returns 1 x l.
template <class S>
Tensor<S> represent(const GraphControlModel<S>& model, const ModelInput<S>& in, ForwardTrace<S>* trace = nullptr) {
  const auto n = static_cast<Eigen::Index>(in.graph.num_nodes());
  const auto k = static_cast<Eigen::Index>(model.positional_dim());
  if (in.positional.rows() != n || in.positional.cols() != k)
    throw DataError("positional embedding shape mismatch: expected " + std::to_string(n) + "x" + std::to_string(k));
  const auto& arch = model.arch;
  ForwardTrace<S> local;
  ForwardTrace<S>& tr = trace ? *trace : local;

  tr.frozen_input = in.positional;
  if (arch.prompts) tr.frozen_input.rowwise() += model.prompt.row(0);

  Tensor<S> rep = Tensor<S>::Zero(1, static_cast<Eigen::Index>(model.embedding_dim()));
  if (arch.frozen_branch) {
    if (in.frozen_readout && !arch.prompts && !arch.train_frozen)
      rep += *in.frozen_readout;
    else
      rep += readout(gin_forward(model.frozen, in.graph, tr.frozen_input, &tr.frozen));
  }

  if (arch.control_branch) {
    if (in.condition.rows() != n || in.condition.cols() != k)
      throw DataError("condition embedding shape mismatch: expected " + std::to_string(n) + "x" + std::to_string(k));
    tr.condition_input = in.condition;
    if (arch.prompts) tr.condition_input.rowwise() += model.condition_prompt.row(0);
    tr.control_input = tr.frozen_input + model.z1.forward(tr.condition_input);
    tr.copy_readout = readout(gin_forward(model.copy, in.graph, tr.control_input, &tr.copy));
    rep += model.z2.forward(tr.copy_readout);
  }

  if (arch.attribute_branch) {
    if (!in.attributes) throw DataError("attribute branch requires node attributes");
    rep += readout(gin_forward(model.attribute_encoder, in.graph, *in.attributes, &tr.attribute));
  }
  tr.representation = rep;
  return rep;
}

/// Backpropagates d(loss)/d(representation) into `grad` for trainable parts.
template <class S>
void represent_backward(const GraphControlModel<S>& model, const ModelInput<S>& in, const ForwardTrace<S>& tr,
                        const Tensor<S>& grad_rep, GraphControlModel<S>& grad) {
  const auto& arch = model.arch;
  const auto n = static_cast<Eigen::Index>(in.graph.num_nodes());
  Tensor<S> d_prompt = Tensor<S>::Zero(1, model.prompt.cols());

  if (arch.frozen_branch && (arch.train_frozen || arch.prompts)) {
    const Tensor<S> d_x = gin_backward(model.frozen, in.graph, tr.frozen, readout_backward(grad_rep, n),
                                       arch.train_frozen ? &grad.frozen : nullptr);
    d_prompt += d_x.colwise().sum();
  }

  if (arch.control_branch) {
    const Tensor<S> d_readout = model.z2.backward(tr.copy_readout, grad_rep, &grad.z2);
    const Tensor<S> d_control = gin_backward(model.copy, in.graph, tr.copy, readout_backward(d_readout, n),
                                             arch.train_copy ? &grad.copy : nullptr);
    const Tensor<S> d_condition = model.z1.backward(tr.condition_input, d_control, &grad.z1);
    if (arch.prompts) {
      d_prompt += d_control.colwise().sum();
      grad.condition_prompt += d_condition.colwise().sum();
    }
  }

  if (arch.attribute_branch)
    gin_backward(model.attribute_encoder, in.graph, tr.attribute, readout_backward(grad_rep, n), &grad.attribute_encoder);

  if (arch.prompts) grad.prompt += d_prompt;
}

/// Mean cross-entropy of softmax(logits) against `label`; writes dL/dlogits
/// scaled by `scale` into grad_logits.
template <class S>
S softmax_cross_entropy(const Tensor<S>& logits, int label, S scale, Tensor<S>* grad_logits) {
  const S max = logits.maxCoeff();
  Tensor<S> p = (logits.array() - max).exp().matrix();
  const S z = p.sum();
  p /= z;
  const S loss = -(logits(0, label) - max - std::log(z));
  if (grad_logits) {
    *grad_logits = p * scale;
    (*grad_logits)(0, label) -= scale;
  }
  return loss;
}

template <class S>
int argmax(const Tensor<S>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < row.cols(); ++j)
    if (row(0, j) > row(0, best)) best = j;
  return static_cast<int>(best);
}

/// Hash of every ReLU on/off decision taken in a forward pass. Finite
/// differences are only meaningful when the pattern does not change.
template <class S>
std::uint64_t activation_signature(const ForwardTrace<S>& tr) {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  auto mix = [&](const std::vector<Tensor<S>>& ts) {
    for (const auto& t : ts)
      for (Eigen::Index i = 0; i < t.size(); ++i) h = (h ^ (t.data()[i] > S(0) ? 0x9dULL : 0x3bULL)) * 0x100000001b3ULL;
  };
  for (const auto* g : {&tr.frozen, &tr.copy, &tr.attribute}) {
    mix(g->hidden_pre);
    mix(g->output_pre);
  }
  return h;
}

}  // namespace graphcontrol
