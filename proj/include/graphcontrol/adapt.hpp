#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "graphcontrol/cache.hpp"
#include "graphcontrol/checkpoint.hpp"
#include "graphcontrol/condition.hpp"
#include "graphcontrol/dataset_io.hpp"
#include "graphcontrol/errors.hpp"
#include "graphcontrol/graph.hpp"
#include "graphcontrol/nn.hpp"
#include "graphcontrol/optim.hpp"
#include "graphcontrol/parallel.hpp"
#include "graphcontrol/rng.hpp"
#include "graphcontrol/sampler.hpp"
#include "graphcontrol/spectral.hpp"

namespace graphcontrol {

enum class AdaptMode { finetune, prompt, scratch, structure_only, simple_concat, no_zero, soft_condition, no_frozen };

inline AdaptMode parse_mode(const std::string& s) {
  if (s == "finetune" || s == "graphcontrol") return AdaptMode::finetune;
  if (s == "prompt") return AdaptMode::prompt;
  if (s == "scratch") return AdaptMode::scratch;
  if (s == "structure_only") return AdaptMode::structure_only;
  if (s == "simple_concat") return AdaptMode::simple_concat;
  if (s == "no_zero") return AdaptMode::no_zero;
  if (s == "soft_condition") return AdaptMode::soft_condition;
  if (s == "no_frozen") return AdaptMode::no_frozen;
  throw ConfigError("unknown mode '" + s +
                    "' (expected finetune, prompt, scratch, structure_only, simple_concat, no_zero, soft_condition "
                    "or no_frozen)");
}

inline std::string to_string(AdaptMode m) {
  switch (m) {
    case AdaptMode::finetune: return "finetune";
    case AdaptMode::prompt: return "prompt";
    case AdaptMode::scratch: return "scratch";
    case AdaptMode::structure_only: return "structure_only";
    case AdaptMode::simple_concat: return "simple_concat";
    case AdaptMode::no_zero: return "no_zero";
    case AdaptMode::soft_condition: return "soft_condition";
    case AdaptMode::no_frozen: return "no_frozen";
  }
  return "?";
}

inline Architecture architecture_for(AdaptMode m) {
  Architecture a;
  switch (m) {
    case AdaptMode::finetune:
    case AdaptMode::no_zero:
    case AdaptMode::soft_condition: break;
    case AdaptMode::prompt:
      a.prompts = true;
      a.train_copy = false;
      break;
    case AdaptMode::scratch: a.train_frozen = true; break;
    case AdaptMode::structure_only: a.control_branch = false; break;
    case AdaptMode::simple_concat:
      a.control_branch = false;
      a.attribute_branch = true;
      break;
    case AdaptMode::no_frozen: a.frozen_branch = false; break;
  }
  return a;
}

enum class ConditionKind { none, hard, soft };

// Where the feature adjacency A' is built: inside each sampled subgraph, or
// once over the whole graph with P' rows taken from the global embedding.
enum class ConditionScope { subgraph, global };

inline ConditionScope parse_condition_scope(const std::string& s) {
  if (s == "subgraph") return ConditionScope::subgraph;
  if (s == "global") return ConditionScope::global;
  throw ConfigError("unknown condition_scope '" + s + "' (expected subgraph or global)");
}

inline std::string to_string(ConditionScope s) { return s == ConditionScope::global ? "global" : "subgraph"; }

inline ConditionKind condition_kind_for(AdaptMode m) {
  if (m == AdaptMode::soft_condition) return ConditionKind::soft;
  if (!architecture_for(m).control_branch) return ConditionKind::none;
  return ConditionKind::hard;
}

struct FinetuneConfig {
  AdaptMode mode = AdaptMode::finetune;
  std::size_t epochs = 100;
  double learning_rate = 0.5;
  OptimizerKind optimizer = OptimizerKind::adamw;
  double weight_decay = 5e-4;
  std::size_t walk_steps = kDefaultWalkSteps;
  double restart_rate = kDefaultRestartRate;
  double threshold = 0.17;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  std::size_t shots = 0;  // 0: full-shot split with train_fraction
  double train_fraction = 0.1;
  std::size_t n_runs = 20;
  std::uint64_t sample_seed = 0;  // fixed subgraph draw per node, independent of run seeds
  double prompt_init = 0.01;      // prompts start uniform in (-prompt_init, prompt_init)
  std::size_t positional_dim = kPositionalDim;
  ConditionScope condition_scope = ConditionScope::global;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (walk_steps < 1) throw ConfigError("walk_steps must be at least 1");
    if (!(restart_rate >= 0.0 && restart_rate <= 1.0)) throw ConfigError("restart_rate must lie in [0, 1]");
    if (!std::isfinite(threshold)) throw ConfigError("threshold must be finite");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (n_runs < 1) throw ConfigError("n_runs must be at least 1");
    if (shots == 0 && !(train_fraction > 0.0 && train_fraction < 1.0))
      throw ConfigError("train_fraction must lie in (0, 1)");
  }
};

inline nlohmann::json to_json(const FinetuneConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"optimizer", to_string(c.optimizer)},
          {"weight_decay", c.weight_decay},
          {"walk_steps", c.walk_steps},
          {"restart_rate", c.restart_rate},
          {"threshold", c.threshold},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"shots", c.shots},
          {"train_fraction", c.train_fraction},
          {"n_runs", c.n_runs},
          {"sample_seed", c.sample_seed},
          {"prompt_init", c.prompt_init},
          {"positional_dim", c.positional_dim},
          {"condition_scope", to_string(c.condition_scope)}};
}

// ---------------------------------------------------------------------------
// Preprocessing: one RWR subgraph per node with its P and P'.

struct PreparedNode {
  std::vector<NodeId> node_ids;
  Graph local;
  Tensor<float> positional;
  Tensor<float> condition;  // empty when no condition is needed

  bool ready() const { return !node_ids.empty(); }
};

struct PrepareOptions {
  std::size_t walk_steps = kDefaultWalkSteps;
  double restart_rate = kDefaultRestartRate;
  double threshold = 0.17;
  std::size_t k = kPositionalDim;
  std::uint64_t sample_seed = 0;
  ConditionKind condition = ConditionKind::hard;
  ConditionScope scope = ConditionScope::global;
  std::optional<std::filesystem::path> cache_dir;
  int workers = 1;

  static PrepareOptions from(const FinetuneConfig& c) {
    PrepareOptions o;
    o.walk_steps = c.walk_steps;
    o.restart_rate = c.restart_rate;
    o.threshold = c.threshold;
    o.k = c.positional_dim;
    o.sample_seed = c.sample_seed;
    o.condition = condition_kind_for(c.mode);
    o.scope = c.condition_scope;
    return o;
  }
};

struct PreparedDataset {
  std::vector<PreparedNode> nodes;  // indexed by global node id
  std::optional<std::filesystem::path> cache_directory;

  const PreparedNode& at(NodeId v) const {
    if (v >= nodes.size() || !nodes[v].ready()) throw DataError("node " + std::to_string(v) + " was not prepared");
    return nodes[v];
  }
};

inline std::string preparation_key(const DatasetBundle& data, const PrepareOptions& o) {
  ContentHash h;
  h.text("graphcontrol-prep-v1").value(fingerprint(data.graph)).value(o.walk_steps).value(o.restart_rate);
  h.value(o.k).value(o.sample_seed).value(static_cast<int>(o.condition)).value(static_cast<int>(o.scope));
  if (o.condition == ConditionKind::hard) h.value(o.threshold);
  return h.hex();
}

inline Tensor<double> gather_rows(const DenseMatrix& x, const std::vector<NodeId>& ids) {
  Tensor<double> out(static_cast<Eigen::Index>(ids.size()), x.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(ids[i]);
  return out;
}

/// Subgraph, P and P' for `centers` (all nodes when empty). Results are
/// independent of the worker count.
inline PreparedDataset prepare(const DatasetBundle& data, const PrepareOptions& opts, std::span<const NodeId> centers = {}) {
  const Graph& g = data.graph;
  if (opts.condition != ConditionKind::none && !g.has_attributes())
    throw DataError("dataset '" + data.name +
                    "' has no node attributes; generate them with the embed subcommand (DeepWalk) first");
  std::vector<NodeId> todo(centers.begin(), centers.end());
  if (todo.empty()) {
    todo.resize(g.num_nodes());
    std::iota(todo.begin(), todo.end(), NodeId{0});
  }
  PreparedDataset out;
  out.nodes.resize(g.num_nodes());
  std::optional<PreparationCache> cache;
  if (opts.cache_dir) {
    cache.emplace(*opts.cache_dir, preparation_key(data, opts));
    out.cache_directory = cache->directory();
  }
  const char* cond_kind = opts.condition == ConditionKind::soft ? ".S" : ".C";

  auto condition_of = [&](const std::vector<NodeId>& ids) {
    const DenseMatrix kernel = cosine_kernel(gather_rows(g.attributes(), ids));
    return opts.condition == ConditionKind::soft ? soft_condition_embedding(kernel, opts.k)
                                                 : condition_embedding(discretize(kernel, opts.threshold), opts.k);
  };
  std::optional<DenseMatrix> global_condition;
  if (opts.condition != ConditionKind::none && opts.scope == ConditionScope::global) {
    std::vector<NodeId> all(g.num_nodes());
    std::iota(all.begin(), all.end(), NodeId{0});
    global_condition = condition_of(all).matrix;
  }

  parallel_for(todo.size(), opts.workers, [&](std::size_t i) {
    const NodeId v = todo[i];
    PreparedNode& node = out.nodes[v];
    std::optional<DenseMatrix> p, c;
    if (cache) {
      if (auto ids = cache->load_ids(v)) {
        node.node_ids = std::move(*ids);
        p = cache->load_embedding(v, ".P");
        if (opts.condition != ConditionKind::none) c = cache->load_embedding(v, cond_kind);
      }
    }
    if (node.node_ids.empty())
      node.node_ids = rwr_sample(g, v, opts.walk_steps, opts.restart_rate, derive_seed(opts.sample_seed, {v}));
    node.local = induce_subgraph(g, node.node_ids, v).local;
    if (!p) {
      p = positional_embedding(node.local, opts.k).matrix;
      if (cache) {
        cache->store_ids(v, node.node_ids);
        cache->store_embedding(v, ".P", *p);
      }
    }
    if (opts.condition != ConditionKind::none && !c) {
      c = global_condition ? DenseMatrix(gather_rows(*global_condition, node.node_ids)) : condition_of(node.node_ids).matrix;
      if (cache) cache->store_embedding(v, cond_kind, *c);
    }
    node.positional = p->cast<float>();
    if (c) node.condition = c->cast<float>();
  });
  return out;
}

// ---------------------------------------------------------------------------
// Models, training and evaluation.

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::size_t split_attempts = 1;
  double test_accuracy = 0.0;  // after the final epoch
  double best_test_accuracy = 0.0;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
  std::vector<EpochStats> curve;
  std::size_t trainable_param_count = 0;
  double wall_time = 0.0;  // seconds; kept out of report.json
};

/// Builds the model for `cfg.mode`. Every mode except scratch starts from
/// the checkpoint encoder.
inline GraphControlModel<float> build_model(const FinetuneConfig& cfg, const Checkpoint* ckpt, std::size_t num_classes,
                                            std::size_t attribute_dim, Engine& eng) {
  const Architecture arch = architecture_for(cfg.mode);
  if (!ckpt && cfg.mode != AdaptMode::scratch)
    throw ConfigError("mode '" + to_string(cfg.mode) + "' requires a pre-trained checkpoint");
  if (ckpt && ckpt->positional_dim() != cfg.positional_dim)
    throw DataError("checkpoint dimension mismatch: encoder input " + std::to_string(ckpt->positional_dim()) +
                    ", configured positional_dim " + std::to_string(cfg.positional_dim));
  const std::size_t k = cfg.positional_dim;
  const std::size_t l = ckpt ? ckpt->embedding_dim() : kHiddenDim;
  const std::size_t layers = ckpt ? ckpt->encoder.layers.size() : kGinLayers;

  GraphControlModel<float> m;
  if (cfg.mode == AdaptMode::scratch) {
    m = GraphControlModel<float>::from_pretrained(GinEncoder<float>::glorot(k, l, layers, eng), num_classes, eng, arch);
    m.copy = GinEncoder<float>::glorot(k, l, layers, eng);
  } else {
    m = GraphControlModel<float>::from_pretrained(ckpt->encoder, num_classes, eng, arch);
  }
  if (cfg.mode == AdaptMode::scratch || cfg.mode == AdaptMode::no_zero) {
    glorot_fill(m.z1.weight, eng);
    glorot_fill(m.z2.weight, eng);
  }
  if (cfg.mode == AdaptMode::prompt) {
    for (auto* q : {&m.prompt, &m.condition_prompt})
      for (Eigen::Index i = 0; i < q->size(); ++i)
        q->data()[i] = static_cast<float>(uniform(eng, -cfg.prompt_init, cfg.prompt_init));
  }
  if (cfg.mode == AdaptMode::simple_concat) {
    if (attribute_dim == 0) throw DataError("simple_concat requires node attributes");
    m.attribute_encoder = GinEncoder<float>::glorot(attribute_dim, l, layers, eng);
  }
  return m;
}

namespace detail {

struct SampleView {
  const PreparedNode* node;
  std::optional<Tensor<float>> attributes;
  const Tensor<float>* frozen_readout = nullptr;

  ModelInput<float> input() const {
    return {node->local, node->positional, node->condition, attributes ? &*attributes : nullptr, frozen_readout};
  }
};

inline SampleView view_of(const GraphControlModel<float>& model, const DatasetBundle& data, const PreparedDataset& prep,
                          NodeId v, const std::vector<Tensor<float>>* frozen_cache) {
  SampleView s{&prep.at(v)};
  if (model.arch.attribute_branch) s.attributes = gather_rows(data.graph.attributes(), s.node->node_ids).cast<float>();
  if (frozen_cache && (*frozen_cache)[v].size() != 0) s.frozen_readout = &(*frozen_cache)[v];
  return s;
}

}  // namespace detail

/// Readout of the frozen branch for every prepared node, reusable while the
/// frozen encoder and its input are fixed.
inline std::vector<Tensor<float>> frozen_readouts(const GraphControlModel<float>& model, const PreparedDataset& prep,
                                                  std::span<const NodeId> ids) {
  std::vector<Tensor<float>> out(prep.nodes.size());
  for (auto v : ids) {
    const auto& n = prep.at(v);
    out[v] = readout(gin_forward(model.frozen, n.local, n.positional));
  }
  return out;
}

inline Tensor<float> predict_logits(const GraphControlModel<float>& model, const ModelInput<float>& in) {
  return model.classifier.forward(represent(model, in));
}

/// Fraction of `ids` whose argmax logit equals the label.
inline double evaluate(const GraphControlModel<float>& model, const DatasetBundle& data, const PreparedDataset& prep,
                       std::span<const NodeId> ids, const std::vector<Tensor<float>>* frozen_cache = nullptr) {
  if (ids.empty()) throw DataError("evaluate: empty node list");
  const auto labels = data.graph.labels();
  std::size_t correct = 0;
  for (auto v : ids) {
    const auto s = detail::view_of(model, data, prep, v, frozen_cache);
    if (argmax(predict_logits(model, s.input())) == labels[v]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ids.size());
}

/// Prepares exactly `ids` with the preparation settings of `cfg` and evaluates.
inline double evaluate(const GraphControlModel<float>& model, const DatasetBundle& data, std::span<const NodeId> ids,
                       const FinetuneConfig& cfg) {
  if (ids.empty()) throw DataError("evaluate: empty node list");
  const auto prep = prepare(data, PrepareOptions::from(cfg), ids);
  return evaluate(model, data, prep, ids);
}

/// Mini-batch cross-entropy training of the trainable parameters of `model`
/// on the split's training nodes; test accuracy is tracked every epoch.
inline RunResult train_model(GraphControlModel<float>& model, const DatasetBundle& data, const PreparedDataset& prep,
                             const DataSplit& split, const FinetuneConfig& cfg, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  if (split.train_ids.empty() || split.test_ids.empty()) throw DataError("train_model: empty train or test set");
  const auto labels = data.graph.labels();
  RunResult result;
  result.seed = seed;
  result.split_seed = split.seed;
  result.trainable_param_count = model.trainable_parameter_count();

  std::optional<std::vector<Tensor<float>>> frozen_cache;
  if (model.arch.frozen_branch && !model.arch.train_frozen && !model.arch.prompts) {
    std::vector<NodeId> all(split.train_ids);
    all.insert(all.end(), split.test_ids.begin(), split.test_ids.end());
    frozen_cache = frozen_readouts(model, prep, all);
  }
  const auto* fc = frozen_cache ? &*frozen_cache : nullptr;

  Optimizer<float> opt({cfg.optimizer, cfg.learning_rate, cfg.weight_decay});
  auto grad = model.zeros_like();
  std::vector<Tensor<float>*> params, grads;
  visit_trainable(model, grad, [&](const std::string&, Tensor<float>& p, Tensor<float>& g) {
    params.push_back(&p);
    grads.push_back(&g);
  });

  Engine order_eng(derive_seed(seed, {0x0bd3ULL}));
  std::vector<NodeId> order = split.train_ids;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), order_eng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const float scale = 1.0f / static_cast<float>(end - begin);
      for (auto* g : grads) g->setZero();
      for (std::size_t i = begin; i < end; ++i) {
        const NodeId v = order[i];
        const auto s = detail::view_of(model, data, prep, v, fc);
        const auto in = s.input();
        ForwardTrace<float> tr;
        const Tensor<float> rep = represent(model, in, &tr);
        const Tensor<float> logits = model.classifier.forward(rep);
        Tensor<float> d_logits;
        loss_sum += softmax_cross_entropy(logits, labels[v], scale, &d_logits);
        const Tensor<float> d_rep = model.classifier.backward(rep, d_logits, &grad.classifier);
        represent_backward(model, in, tr, d_rep, grad);
      }
      opt.step(params, grads);
    }
    EpochStats st;
    st.epoch = epoch;
    st.loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(st.loss)) throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
    st.train_accuracy = evaluate(model, data, prep, split.train_ids, fc);
    st.test_accuracy = evaluate(model, data, prep, split.test_ids, fc);
    if (result.best_epoch == 0 || st.test_accuracy > result.best_test_accuracy) {
      result.best_epoch = epoch;
      result.best_test_accuracy = st.test_accuracy;
    }
    result.curve.push_back(st);
  }
  result.test_accuracy = result.curve.empty() ? evaluate(model, data, prep, split.test_ids, fc) : result.curve.back().test_accuracy;
  if (result.curve.empty()) result.best_test_accuracy = result.test_accuracy;
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

namespace detail {

inline std::pair<GraphControlModel<float>, RunResult> adapt_run(const Checkpoint* ckpt, const DatasetBundle& data,
                                                                const DataSplit& split, const FinetuneConfig& cfg,
                                                                const PreparedDataset* prepared, std::uint64_t seed) {
  cfg.validate();
  if (!data.graph.has_labels()) throw DataError("dataset '" + data.name + "' has no labels");
  std::optional<PreparedDataset> local;
  if (!prepared) {
    std::vector<NodeId> ids(split.train_ids);
    ids.insert(ids.end(), split.test_ids.begin(), split.test_ids.end());
    local = prepare(data, PrepareOptions::from(cfg), ids);
    prepared = &*local;
  }
  Engine eng(derive_seed(seed, {0x1a17ULL}));
  const std::size_t attr_dim = data.graph.has_attributes() ? static_cast<std::size_t>(data.graph.attribute_dim()) : 0;
  auto model = build_model(cfg, ckpt, static_cast<std::size_t>(data.graph.num_classes()), attr_dim, eng);
  auto result = train_model(model, data, *prepared, split, cfg, seed);
  return {std::move(model), std::move(result)};
}

}  // namespace detail

/// GraphControl fine-tuning (or one of the ablation modes other than prompt).
inline std::pair<GraphControlModel<float>, RunResult> finetune(const Checkpoint* ckpt, const DatasetBundle& data,
                                                               const DataSplit& split, const FinetuneConfig& cfg,
                                                               const PreparedDataset* prepared = nullptr) {
  if (cfg.mode == AdaptMode::prompt) throw ConfigError("mode 'prompt' is run through prompt_tune");
  return detail::adapt_run(ckpt, data, split, cfg, prepared, cfg.seed);
}

/// Prompt tuning: both encoders frozen; q, q', Z1, Z2 and the classifier train.
inline std::pair<GraphControlModel<float>, RunResult> prompt_tune(const Checkpoint& ckpt, const DatasetBundle& data,
                                                                  const DataSplit& split, FinetuneConfig cfg,
                                                                  const PreparedDataset* prepared = nullptr) {
  cfg.mode = AdaptMode::prompt;
  return detail::adapt_run(&ckpt, data, split, cfg, prepared, cfg.seed);
}

// ---------------------------------------------------------------------------
// Multi-seed benchmark.

struct EvalReport {
  std::string dataset;
  std::vector<RunResult> runs;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over runs
  nlohmann::json config;
};

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs)
    runs.push_back({{"seed", run.seed},
                    {"split_seed", run.split_seed},
                    {"split_attempts", run.split_attempts},
                    {"test_accuracy", run.test_accuracy},
                    {"best_test_accuracy", run.best_test_accuracy},
                    {"best_epoch", run.best_epoch},
                    {"final_loss", run.curve.empty() ? 0.0 : run.curve.back().loss},
                    {"trainable_param_count", run.trainable_param_count}});
  return {{"dataset", r.dataset}, {"mean", r.mean}, {"std", r.std}, {"n_runs", r.runs.size()},
          {"runs", runs},         {"config", r.config}};
}

inline void write_curve_csv(const std::filesystem::path& file, const RunResult& run) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  out << "epoch,loss,train_acc,test_acc\n";
  for (const auto& e : run.curve)
    out << e.epoch << ',' << detail::format_double(e.loss) << ',' << detail::format_double(e.train_accuracy) << ','
        << detail::format_double(e.test_accuracy) << '\n';
}

/// Split for run `seed`. Few-shot draws that leave a class short of
/// candidates are redrawn with derived seeds; the attempt count is returned.
inline std::pair<DataSplit, std::size_t> split_for_run(const Graph& g, const FinetuneConfig& cfg, std::uint64_t seed) {
  const std::uint64_t base = derive_seed(seed, {0x5911ULL});
  if (cfg.shots == 0) return {make_split(g, cfg.train_fraction, base), 1};
  constexpr std::size_t kMaxAttempts = 100;
  for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    try {
      return {make_fewshot_split(g, cfg.shots, attempt == 0 ? base : derive_seed(base, {attempt})), attempt + 1};
    } catch (const DataError&) {
      if (attempt + 1 == kMaxAttempts) throw;
    }
  }
  throw DataError("unreachable");
}

struct BenchmarkOptions {
  int workers = 1;
  std::optional<std::filesystem::path> out_dir;    // report.json, curves/, timing.json
  std::optional<std::filesystem::path> cache_dir;  // preparation cache root
  const PreparedDataset* prepared = nullptr;       // reuse across calls with identical preparation settings
};

/// cfg.n_runs independent runs with seeds cfg.seed, cfg.seed + 1, ...
inline EvalReport benchmark(const DatasetBundle& data, const FinetuneConfig& cfg, const Checkpoint* ckpt,
                            const BenchmarkOptions& opts = {}) {
  cfg.validate();
  if (!data.graph.has_labels()) throw DataError("dataset '" + data.name + "' has no labels");
  std::optional<PreparedDataset> local;
  const PreparedDataset* prep = opts.prepared;
  if (!prep) {
    auto po = PrepareOptions::from(cfg);
    po.workers = opts.workers;
    po.cache_dir = opts.cache_dir;
    local = prepare(data, po);
    prep = &*local;
  }

  EvalReport report;
  report.dataset = data.name;
  report.config = to_json(cfg);
  report.runs.resize(cfg.n_runs);
  parallel_for(cfg.n_runs, opts.workers, [&](std::size_t r) {
    const std::uint64_t seed = cfg.seed + r;
    auto [split, attempts] = split_for_run(data.graph, cfg, seed);
    auto run = detail::adapt_run(ckpt, data, split, cfg, prep, seed).second;
    run.split_attempts = attempts;
    report.runs[r] = std::move(run);
  });
  std::vector<double> accs;
  for (const auto& r : report.runs) accs.push_back(r.test_accuracy);
  std::tie(report.mean, report.std) = mean_std(accs);

  if (opts.out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(*opts.out_dir / "curves");
    {
      std::ofstream out(*opts.out_dir / "report.json");
      out << to_json(report).dump(2) << '\n';
    }
    nlohmann::json timing = nlohmann::json::array();
    for (const auto& r : report.runs) {
      write_curve_csv(*opts.out_dir / "curves" / (std::to_string(r.seed) + ".csv"), r);
      timing.push_back({{"seed", r.seed}, {"wall_time", r.wall_time}});
    }
    std::ofstream(*opts.out_dir / "timing.json") << timing.dump(2) << '\n';
  }
  return report;
}

}  // namespace graphcontrol
