// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance [--criteria 1,2,...] [--data DIR] [--workers N] [--surrogate]
//
// Criteria 5-9 read <data>/cora_ml and <data>/europe_airport in the native
// dataset layout (see README). --surrogate runs the dataset protocols on
// generated stand-ins instead of the criteria.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <unistd.h>

#include <CLI11.hpp>

#include "graphcontrol/graphcontrol.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace graphcontrol;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Verdict within_budget(Verdict v, double elapsed, double budget) {
  if (elapsed > budget) {
    v.pass = false;
    v.detail += fmt("; runtime %.1f s exceeds %.0f s", elapsed, budget);
  }
  return v;
}

// --- criterion 1 -----------------------------------------------------------

template <class S>
bool zero_init_identity_holds(std::uint64_t seed) {
  Engine eng(derive_seed(seed, {1}));
  const std::size_t n = 10 + uniform_index(eng, 41);
  const Graph g = oracle::random_connected_graph(n, n, derive_seed(seed, {2}));
  const auto frozen = GinEncoder<S>::glorot(kPositionalDim, kHiddenDim, kGinLayers, eng);
  auto model = GraphControlModel<S>::from_pretrained(frozen, 5, eng);
  model.copy = GinEncoder<S>::glorot(kPositionalDim, kHiddenDim, kGinLayers, eng);
  const Tensor<S> p = positional_embedding(g, kPositionalDim).matrix.cast<S>();
  Tensor<S> pc(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kPositionalDim));
  for (Eigen::Index i = 0; i < pc.size(); ++i) pc.data()[i] = static_cast<S>(uniform(eng, -1.0, 1.0));
  const Tensor<S> got = represent(model, ModelInput<S>{g, p, pc});
  const Tensor<S> want = readout(gin_forward(model.frozen, g, p));
  return got.rows() == want.rows() && got.cols() == want.cols() && (got.array() == want.array()).all();
}

Verdict criterion1() {
  int failures = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    if (!zero_init_identity_holds<double>(s)) ++failures;
    if (!zero_init_identity_holds<float>(s)) ++failures;
  }
  return {failures == 0, fmt("%d of 200 parameterizations (100 per precision) differ from the frozen readout", failures)};
}

// --- criterion 2 -----------------------------------------------------------

Verdict criterion2() {
  GradientSuiteOptions o;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : gradient_suite(o))
    if (r.report.max_relative_error >= worst) {
      worst = r.report.max_relative_error;
      worst_name = r.name;
    }
  return {worst <= 1e-4, fmt("max relative error %.3e (%s), tolerance 1e-4", worst, worst_name.c_str())};
}

// --- criterion 3 -----------------------------------------------------------

Verdict criterion3() {
  double kernel_err = 0, lap_err = 0, readout_err = 0;
  int discretize_bad = 0, induce_bad = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    Engine eng(derive_seed(s, {3}));
    const auto rows = static_cast<Eigen::Index>(3 + uniform_index(eng, 10));
    const auto cols = static_cast<Eigen::Index>(1 + uniform_index(eng, 6));
    DenseMatrix x(rows, cols);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform01(eng) < 0.2 ? 0.0 : uniform(eng, -1.0, 1.0);
    if (s % 7 == 0) x.row(0).setZero();
    const auto k = cosine_kernel(x);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < rows; ++j) {
        const long double want = oracle::cosine(x, i, j);
        kernel_err = std::max(kernel_err, static_cast<double>(std::fabs(k(i, j) - want)));
      }

    const double v = uniform(eng, -0.5, 0.9);
    const auto a = discretize(k, v).dense();
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < rows; ++j)
        if (a(i, j) != (i == j || k(i, j) > v ? 1.0 : 0.0)) ++discretize_bad;

    const std::size_t n = 4 + uniform_index(eng, 20);
    const Graph g = oracle::random_graph(n, uniform(eng, 0.05, 0.6), derive_seed(s, {4}));
    const auto l = normalized_laplacian(g);
    const auto lo = oracle::laplacian(g);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        lap_err = std::max(lap_err, static_cast<double>(std::fabs(l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - lo[i][j])));

    std::vector<NodeId> nodes;
    for (NodeId u = 0; u < n; ++u)
      if (uniform01(eng) < 0.5) nodes.push_back(u);
    if (nodes.empty()) nodes.push_back(0);
    const auto sub = induce_subgraph(g, nodes, nodes.front());
    std::set<std::pair<NodeId, NodeId>> got;
    for (const auto& e : sub.local.edge_list()) got.insert(e);
    if (got != oracle::induced_edges(g, nodes)) ++induce_bad;

    Tensor<double> h(static_cast<Eigen::Index>(1 + uniform_index(eng, 12)), 64);
    for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = uniform(eng, -3.0, 3.0);
    readout_err = std::max(readout_err, (readout(h) - oracle::column_means<double>(h)).cwiseAbs().maxCoeff());
  }
  const bool pass = kernel_err <= 1e-12 && lap_err <= 1e-12 && readout_err <= 1e-12 && discretize_bad == 0 && induce_bad == 0;
  return {pass, fmt("kernel %.1e, laplacian %.1e, readout %.1e (tol 1e-12); discretize %d and induce %d mismatches", kernel_err,
                    lap_err, readout_err, discretize_bad, induce_bad)};
}

// --- criterion 4 -----------------------------------------------------------

Verdict criterion4() {
  double residual = 0.0, bound = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Graph g = oracle::random_graph(20, 0.1 + 0.01 * static_cast<double>(s), derive_seed(s, {5}));
    const auto l = normalized_laplacian(g);
    const auto pe = positional_embedding(g, 20);
    for (Eigen::Index j = 0; j < pe.matrix.cols(); ++j) {
      const double lambda = pe.eigenvalues(j);
      residual = std::max(residual, (l * pe.matrix.col(j) - lambda * pe.matrix.col(j)).cwiseAbs().maxCoeff());
      bound = std::max({bound, -lambda, lambda - 2.0});
    }
  }
  const Graph p3 = Graph::from_edges(3, std::vector<Edge>{{0, 1}, {1, 2}});
  const auto pe = positional_embedding(p3, 3);
  const auto oracle_pairs = oracle::jacobi(oracle::laplacian(p3));
  double spectrum = 0.0;
  const double expected[3] = {0.0, 1.0, 2.0};
  for (int j = 0; j < 3; ++j) {
    spectrum = std::max(spectrum, std::fabs(pe.eigenvalues(j) - expected[j]));
    spectrum = std::max(spectrum, static_cast<double>(std::fabs(oracle_pairs.values[static_cast<std::size_t>(j)] - expected[j])));
    long double dot = 0;
    for (int i = 0; i < 3; ++i) dot += pe.matrix(i, j) * oracle_pairs.vectors[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    spectrum = std::max(spectrum, static_cast<double>(1.0L - std::fabs(dot)));
  }
  const bool pass = residual <= 1e-8 && bound <= 1e-10 && spectrum <= 1e-10;
  return {pass, fmt("residual %.1e, bound violation %.1e, P3 deviation %.1e", residual, std::max(bound, 0.0), spectrum)};
}

// --- criterion 10 ----------------------------------------------------------

Verdict criterion10(const fs::path& scratch) {
  SyntheticCitationOptions so;
  so.nodes = 150;
  so.classes = 4;
  so.vocabulary = 60;
  so.seed = 10;
  const auto data = synthetic_citation(so);
  PretrainConfig pc;
  pc.epochs = 3;
  pc.walk_steps = 64;
  const auto ckpt = pretrain(StructureView(data.graph), pc, 1);
  FinetuneConfig cfg;
  cfg.epochs = 10;
  cfg.optimizer = OptimizerKind::adam;
  cfg.learning_rate = 0.005;
  cfg.walk_steps = 64;
  cfg.train_fraction = 0.3;
  cfg.n_runs = 3;
  std::string reports[2];
  for (int i = 0; i < 2; ++i) {
    BenchmarkOptions o;
    o.workers = 1;
    o.out_dir = scratch / ("determinism_" + std::to_string(i));
    o.cache_dir = scratch / ("determinism_cache_" + std::to_string(i));
    benchmark(data, cfg, &ckpt, o);
    std::ifstream in(*o.out_dir / "report.json", std::ios::binary);
    reports[i].assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  const bool same = !reports[0].empty() && reports[0] == reports[1];
  return {same, fmt("report.json %s across two --workers 1 runs (%zu bytes)", same ? "identical" : "differs", reports[0].size())};
}

// --- dataset criteria ------------------------------------------------------

struct Protocol {
  DatasetBundle data;
  Checkpoint ckpt;
  FinetuneConfig base;
  int workers;
  std::optional<PreparedDataset> hard_prep;

  EvalReport run(AdaptMode mode, std::size_t n_runs, std::optional<double> threshold = std::nullopt) {
    auto cfg = base;
    cfg.mode = mode;
    cfg.n_runs = n_runs;
    if (threshold) cfg.threshold = *threshold;
    BenchmarkOptions o;
    o.workers = workers;
    const bool shares_prep = condition_kind_for(mode) == ConditionKind::hard && !threshold;
    if (shares_prep) {
      if (!hard_prep) {
        auto po = PrepareOptions::from(cfg);
        po.workers = workers;
        hard_prep = prepare(data, po);
      }
      o.prepared = &*hard_prep;
    }
    return benchmark(data, cfg, &ckpt, o);
  }
};

/// Downstream settings for the acceptance runs: profile values with the
/// working optimizer override recorded in the README.
FinetuneConfig acceptance_config(const std::string& profile) {
  ResolvedConfig c;
  apply_profile(c, profile);
  c.finetune.optimizer = OptimizerKind::adam;
  c.finetune.learning_rate = 0.005;
  return c.finetune;
}

Checkpoint structural_checkpoint(const DatasetBundle& data, int workers) {
  PretrainConfig pc;
  pc.epochs = 100;
  return pretrain(StructureView(data.graph), pc, workers);
}

std::optional<DatasetBundle> try_load(const fs::path& root, const std::string& name, std::string& why) {
  if (!fs::exists(root / name / "meta.json")) {
    why = "dataset '" + name + "' not found under " + root.string();
    return std::nullopt;
  }
  return load_dataset(root, name);
}

double pts(double x) { return 100.0 * x; }

struct DatasetCriteria {
  int workers;
  bool surrogate;
  fs::path data_root;
  std::map<int, Verdict>& out;

  std::optional<Protocol> cora, europe;
  std::string cora_missing, europe_missing;
  std::optional<EvalReport> gc_report;
  double gc_seconds = 0.0;

  void load_cora() {
    if (cora || !cora_missing.empty()) return;
    DatasetBundle data;
    if (surrogate) {
      data = synthetic_citation({});
    } else if (auto d = try_load(data_root, "cora_ml", cora_missing)) {
      data = std::move(*d);
    } else {
      return;
    }
    std::fprintf(stderr, "pre-training on %s structure (%zu nodes)\n", data.name.c_str(), data.graph.num_nodes());
    auto ckpt = structural_checkpoint(data, workers);
    cora = Protocol{std::move(data), std::move(ckpt), acceptance_config("cora_ml"), workers, std::nullopt};
  }

  void load_europe() {
    if (europe || !europe_missing.empty()) return;
    DatasetBundle data;
    if (surrogate) {
      data = synthetic_airport(399, 3, 7);
    } else if (auto d = try_load(data_root, "europe_airport", europe_missing)) {
      data = std::move(*d);
    } else {
      return;
    }
    if (!data.is_attributed) {
      data.graph = data.graph.with_attributes(deepwalk_embed(data.graph, DeepWalkConfig{}));
      data.is_attributed = true;
    }
    auto ckpt = structural_checkpoint(data, workers);
    auto cfg = acceptance_config("europe_airport");
    cfg.shots = 5;
    europe = Protocol{std::move(data), std::move(ckpt), cfg, workers, std::nullopt};
  }

  bool need_cora(int id) {
    load_cora();
    if (!cora) out[id] = {false, "cannot run: " + cora_missing};
    return cora.has_value();
  }

  const EvalReport& graphcontrol_runs() {
    if (!gc_report) {
      const auto t0 = std::chrono::steady_clock::now();
      gc_report = cora->run(AdaptMode::finetune, 10);
      gc_seconds = seconds_since(t0);
    }
    return *gc_report;
  }

  void criterion5() {
    const auto t0 = std::chrono::steady_clock::now();
    if (!need_cora(5)) return;
    const auto& gc = graphcontrol_runs();
    const auto so = cora->run(AdaptMode::structure_only, 10);
    const bool pass = gc.mean >= 0.65 && so.mean <= 0.45 && gc.mean - so.mean >= 0.20;
    out[5] = within_budget({pass, fmt("graphcontrol %.2f +- %.2f, structure_only %.2f +- %.2f, gap %.2f points", pts(gc.mean),
                                      pts(gc.std), pts(so.mean), pts(so.std), pts(gc.mean - so.mean))},
                           seconds_since(t0), 45 * 60);
  }

  void criterion6() {
    if (!need_cora(6)) return;
    const auto& gc = graphcontrol_runs();
    const auto nz = cora->run(AdaptMode::no_zero, 10);
    const auto sc = cora->run(AdaptMode::simple_concat, 10);
    const bool pass = gc.mean - nz.mean >= 0.03 && gc.mean - sc.mean >= 0.05;
    out[6] = {pass, fmt("graphcontrol %.2f, no_zero %.2f (margin %.2f), simple_concat %.2f (margin %.2f)", pts(gc.mean),
                        pts(nz.mean), pts(gc.mean - nz.mean), pts(sc.mean), pts(gc.mean - sc.mean))};
  }

  void criterion7() {
    const auto t0 = std::chrono::steady_clock::now();
    load_europe();
    if (!europe) {
      out[7] = {false, "cannot run: " + europe_missing};
      return;
    }
    const auto pt = europe->run(AdaptMode::prompt, 20);
    const auto ft = europe->run(AdaptMode::finetune, 20);
    const double ratio =
        static_cast<double>(pt.runs.front().trainable_param_count) / static_cast<double>(ft.runs.front().trainable_param_count);
    const bool pass = pt.mean >= ft.mean - 0.02 && ratio < 0.10;
    out[7] = within_budget({pass, fmt("prompt %.2f vs finetune %.2f; trainable %zu / %zu = %.1f%% (limit 10%%)", pts(pt.mean),
                                      pts(ft.mean), pt.runs.front().trainable_param_count,
                                      ft.runs.front().trainable_param_count, 100.0 * ratio)},
                           seconds_since(t0), 10 * 60);
  }

  void criterion8() {
    if (!need_cora(8)) return;
    const auto& gc = graphcontrol_runs();
    std::size_t ok = 0;
    for (const auto& r : gc.runs) ok += r.best_epoch >= 1 && r.best_epoch <= 100 ? 1 : 0;
    out[8] = {ok >= 8, fmt("best epoch <= 100 in %zu of %zu seeds", ok, gc.runs.size())};
  }

  void criterion9() {
    if (!need_cora(9)) return;
    const auto low = cora->run(AdaptMode::finetune, 5, 0.17);
    const auto high = cora->run(AdaptMode::finetune, 5, 0.35);
    out[9] = {low.mean - high.mean >= 0.05,
              fmt("v = 0.17: %.2f, v = 0.35: %.2f, drop %.2f points", pts(low.mean), pts(high.mean), pts(low.mean - high.mean))};
  }
};

/// The dataset protocols on generated stand-ins. Only one claim is checked:
/// conditioning on attributes lifts accuracy well above the structure-only
/// model. The other numbers are printed for the record.
int surrogate_study(int workers) {
  std::map<int, Verdict> unused;
  DatasetCriteria ds{workers, true, {}, unused};
  ds.load_cora();
  auto& cora = *ds.cora;
  auto line = [](const char* what, const EvalReport& r) {
    std::printf("surrogate %-40s %.2f +- %.2f\n", what, pts(r.mean), pts(r.std));
    std::fflush(stdout);
  };
  const auto& gc = ds.graphcontrol_runs();
  line("citation graphcontrol", gc);
  const auto so = cora.run(AdaptMode::structure_only, 10);
  line("citation structure_only", so);
  line("citation no_zero", cora.run(AdaptMode::no_zero, 10));
  line("citation simple_concat", cora.run(AdaptMode::simple_concat, 10));
  line("citation graphcontrol v=0.35 (5 seeds)", cora.run(AdaptMode::finetune, 5, 0.35));
  ds.load_europe();
  line("airport 5-shot prompt", ds.europe->run(AdaptMode::prompt, 20));
  line("airport 5-shot finetune", ds.europe->run(AdaptMode::finetune, 20));
  const bool pass = gc.mean - so.mean >= 0.10;
  std::printf("surrogate claim: %s  graphcontrol exceeds structure_only by %.2f points (required 10)\n",
              pass ? "PASS" : "FAIL", pts(gc.mean - so.mean));
  return pass ? 0 : 1;
}

std::set<int> parse_criteria(const std::string& list) {
  std::set<int> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const int id = std::stoi(item);
    if (id < 1 || id > 10) throw ConfigError("criterion ids run from 1 to 10");
    out.insert(id);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  std::string criteria = "1,2,3,4,5,6,7,8,9,10";
  const char* env_data = std::getenv("GRAPHCONTROL_DATA");
  std::string data_root = env_data && *env_data ? env_data : (fs::path(GRAPHCONTROL_SOURCE_DIR) / "data").string();
  int workers = default_workers();
  bool surrogate = false;
  app.add_option("--criteria", criteria, "Comma-separated criterion ids");
  app.add_option("--data", data_root, "Root holding cora_ml/ and europe_airport/");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--surrogate", surrogate, "Run the dataset protocols on generated stand-in graphs instead");
  CLI11_PARSE(app, argc, argv);
  if (surrogate) return surrogate_study(workers);

  const fs::path scratch = fs::temp_directory_path() / ("graphcontrol_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(scratch);

  std::map<int, Verdict> verdicts;
  std::map<int, double> elapsed;
  DatasetCriteria ds{workers, surrogate, data_root, verdicts};
  const std::map<int, std::function<void()>> runners{
      {1, [&] { verdicts[1] = criterion1(); }},
      {2, [&] { verdicts[2] = criterion2(); }},
      {3, [&] { verdicts[3] = criterion3(); }},
      {4, [&] { verdicts[4] = criterion4(); }},
      {5, [&] { ds.criterion5(); }},
      {6, [&] { ds.criterion6(); }},
      {7, [&] { ds.criterion7(); }},
      {8, [&] { ds.criterion8(); }},
      {9, [&] { ds.criterion9(); }},
      {10, [&] { verdicts[10] = criterion10(scratch); }},
  };
  const std::map<int, double> budgets{{1, 10}, {2, 120}, {3, 30}, {4, 10}};

  int failed = 0;
  try {
    for (int id : parse_criteria(criteria)) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        runners.at(id)();
      } catch (const std::exception& e) {
        verdicts[id] = {false, std::string("error: ") + e.what()};
      }
      const double t = seconds_since(t0);
      if (budgets.contains(id)) verdicts[id] = within_budget(verdicts[id], t, budgets.at(id));
      const auto& v = verdicts[id];
      if (!v.pass) ++failed;
      std::printf("criterion %2d: %s  %s  [%.1f s]\n", id, v.pass ? "PASS" : "FAIL",
                  v.detail.c_str(), t);
      std::fflush(stdout);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }
  std::error_code ec;
  fs::remove_all(scratch, ec);
  return failed == 0 ? 0 : 1;
}
