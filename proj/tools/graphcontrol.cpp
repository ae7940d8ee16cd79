#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphcontrol/graphcontrol.hpp"

namespace fs = std::filesystem;
using namespace graphcontrol;

namespace {

struct CommonArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string out = "out";
  int workers = default_workers();
  std::optional<std::uint64_t> seed;
  std::string dataset;
  std::string checkpoint;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "Config file (key = value, [sections])");
  cmd->add_option("--set", a.sets, "Override, key=value or section.key=value (repeatable)");
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_option("--workers", a.workers, "Worker threads (1 = fully serial)")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", a.seed, "Seed for every seeded section");
  cmd->add_option("--dataset", a.dataset, "Dataset directory name under data_root");
  cmd->add_option("--checkpoint", a.checkpoint, "Pre-trained checkpoint file");
}

ResolvedConfig resolve(const CommonArgs& a, const std::string& section) {
  std::vector<ConfigEntry> entries;
  if (!a.config.empty()) entries = parse_config_file(a.config);
  if (!a.dataset.empty()) entries.push_back({"", "dataset", a.dataset, "--dataset"});
  if (!a.checkpoint.empty()) entries.push_back({"", "checkpoint", a.checkpoint, "--checkpoint"});
  if (a.seed)
    for (const char* s : {"pretrain", "finetune", "embed", "gradcheck"})
      entries.push_back({s, "seed", std::to_string(*a.seed), "--seed"});
  for (const auto& s : a.sets) entries.push_back(parse_override(s, section));
  return resolve_config(entries);
}

void write_resolved(const fs::path& out, const ResolvedConfig& c, const std::string& command, const CommonArgs& a) {
  fs::create_directories(out);
  auto j = to_json(c);
  j["command"] = command;
  j["workers"] = a.workers;
  std::ofstream(out / "config_resolved.json") << j.dump(2) << '\n';
}

DatasetBundle dataset_of(const ResolvedConfig& c) {
  if (c.global.dataset.empty()) throw ConfigError("no dataset given (set dataset = NAME or pass --dataset)");
  return load_dataset(c.global.data_root, c.global.dataset);
}

Checkpoint checkpoint_of(const ResolvedConfig& c) {
  if (c.global.checkpoint.empty()) throw ConfigError("no checkpoint given (set checkpoint = PATH or pass --checkpoint)");
  return load_checkpoint(c.global.checkpoint, CheckpointDims{c.finetune.positional_dim, kHiddenDim, kGinLayers});
}

std::optional<fs::path> cache_of(const ResolvedConfig& c, const fs::path& out) {
  return cache_root(c.global.cache_dir.empty() ? out / "cache" : fs::path(c.global.cache_dir));
}

void write_run(const fs::path& out, const RunResult& r) {
  fs::create_directories(out);
  nlohmann::json j{{"seed", r.seed},
                   {"split_seed", r.split_seed},
                   {"test_accuracy", r.test_accuracy},
                   {"best_test_accuracy", r.best_test_accuracy},
                   {"best_epoch", r.best_epoch},
                   {"trainable_param_count", r.trainable_param_count},
                   {"wall_time", r.wall_time}};
  std::ofstream(out / "run.json") << j.dump(2) << '\n';
  write_curve_csv(out / "curve.csv", r);
}

int run_adapt(const CommonArgs& a, bool prompt) {
  auto c = resolve(a, "finetune");
  if (prompt) c.finetune.mode = AdaptMode::prompt;
  write_resolved(a.out, c, prompt ? "prompt-tune" : "finetune", a);
  const auto data = dataset_of(c);
  std::optional<Checkpoint> ckpt;
  if (c.finetune.mode != AdaptMode::scratch || !c.global.checkpoint.empty()) ckpt = checkpoint_of(c);
  auto [split, attempts] = split_for_run(data.graph, c.finetune, c.finetune.seed);
  auto po = PrepareOptions::from(c.finetune);
  po.workers = a.workers;
  po.cache_dir = cache_of(c, a.out);
  const auto prep = prepare(data, po);
  auto [model, result] = prompt ? prompt_tune(*ckpt, data, split, c.finetune, &prep)
                                : finetune(ckpt ? &*ckpt : nullptr, data, split, c.finetune, &prep);
  result.split_attempts = attempts;
  write_run(a.out, result);
  std::printf("test accuracy %.4f (best %.4f at epoch %zu), %zu trainable parameters\n", result.test_accuracy,
              result.best_test_accuracy, result.best_epoch, result.trainable_param_count);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GraphControl: structural pre-training and conditional adaptation for node classification"};
  app.require_subcommand(1);

  CommonArgs common;
  ConvertOptions conv;
  std::string conv_labels, conv_features;

  auto* convert = app.add_subcommand("convert", "Convert an edge list (plus labels/features) to the native layout");
  convert->add_option("--edges", conv.edges, "Edge list file")->required();
  convert->add_option("--labels", conv_labels, "Node label file (node label per line)");
  convert->add_option("--features", conv_features, "Feature file (node f1 f2 ... per line)");
  convert->add_option("--name", conv.name, "Dataset name")->required();
  convert->add_option("--out", common.out, "Output dataset directory")->required();

  auto* prep_cmd = app.add_subcommand("prepare", "Sample subgraphs and compute P and P' into the cache");
  auto* embed = app.add_subcommand("embed", "Write DeepWalk node attributes (features.csv) for a dataset");
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Structural contrastive pre-training");
  auto* finetune_cmd = app.add_subcommand("finetune", "Fine-tune GraphControl (or an ablation mode)");
  auto* prompt_cmd = app.add_subcommand("prompt-tune", "Prompt tuning with both encoders frozen");
  auto* bench = app.add_subcommand("benchmark", "Multi-seed benchmark, writes report.json and curves/");
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  for (auto* cmd : {prep_cmd, embed, pretrain_cmd, finetune_cmd, prompt_cmd, bench, grad}) add_common(cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (convert->parsed()) {
      if (!conv_labels.empty()) conv.labels = conv_labels;
      if (!conv_features.empty()) conv.features = conv_features;
      const auto bundle = convert_edge_list(conv);
      save_dataset(bundle, common.out);
      std::printf("wrote %s: %zu nodes, %zu edges\n", common.out.c_str(), bundle.graph.num_nodes(),
                  bundle.graph.num_edges());
      return 0;
    }
    if (prep_cmd->parsed()) {
      const auto c = resolve(common, "finetune");
      write_resolved(common.out, c, "prepare", common);
      const auto data = dataset_of(c);
      auto po = PrepareOptions::from(c.finetune);
      po.workers = common.workers;
      po.cache_dir = cache_of(c, common.out);
      const auto prep = prepare(data, po);
      double total = 0.0;
      for (const auto& n : prep.nodes) total += static_cast<double>(n.node_ids.size());
      const double mean_size = total / static_cast<double>(prep.nodes.size());
      std::ofstream(fs::path(common.out) / "prepare_summary.json")
          << nlohmann::json{{"nodes", prep.nodes.size()},
                            {"mean_subgraph_size", mean_size},
                            {"cache_directory", prep.cache_directory->string()}}
                 .dump(2)
          << '\n';
      std::printf("prepared %zu subgraphs (mean size %.1f) in %s\n", prep.nodes.size(), mean_size,
                  prep.cache_directory->string().c_str());
      return 0;
    }
    if (embed->parsed()) {
      const auto c = resolve(common, "embed");
      write_resolved(common.out, c, "embed", common);
      auto data = dataset_of(c);
      data.graph = data.graph.with_attributes(deepwalk_embed(data.graph, c.embed));
      data.is_attributed = true;
      save_dataset(data, common.out);
      std::printf("wrote attributed dataset to %s\n", common.out.c_str());
      return 0;
    }
    if (pretrain_cmd->parsed()) {
      const auto c = resolve(common, "pretrain");
      write_resolved(common.out, c, "pretrain", common);
      const auto data = dataset_of(c);
      std::ofstream curve(fs::path(common.out) / "pretrain_loss.csv");
      curve << "epoch,loss\n";
      auto ckpt = pretrain(StructureView(data.graph), c.pretrain, common.workers, [&](const PretrainProgress& p) {
        curve << p.epoch + 1 << ',' << detail::format_double(p.loss) << '\n';
        std::fprintf(stderr, "epoch %zu loss %.6f\n", p.epoch + 1, p.loss);
      });
      ckpt.dataset = data.name;
      save_checkpoint(fs::path(common.out) / "checkpoint.bin", ckpt);
      std::printf("wrote %s\n", (fs::path(common.out) / "checkpoint.bin").string().c_str());
      return 0;
    }
    if (finetune_cmd->parsed()) return run_adapt(common, false);
    if (prompt_cmd->parsed()) return run_adapt(common, true);
    if (bench->parsed()) {
      const auto c = resolve(common, "finetune");
      write_resolved(common.out, c, "benchmark", common);
      const auto data = dataset_of(c);
      std::optional<Checkpoint> ckpt;
      if (c.finetune.mode != AdaptMode::scratch || !c.global.checkpoint.empty()) ckpt = checkpoint_of(c);
      BenchmarkOptions opts;
      opts.workers = common.workers;
      opts.out_dir = common.out;
      opts.cache_dir = cache_of(c, common.out);
      const auto report = benchmark(data, c.finetune, ckpt ? &*ckpt : nullptr, opts);
      std::printf("%s %s: %.2f +- %.2f over %zu runs\n", data.name.c_str(), to_string(c.finetune.mode).c_str(),
                  100.0 * report.mean, 100.0 * report.std, report.runs.size());
      return 0;
    }
    if (grad->parsed()) {
      const auto c = resolve(common, "gradcheck");
      write_resolved(common.out, c, "gradcheck", common);
      GradientSuiteOptions o;
      o.nodes = c.gradcheck.nodes;
      o.classes = c.gradcheck.classes;
      o.seed = c.gradcheck.seed;
      double worst = 0.0;
      for (const auto& r : gradient_suite(o)) {
        std::printf("%-18s max relative error %.3e\n", r.name.c_str(), r.report.max_relative_error);
        worst = std::max(worst, r.report.max_relative_error);
      }
      std::printf("max relative gradient error %.3e (tolerance %.1e)\n", worst, c.gradcheck.tolerance);
      if (worst > c.gradcheck.tolerance) {
        std::fprintf(stderr, "gradcheck failed: %.3e exceeds %.1e\n", worst, c.gradcheck.tolerance);
        return 4;
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
