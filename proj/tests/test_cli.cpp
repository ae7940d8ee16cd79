#include <cstdlib>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string output;
};

Outcome run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + GRAPHCONTROL_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testutil::read_file(log)};
}

/// Writes a 20-node two-community edge list with labels and features and
/// converts it into `root/tiny`.
void make_tiny_dataset(const testutil::TempDir& dir) {
  std::string edges = "# two communities\n", labels = "node label\n", features;
  for (int g = 0; g < 2; ++g)
    for (int i = 0; i < 10; ++i) {
      edges += "n" + std::to_string(10 * g + i) + " n" + std::to_string(10 * g + (i + 1) % 10) + "\n";
      edges += "n" + std::to_string(10 * g + i) + "\tn" + std::to_string(10 * g + (i + 4) % 10) + "\n";
      labels += "n" + std::to_string(10 * g + i) + " " + std::to_string(g) + "\n";
      features += "n" + std::to_string(10 * g + i) + (g == 0 ? " 1 0.1 0" : " 0 0.2 1") + "\n";
    }
  edges += "n0 n10\n";
  testutil::write_file(dir / "raw/edges.txt", edges);
  testutil::write_file(dir / "raw/labels.txt", labels);
  testutil::write_file(dir / "raw/features.txt", features);
}

const char* kQuick =
    " --set finetune.epochs=3 --set walk_steps=16 --set learning_rate=0.01 --set optimizer=adam"
    " --set train_fraction=0.5 --set n_runs=2 --set batch_size=8";

}  // namespace

TEST(Cli, ConvertThenBenchmark) {
  testutil::TempDir dir;
  make_tiny_dataset(dir);
  auto r = run_cli("convert --edges " + (dir / "raw/edges.txt").string() + " --labels " +
                       (dir / "raw/labels.txt").string() + " --features " + (dir / "raw/features.txt").string() +
                       " --name tiny --out " + (dir / "data/tiny").string(),
                   dir / "convert.log");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("20 nodes"), std::string::npos) << r.output;

  const std::string common = " --set data_root=" + (dir / "data").string() + " --dataset tiny" + kQuick;
  r = run_cli("pretrain --set pretrain.epochs=2 --set pretrain.walk_steps=16 --out " + (dir / "pre").string() + common,
              dir / "pretrain.log");
  ASSERT_EQ(r.code, 0) << r.output;
  ASSERT_TRUE(fs::exists(dir / "pre/checkpoint.bin"));
  EXPECT_TRUE(fs::exists(dir / "pre/pretrain_loss.csv"));

  const std::string bench = "benchmark --workers 1 --checkpoint " + (dir / "pre/checkpoint.bin").string() + common;
  r = run_cli(bench + " --out " + (dir / "b1").string(), dir / "b1.log");
  ASSERT_EQ(r.code, 0) << r.output;
  r = run_cli(bench + " --out " + (dir / "b2").string(), dir / "b2.log");
  ASSERT_EQ(r.code, 0) << r.output;

  const auto report = testutil::read_file(dir / "b1/report.json");
  EXPECT_EQ(report, testutil::read_file(dir / "b2/report.json"));
  const auto j = nlohmann::json::parse(report);
  EXPECT_EQ(j["n_runs"], 2);
  EXPECT_EQ(j["dataset"], "tiny");
  EXPECT_TRUE(fs::exists(dir / "b1/curves/0.csv"));
  EXPECT_TRUE(fs::exists(dir / "b1/curves/1.csv"));

  const auto resolved = nlohmann::json::parse(testutil::read_file(dir / "b1/config_resolved.json"));
  EXPECT_EQ(resolved["finetune"]["epochs"], 3);
  EXPECT_EQ(resolved["command"], "benchmark");

  r = run_cli("finetune --checkpoint " + (dir / "pre/checkpoint.bin").string() + " --out " + (dir / "ft").string() +
                  common,
              dir / "ft.log");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("test accuracy"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "ft/run.json"));

  r = run_cli("prompt-tune --checkpoint " + (dir / "pre/checkpoint.bin").string() + " --out " + (dir / "pt").string() +
                  common,
              dir / "pt.log");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto run = nlohmann::json::parse(testutil::read_file(dir / "pt/run.json"));
  EXPECT_EQ(run["trainable_param_count"], 32 * 32 + 32 + 64 * 64 + 64 + 64 + 64 * 2 + 2);
}

TEST(Cli, MisspelledKeyExitsWithSuggestion) {
  testutil::TempDir dir;
  const auto r = run_cli("benchmark --set thresold=0.17 --out " + (dir / "o").string(), dir / "log");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("did you mean 'threshold'"), std::string::npos) << r.output;
}

TEST(Cli, MissingDatasetIsDataError) {
  testutil::TempDir dir;
  const auto r = run_cli("benchmark --set mode=scratch --set data_root=" + dir.path().string() +
                             " --dataset absent --out " + (dir / "o").string(),
                         dir / "log");
  EXPECT_EQ(r.code, 3) << r.output;
}

TEST(Cli, MissingCheckpointIsConfigError) {
  testutil::TempDir dir;
  make_tiny_dataset(dir);
  ASSERT_EQ(run_cli("convert --edges " + (dir / "raw/edges.txt").string() + " --labels " +
                        (dir / "raw/labels.txt").string() + " --features " + (dir / "raw/features.txt").string() +
                        " --name tiny --out " + (dir / "data/tiny").string(),
                    dir / "c.log")
                .code,
            0);
  const auto r = run_cli("finetune --set data_root=" + (dir / "data").string() + " --dataset tiny --out " +
                             (dir / "o").string(),
                         dir / "log");
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("checkpoint"), std::string::npos);
}

TEST(Cli, GradcheckPasses) {
  testutil::TempDir dir;
  const auto r = run_cli("gradcheck --out " + (dir / "g").string(), dir / "log");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("max relative gradient error"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  testutil::TempDir dir;
  EXPECT_EQ(run_cli("", dir / "a").code, 2);
  EXPECT_EQ(run_cli("benchmark --workers 0", dir / "b").code, 2);
  EXPECT_EQ(run_cli("--help", dir / "c").code, 0);
}
