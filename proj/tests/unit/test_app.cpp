#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vfactor/app/commands.hpp"
#include "vfactor/app/config.hpp"

using namespace vfactor;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vfactor_app_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const auto path = dir / "config.yaml";
  std::ofstream(path) << body;
  return path;
}

std::string minimal_config(const fs::path& out, const std::string& seeds = "[0]") {
  return "env:\n  preset: nondec-2x2\n"
         "algorithm:\n  family: qtranpp\n"
         "network:\n  embed_width: 8\n  gru_width: 8\n  mixer_width: 6\n  hyper_width: 8\n"
         "  value_width: 8\n"
         "run:\n  total_env_steps: 60\n  evaluation_interval: 30\n  batch_size: 8\n"
         "seeds: " + seeds + "\noutput_dir: " + out.string() + "\n";
}

int run_cli(const std::string& args, const fs::path& capture) {
  const std::string cmd = std::string(VFACTOR_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, MinimalConfigWritesEveryArtifact) {
  const auto dir = fresh_dir("minimal");
  const auto cfg = write_config(dir, minimal_config(dir / "out"));
  std::ostringstream out, err;
  ASSERT_EQ(app::cmd_train(cfg, out, err), app::kExitOk) << err.str();
  EXPECT_TRUE(fs::exists(dir / "out" / "metrics_0.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "checkpoint_0.bin"));
  EXPECT_TRUE(fs::exists(dir / "out" / "resolved_config.yaml"));
  EXPECT_EQ(train::read_metrics_csv(dir / "out" / "metrics_0.csv").size(), 3u);
  fs::remove_all(dir);
}

TEST(Config, MisspelledKeyIsAUsageErrorNamingTheKey) {
  const auto dir = fresh_dir("typo");
  const auto cfg = write_config(dir, "algorithm:\n  family: qtranpp\n  lamda_opt: 2\n");
  std::ostringstream out, err;
  EXPECT_EQ(app::cmd_train(cfg, out, err), app::kExitUsage);
  EXPECT_NE(err.str().find("lamda_opt"), std::string::npos) << err.str();
  EXPECT_NE(err.str().find(":3"), std::string::npos) << err.str();
  EXPECT_FALSE(fs::exists(dir / "runs"));
  fs::remove_all(dir);
}

TEST(Config, BadValuesAreUsageErrors) {
  const auto dir = fresh_dir("badvals");
  std::ostringstream out, err;
  for (const char* body : {"algorithm:\n  family: dqn\n", "algorithm:\n  gamma: 1.5\n",
                           "run:\n  batch_size: many\n", "seeds: []\n", "env:\n  preset: nope\n",
                           "algorithm: [1, 2\n", "algorithm:\n  family: vdn\n  ablation: mix\n"}) {
    const auto cfg = write_config(dir, body);
    EXPECT_EQ(app::cmd_train(cfg, out, err), app::kExitUsage) << body;
  }
  EXPECT_EQ(app::cmd_train(dir / "missing.yaml", out, err), app::kExitUsage);
  fs::remove_all(dir);
}

TEST(Config, TwoSeedsGiveTwoIndependentRuns) {
  const auto dir = fresh_dir("seeds");
  const auto cfg = write_config(dir, minimal_config(dir / "out", "[0, 1]"));
  std::ostringstream out, err;
  ASSERT_EQ(app::cmd_train(cfg, out, err), app::kExitOk) << err.str();
  const auto a = train::read_metrics_csv(dir / "out" / "metrics_0.csv");
  const auto b = train::read_metrics_csv(dir / "out" / "metrics_1.csv");
  EXPECT_EQ(a.back().seed, 0u);
  EXPECT_EQ(b.back().seed, 1u);
  EXPECT_NE(a.back().l_td, b.back().l_td);
  fs::remove_all(dir);
}

TEST(Config, ResolvedConfigReproducesTheRun) {
  const auto dir = fresh_dir("resolved");
  const auto cfg = write_config(dir, minimal_config(dir / "first"));
  std::ostringstream out, err;
  ASSERT_EQ(app::cmd_train(cfg, out, err), app::kExitOk) << err.str();

  auto resolved = app::load_config(dir / "first" / "resolved_config.yaml");
  resolved.output_dir = dir / "second";
  const auto again = dir / "again.yaml";
  std::ofstream(again) << app::resolved_config_text(resolved);
  ASSERT_EQ(app::cmd_train(again, out, err), app::kExitOk) << err.str();
  EXPECT_EQ(slurp(dir / "first" / "metrics_0.csv"), slurp(dir / "second" / "metrics_0.csv"));
  fs::remove_all(dir);
}

TEST(Config, ResolvedTextIsAFixedPoint) {
  const auto cfg = app::parse_config(
      "env:\n  matrix:\n    num_agents: 2\n    actions_per_agent: 2\n    states:\n"
      "      - probability: 1.0\n        payoff: [1, 0.1, 0.2, 3]\n"
      "algorithm:\n  family: qtranpp\n  gamma: 0.1\n  own_head_utilities: true\n"
      "optimizer:\n  lr_final: 0.00005\n");
  const auto text = app::resolved_config_text(cfg);
  EXPECT_EQ(app::resolved_config_text(app::parse_config(text)), text);
  const auto& m = std::get<env::MatrixGameSpec>(cfg.env);
  EXPECT_EQ(m.states[0].payoff[1], 0.1);
  EXPECT_EQ(cfg.algorithm.gamma, 0.1);
  EXPECT_TRUE(cfg.algorithm.own_head_utilities);
  EXPECT_EQ(cfg.run.final_learning_rate, 5e-5);
}

TEST(Config, GridSectionParses) {
  const auto cfg = app::parse_config("env:\n  grid:\n    width: 4\n    height: 3\n    num_targets: 1\n");
  const auto& g = std::get<env::GridGameSpec>(cfg.env);
  EXPECT_EQ(g.width, 4u);
  EXPECT_EQ(g.height, 3u);
  EXPECT_EQ(g.num_targets, 1u);
  EXPECT_THROW(app::parse_config("env:\n  grid:\n    widht: 4\n"), app::ConfigError);
}

TEST(Config, OutputRootOverride) {
  ::setenv("VFACTOR_OUTPUT_ROOT", "/tmp/vf_root", 1);
  EXPECT_EQ(app::resolve_output_dir("runs/a"), fs::path("/tmp/vf_root/runs/a"));
  EXPECT_EQ(app::resolve_output_dir("/abs/b"), fs::path("/abs/b"));
  ::unsetenv("VFACTOR_OUTPUT_ROOT");
  EXPECT_EQ(app::resolve_output_dir("runs/a"), fs::path("runs/a"));
}

TEST(Reproduce, WritesSummaryAndTables) {
  const auto dir = fresh_dir("repro");
  app::MatrixOptions opts;
  opts.algorithm = "vdn";
  opts.seeds = 2;
  opts.episodes = 50;
  opts.out = dir;
  std::ostringstream out, err;
  ASSERT_EQ(app::cmd_reproduce_matrix(opts, out, err), app::kExitOk) << err.str();
  EXPECT_NE(out.str().find("summary:"), std::string::npos);
  EXPECT_NE(out.str().find("Q_jt"), std::string::npos);
  const auto summary = slurp(dir / "summary.csv");
  EXPECT_EQ(summary.rfind("seed,greedy_action,expected_return\n", 0), 0u);
  EXPECT_TRUE(fs::exists(dir / "qtable_1.csv"));
  EXPECT_TRUE(fs::exists(dir / "metrics_1.csv"));
  opts.algorithm = "dqn";
  EXPECT_EQ(app::cmd_reproduce_matrix(opts, out, err), app::kExitUsage);
  fs::remove_all(dir);
}

TEST(Cli, DumpQtableMatchesTheTrainingRun) {
  const auto dir = fresh_dir("dump");
  app::MatrixOptions opts;
  opts.algorithm = "qtranpp";
  opts.episodes = 40;
  opts.out = dir;
  std::ostringstream out, err;
  ASSERT_EQ(app::cmd_reproduce_matrix(opts, out, err), app::kExitOk) << err.str();
  const auto dumped = dir / "dumped.csv";
  EXPECT_EQ(run_cli("dump-qtable --checkpoint " + (dir / "checkpoint_0.bin").string() +
                        " --env nondec-2x2",
                    dumped),
            0);
  EXPECT_EQ(slurp(dumped), slurp(dir / "qtable_0.csv"));
  EXPECT_EQ(run_cli("dump-qtable --checkpoint " + (dir / "checkpoint_0.bin").string() +
                        " --env grid-capture",
                    dir / "log"),
            2);
  EXPECT_EQ(run_cli("dump-qtable --checkpoint " + (dir / "nope.bin").string() + " --env nondec-2x2",
                    dir / "log"),
            1);
  fs::remove_all(dir);
}

TEST(Cli, UsageErrorsExitWithTwo) {
  const auto dir = fresh_dir("usage");
  EXPECT_EQ(run_cli("", dir / "log"), 2);
  EXPECT_EQ(run_cli("train", dir / "log"), 2);
  EXPECT_EQ(run_cli("check --suite everything", dir / "log"), 2);
  EXPECT_EQ(run_cli("reproduce-matrix --alg qtranpp --ablation big", dir / "log"), 2);
  EXPECT_EQ(run_cli("--help", dir / "log"), 0);
  fs::remove_all(dir);
}

TEST(Cli, CheckPrintsMachineReadableSummary) {
  const auto dir = fresh_dir("check");
  ASSERT_EQ(run_cli("check --suite theorem1 --seed 3", dir / "out.json"), 0);
  const auto text = slurp(dir / "out.json");
  EXPECT_NE(text.find("\"passed\": true"), std::string::npos);
  EXPECT_NE(text.find("\"seed\": 3"), std::string::npos);
  fs::remove_all(dir);
}
