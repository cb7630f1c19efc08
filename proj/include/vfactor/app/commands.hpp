#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vfactor/algo/algorithm_spec.hpp"
#include "vfactor/train/harness.hpp"

namespace vfactor::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct MatrixSeedResult {
  std::uint64_t seed = 0;
  std::string greedy_label;
  double expected_return = 0.0;
  std::vector<train::StateTables> tables;
  std::vector<train::MetricsRecord> records;
  std::optional<algo::ChainStats> first_chain;
  std::optional<algo::ChainStats> final_chain;
};

struct MatrixReproduction {
  std::string algorithm;
  std::vector<MatrixSeedResult> seeds;
  std::size_t optimal_seeds = 0;  // greedy (A,A)
};

struct MatrixOptions {
  std::string algorithm = "qtranpp";
  algo::Ablation ablation = algo::Ablation::None;
  std::size_t seeds = 1;
  std::uint64_t first_seed = 0;
  std::size_t episodes = 20000;
  double final_learning_rate = 0.0;  // 0: constant learning rate
  bool detach_joint_inputs = false;
  bool own_head_utilities = false;
  std::filesystem::path out;  // empty: nothing written
};

/// Training runs on the nondec-2x2 preset under full exploration.
MatrixReproduction reproduce_matrix(const MatrixOptions& options);

/// Q_jt and per-head Q_tran tables laid out as rows = agent 1, cols = agent 2.
void print_matrix_tables(std::ostream& os, const std::vector<train::StateTables>& tables,
                         std::size_t num_actions);

int cmd_train(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);
int cmd_reproduce_matrix(const MatrixOptions& options, std::ostream& out, std::ostream& err);
int cmd_check(const std::string& suite, std::uint64_t seed, std::ostream& out, std::ostream& err);
int cmd_dump_qtable(const std::filesystem::path& checkpoint, const std::string& preset,
                    std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a command.
int run_cli(int argc, char** argv);

}  // namespace vfactor::app
