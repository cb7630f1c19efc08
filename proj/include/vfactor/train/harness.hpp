#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vfactor/algo/algorithm_spec.hpp"
#include "vfactor/algo/condition_chain.hpp"
#include "vfactor/algo/losses.hpp"
#include "vfactor/autodiff/rmsprop.hpp"
#include "vfactor/env/presets.hpp"
#include "vfactor/nets/model.hpp"
#include "vfactor/train/buffer.hpp"

namespace vfactor::train {

/// Independent generators derived from one root seed.
struct RngStreams {
  std::mt19937_64 env;
  std::mt19937_64 explore;
  std::mt19937_64 init;
  std::mt19937_64 sample;
  std::mt19937_64 eval;

  explicit RngStreams(std::uint64_t root_seed);
};

std::mt19937_64 derive_stream(std::uint64_t root_seed, std::uint64_t stream_id);

struct ExplorationSchedule {
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::size_t anneal_steps = 20000;

  double operator()(std::size_t env_steps) const;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t total_env_steps = 50000;
  std::size_t train_interval = 1;  // episodes between train steps
  std::size_t evaluation_interval = 1000;
  std::size_t evaluation_episodes = 32;
  bool full_exploration = false;
  std::size_t buffer_capacity = 5000;
  std::size_t batch_size = 32;
  ExplorationSchedule exploration;
  ad::RmsPropConfig optimizer;
  /// When positive, the learning rate falls linearly from optimizer.learning_rate
  /// at step 0 to this value at total_env_steps.
  double final_learning_rate = 0.0;

  double learning_rate_at(std::size_t env_steps) const;
  void validate() const;
};

/// Runs one episode. Each agent independently explores with probability
/// `epsilon` (uniform over its allowed actions) and otherwise acts greedily.
data::Episode collect_episode(env::Environment& env, const nets::FactoredValueModel& model,
                              const ad::ParameterStore& store, double epsilon,
                              std::mt19937_64& env_rng, std::mt19937_64& explore_rng);

/// Owns the target parameters, the optimizer schedule and the minibatch stream.
class Trainer {
 public:
  Trainer(nets::FactoredValueModel& model, algo::AlgorithmSpec spec, ad::RmsPropConfig optimizer,
          std::size_t batch_size, std::mt19937_64 sample_rng);

  algo::LossBreakdown train_step(const EpisodeBuffer& buffer);
  algo::LossBreakdown train_on(const data::EpisodeBatch& batch);

  void set_learning_rate(double lr) { optimizer_.learning_rate = lr; }
  const ad::ParameterStore& target() const { return target_; }
  std::size_t steps() const { return steps_; }
  const algo::AlgorithmSpec& spec() const { return spec_; }

 private:
  nets::FactoredValueModel& model_;
  algo::AlgorithmSpec spec_;
  ad::RmsPropConfig optimizer_;
  std::size_t batch_size_;
  std::mt19937_64 sample_rng_;
  std::mt19937_64 head_rng_;
  ad::ParameterStore target_;
  std::size_t steps_ = 0;
};

/// Q-tables of one matrix-game latent state.
struct StateTables {
  std::size_t state = 0;
  algo::JointTables tables;
};

struct EvaluationResult {
  double mean_return = 0.0;
  double return_std = 0.0;
  std::vector<double> returns;
  std::string greedy_label;
  /// Matrix games only: the greedy joint action per latent state.
  std::vector<std::vector<int>> greedy_per_state;
  std::vector<StateTables> tables;
  std::optional<algo::ChainStats> chain;
};

/// Greedy rollouts, plus Q-tables and chain statistics. Matrix games are
/// checked on every latent state; other environments on every visited step.
EvaluationResult evaluate(env::Environment& env, const nets::FactoredValueModel& model,
                          const ad::ParameterStore& store, std::size_t episodes,
                          std::mt19937_64& rng);

/// Returns of a uniformly random policy.
std::vector<double> random_policy_returns(env::Environment& env, std::size_t episodes,
                                          std::mt19937_64& rng);

/// Q-tables for every latent state of a matrix game.
std::vector<StateTables> matrix_tables(const env::MatrixGame& game,
                                       const nets::FactoredValueModel& model,
                                       const ad::ParameterStore& store);

struct MetricsRecord {
  std::string run_id;
  std::uint64_t seed = 0;
  std::size_t env_steps = 0;
  std::size_t episodes = 0;
  double epsilon = 0.0;
  double l_td = 0.0;
  double l_opt = 0.0;
  double l_nopt = 0.0;
  double total_loss = 0.0;
  double eval_return = 0.0;
  std::string greedy_action;
  double viol_eq_ab = 0.0;
  double viol_gt_ac = 0.0;
  double viol_gt_cd = 0.0;
  double viol_gt_ad = 0.0;
};

const std::vector<std::string>& metrics_columns();
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& rows);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

/// Rows "state,joint_action,estimator,value" with estimators q_jt, q_tran_<h>.
std::string qtable_csv(const std::vector<StateTables>& tables, std::size_t num_agents,
                       std::size_t num_actions);

struct ExperimentResult {
  std::vector<MetricsRecord> records;
  EvaluationResult first_evaluation;
  EvaluationResult final_evaluation;
};

struct ExperimentOutput {
  std::filesystem::path metrics_path;     // empty: not written
  std::filesystem::path checkpoint_path;  // empty: not written
};

ExperimentResult run_experiment(const RunConfig& config, const algo::AlgorithmSpec& spec,
                                const nets::NetworkConfig& network, const env::EnvSpec& env_spec,
                                const std::string& run_id, const ExperimentOutput& output = {});

/// Metadata stored in checkpoints so a model can be rebuilt without a config.
std::map<std::string, std::string> checkpoint_metadata(const algo::AlgorithmSpec& spec,
                                                       const nets::NetworkConfig& network,
                                                       const nets::ModelDims& dims);
nets::FactoredValueModel model_from_checkpoint(const std::filesystem::path& path);

nets::ModelDims dims_of(const env::Environment& env);

}  // namespace vfactor::train
