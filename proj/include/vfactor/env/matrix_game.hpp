#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vfactor/env/env.hpp"

namespace vfactor::env {

/// Joint actions are flattened with agent 0 as the most significant digit:
/// index = sum_i u_i * A^(N-1-i).
std::size_t joint_index(std::span<const int> joint_action, std::size_t actions_per_agent);
std::vector<int> joint_from_index(std::size_t index, std::size_t num_agents,
                                  std::size_t actions_per_agent);
std::size_t joint_action_count(std::size_t num_agents, std::size_t actions_per_agent);
/// "AB" style label: one letter per agent.
std::string joint_label(std::span<const int> joint_action);

struct MatrixState {
  double probability = 0.0;
  std::vector<double> payoff;  // indexed by joint_index
};

struct MatrixGameSpec {
  std::size_t num_agents = 2;
  std::size_t actions_per_agent = 2;
  std::vector<MatrixState> states;
  bool state_observable = false;

  /// Throws EnvError describing the first violated invariant.
  void validate() const;
};

/// Sum over latent states of probability * payoff for a fixed joint action.
double expected_return_of_joint_action(const MatrixGameSpec& spec, std::span<const int> joint_action);

/// Two-state, two-action game whose states are equally likely and hidden
/// from the agents. State 0 rewards (A,A) with 4, state 1 rewards (B,B) with 2.
MatrixGameSpec nondecentralizable_2x2();

/// Payoffs uniform in [0, payoff_scale); state probabilities drawn uniform
/// in [1, 2) and normalized.
MatrixGameSpec random_matrix_game(std::size_t num_agents, std::size_t actions_per_agent,
                                  std::size_t num_states, bool state_observable, Rng& rng,
                                  double payoff_scale = 4.0);

/// Single-step game: the latent state is drawn at reset, the episode ends
/// after one joint action with reward payoff[state][joint_action].
class MatrixGame final : public Environment {
 public:
  explicit MatrixGame(MatrixGameSpec spec);

  std::size_t num_agents() const override { return spec_.num_agents; }
  std::size_t num_actions() const override { return spec_.actions_per_agent; }
  std::size_t obs_dim() const override;
  std::size_t state_dim() const override { return spec_.states.size(); }
  std::size_t episode_limit() const override { return 1; }

  EnvStep reset(Rng& rng) override;
  EnvStep step(std::span<const int> joint_action, Rng& rng) override;
  const MatrixGame* as_matrix_game() const override { return this; }

  const MatrixGameSpec& spec() const { return spec_; }
  /// Observation of latent state `k` at the start of an episode.
  EnvStep observe_state(std::size_t k) const;
  std::size_t current_state() const { return current_; }

 private:
  MatrixGameSpec spec_;
  std::size_t current_ = 0;
  bool done_ = true;
};

}  // namespace vfactor::env
