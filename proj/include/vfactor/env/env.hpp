#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace vfactor::env {

using Rng = std::mt19937_64;

class EnvError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One transition as seen by the learners.
struct EnvStep {
  std::vector<std::vector<double>> observations;  // per agent, O(s, i)
  std::vector<double> state;                      // global state s
  double reward = 0.0;                            // shared team reward
  bool terminated = false;                        // episode is over
  bool truncated = false;                         // over only because of the step limit
  std::vector<std::vector<bool>> available_actions;
};

class MatrixGame;

/// Episodic Dec-POMDP behind a common interface. Randomness comes from the
/// caller's stream so a run's trace is a pure function of its seeds.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::size_t num_agents() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual std::size_t obs_dim() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t episode_limit() const = 0;

  virtual EnvStep reset(Rng& rng) = 0;
  /// Throws EnvError for out-of-range or masked actions.
  virtual EnvStep step(std::span<const int> joint_action, Rng& rng) = 0;

  virtual const MatrixGame* as_matrix_game() const { return nullptr; }
};

/// One-hot vector of `size` with a 1 at `index`.
std::vector<double> one_hot(std::size_t index, std::size_t size);

}  // namespace vfactor::env
