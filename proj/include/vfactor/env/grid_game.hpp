#pragma once

#include <cstddef>
#include <vector>

#include "vfactor/env/env.hpp"

namespace vfactor::env {

struct GridGameSpec {
  std::size_t width = 5;
  std::size_t height = 5;
  std::size_t num_agents = 2;
  std::size_t num_targets = 2;
  std::size_t episode_limit = 20;
  double capture_reward = 1.0;
  // Charged per agent standing next to an uncaptured target; 0 disables.
  double damage_penalty = 0.0;
  std::size_t sight_radius = 2;

  void validate() const;
};

/// Cooperative capture on a grid. Agents move in the 4-neighbourhood or stay;
/// a target is captured when at least two agents share its cell after a move.
///
/// Actions: 0 stay, 1 up, 2 down, 3 left, 4 right. Moves off the grid are
/// no-ops. Observation per agent: a (2r+1)^2 egocentric patch counting other
/// agents, a second patch marking uncaptured targets, then the agent's one-hot
/// id. The global state is every agent's normalized (x, y) followed by every
/// target's (x, y, alive).
class GridGame final : public Environment {
 public:
  static constexpr std::size_t kNumActions = 5;

  explicit GridGame(GridGameSpec spec);

  std::size_t num_agents() const override { return spec_.num_agents; }
  std::size_t num_actions() const override { return kNumActions; }
  std::size_t obs_dim() const override;
  std::size_t state_dim() const override { return 2 * spec_.num_agents + 3 * spec_.num_targets; }
  std::size_t episode_limit() const override { return spec_.episode_limit; }

  EnvStep reset(Rng& rng) override;
  EnvStep step(std::span<const int> joint_action, Rng& rng) override;

  const GridGameSpec& spec() const { return spec_; }

  struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
  };
  const std::vector<Cell>& agents() const { return agents_; }
  const std::vector<Cell>& targets() const { return targets_; }
  const std::vector<bool>& alive() const { return alive_; }

 private:
  EnvStep observe() const;

  GridGameSpec spec_;
  std::vector<Cell> agents_;
  std::vector<Cell> targets_;
  std::vector<bool> alive_;
  std::size_t t_ = 0;
  bool done_ = true;
};

}  // namespace vfactor::env
