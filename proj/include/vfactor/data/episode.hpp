#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vfactor/autodiff/tensor.hpp"

namespace vfactor::data {

/// One recorded episode. Observation-like fields carry length + 1 slots so the
/// step after the last transition is available for bootstrapping.
struct Episode {
  std::size_t length = 0;
  std::size_t num_agents = 0;
  std::size_t num_actions = 0;
  std::size_t obs_dim = 0;
  std::size_t state_dim = 0;

  std::vector<double> obs;           // [(length+1), agents, obs_dim]
  std::vector<double> state;         // [(length+1), state_dim]
  std::vector<std::uint8_t> avail;   // [(length+1), agents, actions]
  std::vector<int> actions;          // [length, agents]
  std::vector<double> rewards;       // [length]
  std::vector<std::uint8_t> terminal;  // [length], 1 = no bootstrap past this step

  double total_return() const;
};

/// Padded, time-major minibatch. Row order inside a time slice is
/// (episode, agent) for per-agent tensors and episode for per-step tensors.
struct EpisodeBatch {
  std::size_t batch_size = 0;
  std::size_t max_steps = 0;
  std::size_t num_agents = 0;
  std::size_t num_actions = 0;
  std::size_t obs_dim = 0;
  std::size_t state_dim = 0;

  std::vector<double> obs;            // [(T+1), B, N, obs_dim]
  std::vector<double> state;          // [(T+1), B, state_dim]
  std::vector<std::uint8_t> avail;    // [(T+1), B, N, A]
  std::vector<int> actions;           // [T, B, N]
  std::vector<double> reward;         // [T, B]
  std::vector<double> terminal;       // [T, B]
  std::vector<double> filled;         // [T, B]

  static EpisodeBatch from_episodes(std::span<const Episode* const> episodes);

  /// Observations at slot t as a [B*N, obs_dim] constant.
  ad::DiffValue obs_at(std::size_t t) const;
  /// Global state at slot t as a [B, state_dim] constant.
  ad::DiffValue state_at(std::size_t t) const;
  std::span<const std::uint8_t> avail_at(std::size_t t) const;
  std::span<const int> actions_at(std::size_t t) const;
  std::size_t valid_steps() const;
};

}  // namespace vfactor::data
