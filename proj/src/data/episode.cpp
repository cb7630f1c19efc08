#include "vfactor/data/episode.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace vfactor::data {

double Episode::total_return() const { return std::accumulate(rewards.begin(), rewards.end(), 0.0); }

EpisodeBatch EpisodeBatch::from_episodes(std::span<const Episode* const> episodes) {
  if (episodes.empty()) throw std::invalid_argument("from_episodes: empty batch");
  const Episode& first = *episodes[0];
  EpisodeBatch b;
  b.batch_size = episodes.size();
  b.num_agents = first.num_agents;
  b.num_actions = first.num_actions;
  b.obs_dim = first.obs_dim;
  b.state_dim = first.state_dim;
  for (const Episode* e : episodes) {
    if (e->num_agents != b.num_agents || e->num_actions != b.num_actions ||
        e->obs_dim != b.obs_dim || e->state_dim != b.state_dim) {
      throw std::invalid_argument("from_episodes: episodes have inconsistent dimensions");
    }
    b.max_steps = std::max(b.max_steps, e->length);
  }
  const std::size_t B = b.batch_size, T = b.max_steps, N = b.num_agents, A = b.num_actions;
  const std::size_t O = b.obs_dim, S = b.state_dim;
  b.obs.assign((T + 1) * B * N * O, 0.0);
  b.state.assign((T + 1) * B * S, 0.0);
  // Padding slots keep every action available so greedy selection is defined.
  b.avail.assign((T + 1) * B * N * A, 1);
  b.actions.assign(T * B * N, 0);
  b.reward.assign(T * B, 0.0);
  b.terminal.assign(T * B, 1.0);
  b.filled.assign(T * B, 0.0);

  for (std::size_t e = 0; e < B; ++e) {
    const Episode& ep = *episodes[e];
    for (std::size_t t = 0; t <= ep.length; ++t) {
      std::copy_n(ep.obs.begin() + static_cast<std::ptrdiff_t>(t * N * O), N * O,
                  b.obs.begin() + static_cast<std::ptrdiff_t>((t * B + e) * N * O));
      std::copy_n(ep.state.begin() + static_cast<std::ptrdiff_t>(t * S), S,
                  b.state.begin() + static_cast<std::ptrdiff_t>((t * B + e) * S));
      std::copy_n(ep.avail.begin() + static_cast<std::ptrdiff_t>(t * N * A), N * A,
                  b.avail.begin() + static_cast<std::ptrdiff_t>((t * B + e) * N * A));
    }
    for (std::size_t t = 0; t < ep.length; ++t) {
      std::copy_n(ep.actions.begin() + static_cast<std::ptrdiff_t>(t * N), N,
                  b.actions.begin() + static_cast<std::ptrdiff_t>((t * B + e) * N));
      b.reward[t * B + e] = ep.rewards[t];
      b.terminal[t * B + e] = ep.terminal[t] ? 1.0 : 0.0;
      b.filled[t * B + e] = 1.0;
    }
  }
  return b;
}

ad::DiffValue EpisodeBatch::obs_at(std::size_t t) const {
  const std::size_t rows = batch_size * num_agents;
  auto first = obs.begin() + static_cast<std::ptrdiff_t>(t * rows * obs_dim);
  return ad::DiffValue::constant({rows, obs_dim},
                                 std::vector<double>(first, first + static_cast<std::ptrdiff_t>(rows * obs_dim)));
}

ad::DiffValue EpisodeBatch::state_at(std::size_t t) const {
  auto first = state.begin() + static_cast<std::ptrdiff_t>(t * batch_size * state_dim);
  return ad::DiffValue::constant(
      {batch_size, state_dim},
      std::vector<double>(first, first + static_cast<std::ptrdiff_t>(batch_size * state_dim)));
}

std::span<const std::uint8_t> EpisodeBatch::avail_at(std::size_t t) const {
  const std::size_t n = batch_size * num_agents * num_actions;
  return std::span<const std::uint8_t>(avail).subspan(t * n, n);
}

std::span<const int> EpisodeBatch::actions_at(std::size_t t) const {
  const std::size_t n = batch_size * num_agents;
  return std::span<const int>(actions).subspan(t * n, n);
}

std::size_t EpisodeBatch::valid_steps() const {
  return static_cast<std::size_t>(std::accumulate(filled.begin(), filled.end(), 0.0));
}

}  // namespace vfactor::data
