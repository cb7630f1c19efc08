#include "vfactor/env/grid_game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vfactor::env {

void GridGameSpec::validate() const {
  if (width < 1 || height < 1) throw EnvError("grid game: grid must be at least 1x1");
  if (num_agents < 1) throw EnvError("grid game: num_agents must be >= 1");
  if (episode_limit < 1) throw EnvError("grid game: episode_limit must be >= 1");
  if (num_agents + num_targets > width * height) {
    throw EnvError("grid game: " + std::to_string(num_agents + num_targets) +
                   " entities do not fit on a " + std::to_string(width) + "x" +
                   std::to_string(height) + " grid");
  }
  if (!std::isfinite(capture_reward) || !std::isfinite(damage_penalty) || damage_penalty < 0.0) {
    throw EnvError("grid game: rewards must be finite and damage_penalty >= 0");
  }
}

GridGame::GridGame(GridGameSpec spec) : spec_(spec) { spec_.validate(); }

std::size_t GridGame::obs_dim() const {
  const std::size_t side = 2 * spec_.sight_radius + 1;
  return 2 * side * side + spec_.num_agents;
}

EnvStep GridGame::reset(Rng& rng) {
  const std::size_t cells = spec_.width * spec_.height;
  const std::size_t needed = spec_.num_agents + spec_.num_targets;
  std::vector<std::size_t> all(cells);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> picked;
  std::sample(all.begin(), all.end(), std::back_inserter(picked), needed, rng);
  std::shuffle(picked.begin(), picked.end(), rng);

  auto to_cell = [&](std::size_t c) {
    return Cell{static_cast<int>(c % spec_.width), static_cast<int>(c / spec_.width)};
  };
  agents_.clear();
  targets_.clear();
  for (std::size_t i = 0; i < spec_.num_agents; ++i) agents_.push_back(to_cell(picked[i]));
  for (std::size_t k = 0; k < spec_.num_targets; ++k) {
    targets_.push_back(to_cell(picked[spec_.num_agents + k]));
  }
  alive_.assign(spec_.num_targets, true);
  t_ = 0;
  done_ = false;
  return observe();
}

EnvStep GridGame::step(std::span<const int> joint_action, Rng&) {
  if (done_) throw EnvError("grid game: step called on a finished episode");
  if (joint_action.size() != spec_.num_agents) {
    throw EnvError("grid game: expected " + std::to_string(spec_.num_agents) + " actions, got " +
                   std::to_string(joint_action.size()));
  }
  for (std::size_t i = 0; i < joint_action.size(); ++i) {
    const int u = joint_action[i];
    if (u < 0 || u >= static_cast<int>(kNumActions)) {
      throw EnvError("grid game: agent " + std::to_string(i) + " action " + std::to_string(u) +
                     " outside [0, 5)");
    }
  }

  static constexpr int kDx[kNumActions] = {0, 0, 0, -1, 1};
  static constexpr int kDy[kNumActions] = {0, -1, 1, 0, 0};
  const int w = static_cast<int>(spec_.width);
  const int h = static_cast<int>(spec_.height);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const int u = joint_action[i];
    const int nx = agents_[i].x + kDx[u];
    const int ny = agents_[i].y + kDy[u];
    if (nx >= 0 && nx < w && ny >= 0 && ny < h) agents_[i] = {nx, ny};
  }

  double reward = 0.0;
  for (std::size_t k = 0; k < targets_.size(); ++k) {
    if (!alive_[k]) continue;
    const auto on_target = std::count(agents_.begin(), agents_.end(), targets_[k]);
    if (on_target >= 2) {
      alive_[k] = false;
      reward += spec_.capture_reward;
    }
  }
  if (spec_.damage_penalty > 0.0) {
    for (const auto& a : agents_) {
      bool exposed = false;
      for (std::size_t k = 0; k < targets_.size(); ++k) {
        if (alive_[k] && std::abs(a.x - targets_[k].x) + std::abs(a.y - targets_[k].y) == 1) {
          exposed = true;
        }
      }
      if (exposed) reward -= spec_.damage_penalty;
    }
  }

  ++t_;
  const bool cleared =
      spec_.num_targets > 0 && std::none_of(alive_.begin(), alive_.end(), [](bool b) { return b; });
  const bool out_of_time = t_ >= spec_.episode_limit;
  EnvStep out = observe();
  out.reward = reward;
  out.terminated = cleared || out_of_time;
  out.truncated = out_of_time && !cleared;
  done_ = out.terminated;
  return out;
}

EnvStep GridGame::observe() const {
  EnvStep out;
  const int r = static_cast<int>(spec_.sight_radius);
  const int side = 2 * r + 1;
  const std::size_t patch = static_cast<std::size_t>(side * side);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    std::vector<double> obs(obs_dim(), 0.0);
    const Cell me = agents_[i];
    auto slot = [&](const Cell& c) -> long {
      const int dx = c.x - me.x;
      const int dy = c.y - me.y;
      if (std::abs(dx) > r || std::abs(dy) > r) return -1;
      return (dy + r) * side + (dx + r);
    };
    for (std::size_t j = 0; j < agents_.size(); ++j) {
      if (j == i) continue;
      if (long s = slot(agents_[j]); s >= 0) obs[static_cast<std::size_t>(s)] += 1.0;
    }
    for (std::size_t k = 0; k < targets_.size(); ++k) {
      if (!alive_[k]) continue;
      if (long s = slot(targets_[k]); s >= 0) obs[patch + static_cast<std::size_t>(s)] = 1.0;
    }
    obs[2 * patch + i] = 1.0;
    out.observations.push_back(std::move(obs));
    out.available_actions.emplace_back(kNumActions, true);
  }

  const double sx = spec_.width > 1 ? 1.0 / static_cast<double>(spec_.width - 1) : 0.0;
  const double sy = spec_.height > 1 ? 1.0 / static_cast<double>(spec_.height - 1) : 0.0;
  for (const auto& a : agents_) {
    out.state.push_back(a.x * sx);
    out.state.push_back(a.y * sy);
  }
  for (std::size_t k = 0; k < targets_.size(); ++k) {
    out.state.push_back(targets_[k].x * sx);
    out.state.push_back(targets_[k].y * sy);
    out.state.push_back(alive_[k] ? 1.0 : 0.0);
  }
  return out;
}

}  // namespace vfactor::env
