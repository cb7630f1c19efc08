#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vfactor/autodiff/layers.hpp"
#include "vfactor/data/episode.hpp"
#include "vfactor/nets/config.hpp"

namespace vfactor::nets {

/// Per-agent DRQN shared by all agents: FC(obs -> embed) + ReLU, GRU, FC(-> |U|).
/// Agents are told apart by the id one-hot carried in their observation.
class UtilityNetwork {
 public:
  UtilityNetwork() = default;
  UtilityNetwork(ad::ParameterStore& store, const std::string& prefix, std::size_t obs_dim,
                 std::size_t num_actions, const NetworkConfig& config, std::mt19937_64& rng);

  /// One recurrent step: obs [R, obs_dim] -> q [R, |U|].
  std::pair<ad::DiffValue, ad::GruState> step(const ad::ParameterStore& store,
                                              const ad::DiffValue& obs,
                                              const ad::GruState& state) const;

  ad::GruState initial_state(std::size_t rows) const;
  std::size_t hidden_width() const { return gru_.hidden_width(); }
  const ad::Linear& output_layer() const { return out_; }

 private:
  ad::Linear embed_;
  ad::GruCell gru_;
  ad::Linear out_;
};

/// Agent utilities for slots 0..T of a batch (or the first `slots` of them),
/// each [B*N, |U|], with the GRU state threaded through time from zeros.
std::vector<ad::DiffValue> compute_utilities(const UtilityNetwork& net,
                                             const ad::ParameterStore& store,
                                             const data::EpisodeBatch& batch,
                                             std::size_t slots = 0);

}  // namespace vfactor::nets
