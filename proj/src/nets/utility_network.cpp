#include "vfactor/nets/utility_network.hpp"

namespace vfactor::nets {

UtilityNetwork::UtilityNetwork(ad::ParameterStore& store, const std::string& prefix,
                               std::size_t obs_dim, std::size_t num_actions,
                               const NetworkConfig& config, std::mt19937_64& rng)
    : embed_(store, prefix + ".fc1", obs_dim, config.embed_width, rng),
      gru_(store, prefix + ".gru", config.embed_width, config.gru_width, rng),
      out_(store, prefix + ".fc2", config.gru_width, num_actions, rng) {}

std::pair<ad::DiffValue, ad::GruState> UtilityNetwork::step(const ad::ParameterStore& store,
                                                            const ad::DiffValue& obs,
                                                            const ad::GruState& state) const {
  ad::DiffValue x = ad::relu(embed_.forward(store, obs));
  auto [h, next] = gru_.forward(store, x, state);
  return {out_.forward(store, h), next};
}

ad::GruState UtilityNetwork::initial_state(std::size_t rows) const {
  return ad::GruState::zeros(rows, gru_.hidden_width());
}

std::vector<ad::DiffValue> compute_utilities(const UtilityNetwork& net,
                                             const ad::ParameterStore& store,
                                             const data::EpisodeBatch& batch,
                                             std::size_t slots) {
  if (slots == 0 || slots > batch.max_steps + 1) slots = batch.max_steps + 1;
  std::vector<ad::DiffValue> out;
  out.reserve(slots);
  ad::GruState state = net.initial_state(batch.batch_size * batch.num_agents);
  for (std::size_t t = 0; t < slots; ++t) {
    auto [q, next] = net.step(store, batch.obs_at(t), state);
    out.push_back(std::move(q));
    state = std::move(next);
  }
  return out;
}

}  // namespace vfactor::nets
