#include "vfactor/nets/mixers.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace vfactor::nets {

namespace {

ad::DiffValue maybe_abs(const ad::DiffValue& x, bool monotonic) {
  return monotonic ? ad::abs(x) : x;
}

}  // namespace

MixingNetwork::MixingNetwork(ad::ParameterStore& store, const std::string& prefix,
                             std::size_t n_inputs, std::size_t state_dim,
                             const NetworkConfig& config, bool monotonic, std::mt19937_64& rng)
    : prefix_(prefix),
      n_inputs_(n_inputs),
      width_(config.mixer_width),
      monotonic_(monotonic),
      heterogeneous_(config.heterogeneous) {
  const std::size_t E = config.mixer_width;
  const std::size_t H = config.hyper_width;
  if (heterogeneous_) {
    free_w1_ = store.add_uniform(prefix + ".w1", {1, n_inputs * E},
                                 1.0 / std::sqrt(static_cast<double>(n_inputs)), rng);
    free_w2_ = store.add_uniform(prefix + ".w2", {1, E}, 1.0 / std::sqrt(static_cast<double>(E)),
                                 rng);
  } else {
    hyper_w1_ = ad::TwoLayerMlp(store, prefix + ".hyper_w1", state_dim, H, n_inputs * E, rng);
    hyper_w2_ = ad::TwoLayerMlp(store, prefix + ".hyper_w2", state_dim, H, E, rng);
  }
  hyper_b1_ = ad::Linear(store, prefix + ".hyper_b1", state_dim, E, rng);
  hyper_b2_ = ad::TwoLayerMlp(store, prefix + ".hyper_b2", state_dim, H, 1, rng);
}

MixerWeights MixingNetwork::weights(const ad::ParameterStore& store,
                                    const ad::DiffValue& state) const {
  MixerWeights w;
  if (heterogeneous_) {
    w.w1 = maybe_abs(store[free_w1_], monotonic_);
    w.w2 = maybe_abs(store[free_w2_], monotonic_);
  } else {
    w.w1 = maybe_abs(hyper_w1_.forward(store, state), monotonic_);
    w.w2 = maybe_abs(hyper_w2_.forward(store, state), monotonic_);
  }
  w.b1 = hyper_b1_.forward(store, state);
  w.b2 = hyper_b2_.forward(store, state);
  return w;
}

ad::DiffValue MixingNetwork::apply(const MixerWeights& w, const ad::DiffValue& inputs) const {
  if (inputs.cols() != n_inputs_) {
    throw ad::ShapeError("mixer " + prefix_ + ": expected " + std::to_string(n_inputs_) +
                         " inputs, got " + inputs.shape().to_string());
  }
  const std::size_t E = width_;
  ad::DiffValue hidden = w.b1;
  for (std::size_t j = 0; j < n_inputs_; ++j) {
    hidden = ad::add(hidden, ad::mul(ad::slice_cols(inputs, j, j + 1),
                                     ad::slice_cols(w.w1, j * E, (j + 1) * E)));
  }
  hidden = ad::elu(hidden);
  return ad::add(ad::sum_cols(ad::mul(hidden, w.w2)), w.b2);
}

ad::DiffValue SumJoint::forward(const ad::ParameterStore&, const ad::DiffValue& q,
                                const ad::DiffValue&) const {
  return ad::sum_cols(q);
}

MonotonicJoint::MonotonicJoint(ad::ParameterStore& store, const std::string& prefix,
                               const ModelDims& dims, const NetworkConfig& config,
                               std::mt19937_64& rng)
    : mixer_(store, prefix + ".mixer", dims.num_agents, dims.state_dim, config, true, rng) {}

ad::DiffValue MonotonicJoint::forward(const ad::ParameterStore& store, const ad::DiffValue& q,
                                      const ad::DiffValue& state) const {
  return mixer_.forward(store, q, state);
}

SemiMonotonicJoint::SemiMonotonicJoint(ad::ParameterStore& store, const std::string& prefix,
                                       const ModelDims& dims, const NetworkConfig& config,
                                       std::mt19937_64& rng)
    : free_(store, prefix + ".free", dims.num_agents, dims.state_dim, config, false, rng),
      mono_(store, prefix + ".mono", dims.num_agents, dims.state_dim, config, true, rng) {}

ad::DiffValue SemiMonotonicJoint::forward(const ad::ParameterStore& store, const ad::DiffValue& q,
                                          const ad::DiffValue& state) const {
  return ad::add(free_.forward(store, q, state), mono_.forward(store, q, state));
}

FeedForwardJoint::FeedForwardJoint(ad::ParameterStore& store, const std::string& prefix,
                                   const ModelDims& dims, const NetworkConfig& config,
                                   std::mt19937_64& rng)
    : l1_(store, prefix + ".ff.0", dims.state_dim + dims.num_agents, config.feedforward_width, rng),
      l2_(store, prefix + ".ff.1", config.feedforward_width, config.feedforward_width, rng),
      l3_(store, prefix + ".ff.2", config.feedforward_width, 1, rng) {}

ad::DiffValue FeedForwardJoint::forward(const ad::ParameterStore& store, const ad::DiffValue& q,
                                        const ad::DiffValue& state) const {
  const std::array<ad::DiffValue, 2> parts{state, q};
  ad::DiffValue x = ad::concat_cols(parts);
  x = ad::relu(l1_.forward(store, x));
  x = ad::relu(l2_.forward(store, x));
  return l3_.forward(store, x);
}

MultiHeadTransformed::MultiHeadTransformed(ad::ParameterStore& store, const std::string& prefix,
                                           const ModelDims& dims, const NetworkConfig& config,
                                           std::mt19937_64& rng)
    : num_agents_(dims.num_agents),
      mixer_(store, prefix + ".mixer", dims.num_agents, dims.state_dim, config, true, rng),
      value_heads_(store, prefix + ".values", dims.state_dim, config.value_width, dims.num_agents,
                   rng) {}

ad::DiffValue MultiHeadTransformed::values(const ad::ParameterStore& store,
                                           const ad::DiffValue& state) const {
  return value_heads_.forward(store, state);
}

std::vector<ad::DiffValue> MultiHeadTransformed::forward(const ad::ParameterStore& store,
                                                         const ad::DiffValue& q,
                                                         const ad::DiffValue& state,
                                                         bool own_utility_only) const {
  const MixerWeights w = mixer_.weights(store, state);
  const ad::DiffValue others = own_utility_only ? ad::detach(q) : q;
  const ad::DiffValue v = values(store, state);
  std::vector<ad::DiffValue> heads;
  heads.reserve(num_agents_);
  std::vector<ad::DiffValue> columns(num_agents_);
  for (std::size_t i = 0; i < num_agents_; ++i) {
    for (std::size_t j = 0; j < num_agents_; ++j) {
      columns[j] = ad::slice_cols(j == i ? v : others, j, j + 1);
    }
    ad::DiffValue mixed = mixer_.apply(w, ad::concat_cols(columns));
    heads.push_back(ad::add(ad::slice_cols(q, i, i + 1), mixed));
  }
  return heads;
}

SingleHeadTransformed::SingleHeadTransformed(ad::ParameterStore& store, const std::string& prefix,
                                             const ModelDims& dims, const NetworkConfig& config,
                                             std::mt19937_64& rng)
    : mixer_(store, prefix + ".mixer", dims.num_agents, dims.state_dim, config, true, rng) {}

std::vector<ad::DiffValue> SingleHeadTransformed::forward(const ad::ParameterStore& store,
                                                          const ad::DiffValue& q,
                                                          const ad::DiffValue& state,
                                                          bool) const {
  return {mixer_.forward(store, q, state)};
}

AdditiveTransformed::AdditiveTransformed(ad::ParameterStore& store, const std::string& prefix,
                                         const ModelDims& dims, const NetworkConfig& config,
                                         std::mt19937_64& rng)
    : value_(store, prefix + ".value", dims.state_dim, config.value_width, 1, rng) {}

std::vector<ad::DiffValue> AdditiveTransformed::forward(const ad::ParameterStore& store,
                                                        const ad::DiffValue& q,
                                                        const ad::DiffValue& state,
                                                        bool) const {
  return {ad::add(ad::sum_cols(q), value_.forward(store, state))};
}

}  // namespace vfactor::nets
