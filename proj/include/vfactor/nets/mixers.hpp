#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vfactor/autodiff/layers.hpp"
#include "vfactor/nets/config.hpp"

namespace vfactor::nets {

/// Per-sample parameters of a one-hidden-layer mixer.
struct MixerWeights {
  ad::DiffValue w1;  // [R or 1, n_inputs * width]
  ad::DiffValue b1;  // [R, width]
  ad::DiffValue w2;  // [R or 1, width]
  ad::DiffValue b2;  // [R, 1]
};

/// out = elu(sum_j x_j * W1[j, :] + b1) . w2 + b2, with (W1, b1, w2, b2)
/// produced from the global state by hypernetworks. When `monotonic` is set
/// the weights (never the biases) pass through |.|, so the output is
/// non-decreasing in every input. In heterogeneous mode W1 and w2 are plain
/// learned parameters shared by every state.
class MixingNetwork {
 public:
  MixingNetwork() = default;
  MixingNetwork(ad::ParameterStore& store, const std::string& prefix, std::size_t n_inputs,
                std::size_t state_dim, const NetworkConfig& config, bool monotonic,
                std::mt19937_64& rng);

  MixerWeights weights(const ad::ParameterStore& store, const ad::DiffValue& state) const;
  ad::DiffValue apply(const MixerWeights& w, const ad::DiffValue& inputs) const;
  ad::DiffValue forward(const ad::ParameterStore& store, const ad::DiffValue& inputs,
                        const ad::DiffValue& state) const {
    return apply(weights(store, state), inputs);
  }

  std::size_t n_inputs() const { return n_inputs_; }
  bool monotonic() const { return monotonic_; }
  /// Prefix under which every parameter of this mixer is registered.
  const std::string& prefix() const { return prefix_; }

 private:
  std::string prefix_;
  std::size_t n_inputs_ = 0;
  std::size_t width_ = 0;
  bool monotonic_ = true;
  bool heterogeneous_ = false;
  ad::TwoLayerMlp hyper_w1_;
  ad::Linear hyper_b1_;
  ad::TwoLayerMlp hyper_w2_;
  ad::TwoLayerMlp hyper_b2_;
  ad::ParamId free_w1_;
  ad::ParamId free_w2_;
};

/// Q_jt(s, tau, u) from the chosen-action utilities q [R, N] and state [R, S].
class JointEstimator {
 public:
  virtual ~JointEstimator() = default;
  virtual ad::DiffValue forward(const ad::ParameterStore& store, const ad::DiffValue& q,
                                const ad::DiffValue& state) const = 0;
  /// True when the output is non-decreasing in every utility by construction.
  virtual bool monotonic() const = 0;
};

/// VDN: sum of utilities.
class SumJoint final : public JointEstimator {
 public:
  ad::DiffValue forward(const ad::ParameterStore&, const ad::DiffValue& q,
                        const ad::DiffValue&) const override;
  bool monotonic() const override { return true; }
};

/// QMIX: one monotonic mixer.
class MonotonicJoint final : public JointEstimator {
 public:
  MonotonicJoint(ad::ParameterStore& store, const std::string& prefix, const ModelDims& dims,
                 const NetworkConfig& config, std::mt19937_64& rng);
  ad::DiffValue forward(const ad::ParameterStore& store, const ad::DiffValue& q,
                        const ad::DiffValue& state) const override;
  bool monotonic() const override { return true; }
  const MixingNetwork& mixer() const { return mixer_; }

 private:
  MixingNetwork mixer_;
};

/// Unconstrained mixer plus monotonic mixer over the same utilities.
class SemiMonotonicJoint final : public JointEstimator {
 public:
  SemiMonotonicJoint(ad::ParameterStore& store, const std::string& prefix,
                     const ModelDims& dims, const NetworkConfig& config, std::mt19937_64& rng);
  ad::DiffValue forward(const ad::ParameterStore& store, const ad::DiffValue& q,
                        const ad::DiffValue& state) const override;
  bool monotonic() const override { return false; }
  const MixingNetwork& free_mixer() const { return free_; }
  const MixingNetwork& monotonic_mixer() const { return mono_; }

 private:
  MixingNetwork free_;
  MixingNetwork mono_;
};

/// Feed-forward network on [state, q]: two ReLU hidden layers.
class FeedForwardJoint final : public JointEstimator {
 public:
  FeedForwardJoint(ad::ParameterStore& store, const std::string& prefix, const ModelDims& dims,
                   const NetworkConfig& config, std::mt19937_64& rng);
  ad::DiffValue forward(const ad::ParameterStore& store, const ad::DiffValue& q,
                        const ad::DiffValue& state) const override;
  bool monotonic() const override { return false; }

 private:
  ad::Linear l1_;
  ad::Linear l2_;
  ad::Linear l3_;
};

/// Q_tran heads from the chosen-action utilities; each output is [R, 1].
class TransformedEstimator {
 public:
  virtual ~TransformedEstimator() = default;
  /// With `own_utility_only`, head i treats every q_j, j != i, as a constant.
  virtual std::vector<ad::DiffValue> forward(const ad::ParameterStore& store,
                                             const ad::DiffValue& q, const ad::DiffValue& state,
                                             bool own_utility_only) const = 0;
  virtual std::size_t num_heads() const = 0;
};

/// Head i = q_i + f(q_1, .., v_i(s), .., q_N): one shared monotonic mixer where
/// slot i carries the action-independent value v_i(s) instead of q_i.
class MultiHeadTransformed final : public TransformedEstimator {
 public:
  MultiHeadTransformed(ad::ParameterStore& store, const std::string& prefix,
                       const ModelDims& dims, const NetworkConfig& config, std::mt19937_64& rng);
  std::vector<ad::DiffValue> forward(const ad::ParameterStore& store, const ad::DiffValue& q,
                                     const ad::DiffValue& state,
                                     bool own_utility_only) const override;
  std::size_t num_heads() const override { return num_agents_; }
  const MixingNetwork& mixer() const { return mixer_; }

  /// v(s) [R, N].
  ad::DiffValue values(const ad::ParameterStore& store, const ad::DiffValue& state) const;

 private:
  std::size_t num_agents_ = 0;
  MixingNetwork mixer_;
  ad::TwoLayerMlp value_heads_;
};

/// A single monotonic mixer over all utilities.
class SingleHeadTransformed final : public TransformedEstimator {
 public:
  SingleHeadTransformed(ad::ParameterStore& store, const std::string& prefix,
                        const ModelDims& dims, const NetworkConfig& config, std::mt19937_64& rng);
  std::vector<ad::DiffValue> forward(const ad::ParameterStore& store, const ad::DiffValue& q,
                                     const ad::DiffValue& state,
                                     bool own_utility_only) const override;
  std::size_t num_heads() const override { return 1; }

 private:
  MixingNetwork mixer_;
};

/// Sum of utilities plus a state value V(s).
class AdditiveTransformed final : public TransformedEstimator {
 public:
  AdditiveTransformed(ad::ParameterStore& store, const std::string& prefix,
                      const ModelDims& dims, const NetworkConfig& config, std::mt19937_64& rng);
  std::vector<ad::DiffValue> forward(const ad::ParameterStore& store, const ad::DiffValue& q,
                                     const ad::DiffValue& state,
                                     bool own_utility_only) const override;
  std::size_t num_heads() const override { return 1; }

 private:
  ad::TwoLayerMlp value_;
};

}  // namespace vfactor::nets
