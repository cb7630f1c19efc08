#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "vfactor/autodiff/parameter_store.hpp"
#include "vfactor/nets/config.hpp"
#include "vfactor/nets/mixers.hpp"
#include "vfactor/nets/utility_network.hpp"

namespace vfactor::nets {

/// Utility network plus the joint and transformed estimators selected by an
/// Architecture. Parameter paths are prefixed "agent.", "joint." and "tran.".
/// The model owns the online parameters; forward methods take the store
/// explicitly so a cloned target store runs through the same architecture.
class FactoredValueModel {
 public:
  FactoredValueModel(ModelDims dims, NetworkConfig config, Architecture arch,
                     std::uint64_t init_seed);
  FactoredValueModel(ModelDims dims, NetworkConfig config, Architecture arch,
                     std::mt19937_64& init_rng);

  FactoredValueModel(FactoredValueModel&&) = default;
  FactoredValueModel& operator=(FactoredValueModel&&) = default;

  ad::ParameterStore& params() { return params_; }
  const ad::ParameterStore& params() const { return params_; }

  const ModelDims& dims() const { return dims_; }
  const NetworkConfig& config() const { return config_; }
  const Architecture& architecture() const { return arch_; }
  const UtilityNetwork& utility() const { return utility_; }
  const JointEstimator& joint() const { return *joint_; }
  const TransformedEstimator* transformed() const { return transformed_.get(); }

  bool has_transformed() const { return transformed_ != nullptr; }
  std::size_t num_heads() const { return transformed_ ? transformed_->num_heads() : 0; }

  /// Q_jt for chosen utilities q [R, N] and state [R, S] -> [R, 1].
  ad::DiffValue joint_value(const ad::ParameterStore& store, const ad::DiffValue& q,
                            const ad::DiffValue& state) const;
  /// Q_tran heads -> each [R, 1]; empty when the architecture has none.
  std::vector<ad::DiffValue> transformed_values(const ad::ParameterStore& store,
                                                const ad::DiffValue& q,
                                                const ad::DiffValue& state,
                                                bool own_utility_only = false) const;

  /// Parameters that only feed Q_jt (the "joint." subtree).
  std::vector<ad::ParamId> joint_parameters() const;

 private:
  void build(std::mt19937_64& rng);

  ModelDims dims_;
  NetworkConfig config_;
  Architecture arch_;
  ad::ParameterStore params_;
  UtilityNetwork utility_;
  std::unique_ptr<JointEstimator> joint_;
  std::unique_ptr<TransformedEstimator> transformed_;
};

class MaskError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Per-row argmax over allowed actions; ties go to the lowest index.
/// `q` is [R, A]; `avail` (optional) is R*A flags. Throws MaskError when a row
/// has no allowed action.
std::vector<std::size_t> greedy_actions(const ad::DiffValue& q,
                                        std::span<const std::uint8_t> avail = {});

/// Greedy joint action from per-agent q-vectors.
std::vector<int> greedy_joint_action(const std::vector<std::vector<double>>& q_vectors,
                                     const std::vector<std::vector<bool>>& masks = {});

struct JointEvaluation {
  double q_jt = 0.0;
  std::vector<double> q_tran;  // one per head
};

/// Q_jt and every Q_tran head for one state, per-agent q-vectors and joint action.
JointEvaluation eval_joint(const FactoredValueModel& model, const ad::ParameterStore& store,
                           std::span<const double> state,
                           const std::vector<std::vector<double>>& q_vectors,
                           std::span<const int> joint_action);

/// Chosen utilities for every joint action of an enumerable space, [A^N, N],
/// rows ordered by env::joint_index.
ad::DiffValue enumerate_joint_utilities(const std::vector<std::vector<double>>& q_vectors);

}  // namespace vfactor::nets
