#include "vfactor/nets/model.hpp"

#include <stdexcept>

#include "vfactor/env/matrix_game.hpp"

namespace vfactor::nets {

std::string to_string(JointKind kind) {
  switch (kind) {
    case JointKind::Sum: return "sum";
    case JointKind::Monotonic: return "monotonic";
    case JointKind::SemiMonotonic: return "semi-monotonic";
    case JointKind::FeedForward: return "feed-forward";
  }
  return "?";
}

std::string to_string(TransformedKind kind) {
  switch (kind) {
    case TransformedKind::None: return "none";
    case TransformedKind::MultiHead: return "multi-head";
    case TransformedKind::SingleHead: return "single-head";
    case TransformedKind::Additive: return "additive";
  }
  return "?";
}

JointKind joint_kind_from_string(const std::string& s) {
  for (auto k : {JointKind::Sum, JointKind::Monotonic, JointKind::SemiMonotonic,
                 JointKind::FeedForward}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown joint estimator kind '" + s + "'");
}

TransformedKind transformed_kind_from_string(const std::string& s) {
  for (auto k : {TransformedKind::None, TransformedKind::MultiHead, TransformedKind::SingleHead,
                 TransformedKind::Additive}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown transformed estimator kind '" + s + "'");
}

FactoredValueModel::FactoredValueModel(ModelDims dims, NetworkConfig config, Architecture arch,
                                       std::uint64_t init_seed)
    : dims_(dims), config_(config), arch_(arch) {
  std::mt19937_64 rng(init_seed);
  build(rng);
}

FactoredValueModel::FactoredValueModel(ModelDims dims, NetworkConfig config, Architecture arch,
                                       std::mt19937_64& init_rng)
    : dims_(dims), config_(config), arch_(arch) {
  build(init_rng);
}

void FactoredValueModel::build(std::mt19937_64& rng) {
  if (dims_.num_agents == 0 || dims_.num_actions == 0 || dims_.obs_dim == 0 ||
      dims_.state_dim == 0) {
    throw std::invalid_argument("model dimensions must all be positive");
  }
  utility_ = UtilityNetwork(params_, "agent", dims_.obs_dim, dims_.num_actions, config_, rng);
  switch (arch_.joint) {
    case JointKind::Sum: joint_ = std::make_unique<SumJoint>(); break;
    case JointKind::Monotonic:
      joint_ = std::make_unique<MonotonicJoint>(params_, "joint", dims_, config_, rng);
      break;
    case JointKind::SemiMonotonic:
      joint_ = std::make_unique<SemiMonotonicJoint>(params_, "joint", dims_, config_, rng);
      break;
    case JointKind::FeedForward:
      joint_ = std::make_unique<FeedForwardJoint>(params_, "joint", dims_, config_, rng);
      break;
  }
  switch (arch_.transformed) {
    case TransformedKind::None: break;
    case TransformedKind::MultiHead:
      transformed_ = std::make_unique<MultiHeadTransformed>(params_, "tran", dims_, config_, rng);
      break;
    case TransformedKind::SingleHead:
      transformed_ = std::make_unique<SingleHeadTransformed>(params_, "tran", dims_, config_, rng);
      break;
    case TransformedKind::Additive:
      transformed_ = std::make_unique<AdditiveTransformed>(params_, "tran", dims_, config_, rng);
      break;
  }
}

ad::DiffValue FactoredValueModel::joint_value(const ad::ParameterStore& store,
                                              const ad::DiffValue& q,
                                              const ad::DiffValue& state) const {
  return joint_->forward(store, q, state);
}

std::vector<ad::DiffValue> FactoredValueModel::transformed_values(
    const ad::ParameterStore& store, const ad::DiffValue& q, const ad::DiffValue& state,
    bool own_utility_only) const {
  if (!transformed_) return {};
  return transformed_->forward(store, q, state, own_utility_only);
}

std::vector<ad::ParamId> FactoredValueModel::joint_parameters() const {
  std::vector<ad::ParamId> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_.name(ad::ParamId{i}).rfind("joint.", 0) == 0) out.push_back(ad::ParamId{i});
  }
  return out;
}

std::vector<std::size_t> greedy_actions(const ad::DiffValue& q,
                                        std::span<const std::uint8_t> avail) {
  const std::size_t rows = q.rows();
  const std::size_t cols = q.cols();
  if (!avail.empty() && avail.size() != rows * cols) {
    throw MaskError("greedy_actions: mask size does not match q " + q.shape().to_string());
  }
  auto d = q.data();
  std::vector<std::size_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    bool found = false;
    double best = 0.0;
    for (std::size_t a = 0; a < cols; ++a) {
      if (!avail.empty() && !avail[r * cols + a]) continue;
      const double v = d[r * cols + a];
      if (!found || v > best) {
        best = v;
        out[r] = a;
        found = true;
      }
    }
    if (!found) throw MaskError("greedy_actions: row " + std::to_string(r) + " has every action masked");
  }
  return out;
}

std::vector<int> greedy_joint_action(const std::vector<std::vector<double>>& q_vectors,
                                     const std::vector<std::vector<bool>>& masks) {
  if (q_vectors.empty()) return {};
  const std::size_t A = q_vectors[0].size();
  std::vector<double> flat;
  std::vector<std::uint8_t> avail;
  for (std::size_t i = 0; i < q_vectors.size(); ++i) {
    if (q_vectors[i].size() != A) throw MaskError("greedy_joint_action: ragged q-vectors");
    flat.insert(flat.end(), q_vectors[i].begin(), q_vectors[i].end());
    for (std::size_t a = 0; a < A; ++a) {
      avail.push_back(masks.empty() ? 1 : static_cast<std::uint8_t>(masks.at(i).at(a)));
    }
  }
  auto q = ad::DiffValue::constant({q_vectors.size(), A}, std::move(flat));
  auto picks = greedy_actions(q, avail);
  return {picks.begin(), picks.end()};
}

ad::DiffValue enumerate_joint_utilities(const std::vector<std::vector<double>>& q_vectors) {
  const std::size_t N = q_vectors.size();
  const std::size_t A = N ? q_vectors[0].size() : 0;
  const std::size_t count = env::joint_action_count(N, A);
  std::vector<double> rows;
  rows.reserve(count * N);
  for (std::size_t j = 0; j < count; ++j) {
    const auto joint = env::joint_from_index(j, N, A);
    for (std::size_t i = 0; i < N; ++i) {
      rows.push_back(q_vectors[i].at(static_cast<std::size_t>(joint[i])));
    }
  }
  return ad::DiffValue::constant({count, N}, std::move(rows));
}

JointEvaluation eval_joint(const FactoredValueModel& model, const ad::ParameterStore& store,
                           std::span<const double> state,
                           const std::vector<std::vector<double>>& q_vectors,
                           std::span<const int> joint_action) {
  const std::size_t N = model.dims().num_agents;
  if (q_vectors.size() != N || joint_action.size() != N) {
    throw std::invalid_argument("eval_joint: expected " + std::to_string(N) + " agents");
  }
  std::vector<double> chosen(N);
  for (std::size_t i = 0; i < N; ++i) {
    const int u = joint_action[i];
    if (u < 0 || static_cast<std::size_t>(u) >= q_vectors[i].size()) {
      throw std::out_of_range("eval_joint: action " + std::to_string(u) + " out of range");
    }
    chosen[i] = q_vectors[i][static_cast<std::size_t>(u)];
  }
  ad::NoGradGuard no_grad;
  auto q = ad::DiffValue::constant({1, N}, std::move(chosen));
  auto s = ad::DiffValue::constant({1, state.size()}, {state.begin(), state.end()});
  JointEvaluation out;
  out.q_jt = model.joint_value(store, q, s).item();
  for (const auto& h : model.transformed_values(store, q, s)) out.q_tran.push_back(h.item());
  return out;
}

}  // namespace vfactor::nets
