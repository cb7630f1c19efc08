#pragma once

#include <cstddef>
#include <string>

namespace vfactor::nets {

/// Layer widths. Defaults follow the common DRQN/QMIX setup: 64-wide agent
/// layers and GRU, 32-wide mixers, 64-wide hypernetworks.
struct NetworkConfig {
  std::size_t embed_width = 64;
  std::size_t gru_width = 64;
  std::size_t mixer_width = 32;
  std::size_t hyper_width = 64;
  std::size_t feedforward_width = 64;
  std::size_t value_width = 64;
  // Mixer weights become learned parameters instead of hypernetwork outputs.
  bool heterogeneous = false;
};

struct ModelDims {
  std::size_t num_agents = 0;
  std::size_t num_actions = 0;
  std::size_t obs_dim = 0;
  std::size_t state_dim = 0;
};

enum class JointKind { Sum, Monotonic, SemiMonotonic, FeedForward };
enum class TransformedKind { None, MultiHead, SingleHead, Additive };

struct Architecture {
  JointKind joint = JointKind::SemiMonotonic;
  TransformedKind transformed = TransformedKind::MultiHead;
};

std::string to_string(JointKind kind);
std::string to_string(TransformedKind kind);
JointKind joint_kind_from_string(const std::string& s);
TransformedKind transformed_kind_from_string(const std::string& s);

}  // namespace vfactor::nets
