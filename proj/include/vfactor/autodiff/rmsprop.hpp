#pragma once

#include <stdexcept>
#include <string>

#include "vfactor/autodiff/parameter_store.hpp"

namespace vfactor::ad {

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& path)
      : std::runtime_error("non-finite gradient in parameter " + path), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct RmsPropConfig {
  double learning_rate = 5e-4;
  double decay = 0.99;
  double epsilon = 1e-5;
};

/// v <- decay * v + (1 - decay) * g^2
/// p <- p - lr * g / (sqrt(v) + epsilon)
/// Gradients are zeroed after the update. Every gradient is checked before
/// any parameter is touched, so a failed step leaves the store unchanged.
void rmsprop_step(ParameterStore& params, const RmsPropConfig& config);

}  // namespace vfactor::ad
