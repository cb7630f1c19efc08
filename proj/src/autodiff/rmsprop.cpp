#include "vfactor/autodiff/rmsprop.hpp"

#include <cmath>

namespace vfactor::ad {

void rmsprop_step(ParameterStore& params, const RmsPropConfig& config) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamId id{i};
    for (double g : params[id].grad()) {
      if (!std::isfinite(g)) throw NonFiniteGradient(params.name(id));
    }
  }
  const double keep = config.decay;
  const double mix = 1.0 - config.decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamId id{i};
    DiffValue& p = params[id];
    auto values = p.mutable_data();
    auto grads = p.mutable_grad();
    auto& v = params.second_moment(id);
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = grads[k];
      v[k] = keep * v[k] + mix * g * g;
      values[k] -= config.learning_rate * g / (std::sqrt(v[k]) + config.epsilon);
      grads[k] = 0.0;
    }
  }
}

}  // namespace vfactor::ad
