#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "vfactor/autodiff/parameter_store.hpp"

namespace vfactor::ad {

using ScalarObjective = std::function<DiffValue(const ParameterStore&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked_elements = 0;
};

/// Denominator floor for |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline constexpr double kGradCheckFloor = 1e-4;

/// Compares reverse-mode gradients of `objective` against central finite
/// differences for every element of every parameter. detach() outputs are
/// held at their values from the unperturbed pass. Parameter values are
/// restored and gradients zeroed on return. A non-finite objective yields an
/// infinite error.
GradCheckReport finite_difference_report(const ScalarObjective& objective,
                                         ParameterStore& params, double step = 1e-5);

double finite_difference_check(const ScalarObjective& objective, ParameterStore& params,
                               double step = 1e-5);

}  // namespace vfactor::ad
