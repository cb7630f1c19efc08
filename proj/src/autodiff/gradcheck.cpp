#include "vfactor/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "vfactor/autodiff/ops.hpp"

namespace vfactor::ad {

GradCheckReport finite_difference_report(const ScalarObjective& objective,
                                         ParameterStore& params, double step) {
  GradCheckReport report;
  params.zero_grad();
  FrozenDetach frozen;
  const DiffValue root = objective(params);
  if (!std::isfinite(root.item())) {
    report.max_relative_error = std::numeric_limits<double>::infinity();
    return report;
  }
  root.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = params[ParamId{i}].grad();
    analytic.emplace_back(g.begin(), g.end());
  }
  params.zero_grad();

  NoGradGuard no_grad;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamId id{i};
    auto values = params[id].mutable_data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double original = values[k];
      frozen.replay();
      values[k] = original + step;
      const double plus = objective(params).item();
      frozen.replay();
      values[k] = original - step;
      const double minus = objective(params).item();
      values[k] = original;

      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[i][k];
      double err;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        err = std::numeric_limits<double>::infinity();
      } else {
        err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      }
      ++report.checked_elements;
      if (err > report.max_relative_error || report.checked_elements == 1) {
        report.max_relative_error = err;
        report.worst_parameter = params.name(id);
        report.worst_element = k;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

double finite_difference_check(const ScalarObjective& objective, ParameterStore& params,
                               double step) {
  return finite_difference_report(objective, params, step).max_relative_error;
}

}  // namespace vfactor::ad
