#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace vfactor::app {

struct CheckOutcome {
  std::string name;
  bool passed = false;
  nlohmann::json details;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckOutcome> checks;
  double seconds = 0.0;

  bool passed() const;
  nlohmann::json to_json() const;
};

/// Reverse-mode gradients against central differences for every op, layer,
/// estimator and loss. Passes when every relative error is below `tolerance`.
SuiteReport run_grad_suite(std::uint64_t seed = 0, double tolerance = 1e-4);

/// Coordinate-wise +eps probes of the QMIX mixer and every monotonic
/// transformed head over random (state, q) pairs.
SuiteReport run_mono_suite(std::uint64_t seed = 0, std::size_t pairs = 1000,
                           double tolerance = 1e-8);

/// Sufficiency and constructive necessity of the decentralization conditions
/// on random tables with 2-3 agents and 2-4 actions.
SuiteReport run_theorem1_suite(std::uint64_t seed = 0, std::size_t instances = 1000);

/// "grad", "mono", "theorem1" or "all".
std::vector<SuiteReport> run_suites(const std::string& name, std::uint64_t seed = 0);

}  // namespace vfactor::app
