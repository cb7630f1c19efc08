#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vfactor/algo/algorithm_spec.hpp"
#include "vfactor/env/presets.hpp"
#include "vfactor/nets/config.hpp"
#include "vfactor/train/harness.hpp"

namespace vfactor::app {

/// Malformed configuration. `what()` carries "<source>:<line>: <message>".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::optional<std::string> env_preset;  // set when the env came from a preset
  env::EnvSpec env = env::preset("nondec-2x2");
  algo::AlgorithmSpec algorithm;
  nets::NetworkConfig network;
  train::RunConfig run;  // run.seed is overwritten per entry of `seeds`
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "runs/default";
};

ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every field with its effective value, in the input format.
std::string resolved_config_text(const ExperimentConfig& config);

/// `dir` below $VFACTOR_OUTPUT_ROOT when that is set and `dir` is relative.
std::filesystem::path resolve_output_dir(const std::filesystem::path& dir);

}  // namespace vfactor::app
