#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "vfactor/env/grid_game.hpp"
#include "vfactor/env/matrix_game.hpp"

namespace vfactor::env {

using EnvSpec = std::variant<MatrixGameSpec, GridGameSpec>;

/// Built-in environments: "nondec-2x2" and "grid-capture".
EnvSpec preset(const std::string& name);
std::vector<std::string> preset_names();

std::unique_ptr<Environment> make_environment(const EnvSpec& spec);

}  // namespace vfactor::env
