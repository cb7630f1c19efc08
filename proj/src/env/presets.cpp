#include "vfactor/env/presets.hpp"

namespace vfactor::env {

EnvSpec preset(const std::string& name) {
  if (name == "nondec-2x2") return nondecentralizable_2x2();
  if (name == "grid-capture") return GridGameSpec{};
  throw EnvError("unknown environment preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"nondec-2x2", "grid-capture"}; }

std::unique_ptr<Environment> make_environment(const EnvSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::unique_ptr<Environment> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MatrixGameSpec>) {
          return std::make_unique<MatrixGame>(s);
        } else {
          return std::make_unique<GridGame>(s);
        }
      },
      spec);
}

}  // namespace vfactor::env
