#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "vfactor/autodiff/parameter_store.hpp"

namespace vfactor::ad {

// Binary layout, little-endian:
//   magic     8 bytes  "VFCKPT\0\0"
//   version   u32
//   n_meta    u32, then n_meta x (u32 len, key bytes, u32 len, value bytes)
//   n_params  u32, then n_params x
//             (u32 len, name bytes, u32 rank, rank x u64 dims, f64 data row-major)

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::map<std::string, std::string> metadata;
  std::vector<CheckpointTensor> tensors;
};

Checkpoint snapshot(const ParameterStore& params, std::map<std::string, std::string> metadata);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies tensor values into `params`; names and shapes must match exactly.
void restore(ParameterStore& params, const Checkpoint& checkpoint);

}  // namespace vfactor::ad
