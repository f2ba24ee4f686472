#ifndef EFISH_CHECKPOINT_HPP_
#define EFISH_CHECKPOINT_HPP_

#include <string>

#include "efish/policy.hpp"
#include "efish/sensors.hpp"

namespace efish {

// Everything a reader needs to interpret the parameter blob and the
// observations a checkpointed policy was trained on.
struct CheckpointMeta {
  int obs_dim = 0;
  int hidden_dim = 0;
  int n_mormyromast = 0;
  int n_ampullary = 0;
  int n_knollenorgan = 0;  // 0 when the channel was disabled
  int n_heads = kNumHeads;
  int n_gaussian_heads = kNumGaussianHeads;
  std::uint64_t config_hash = 0;
  std::int64_t env_steps = 0;
  std::int64_t update_index = 0;
};

// Versioned header + named shape manifest + flat little-endian float32
// blob. Load-then-save reproduces the file byte for byte.
void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  PolicyParams params;
  CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace efish

#endif  // EFISH_CHECKPOINT_HPP_
