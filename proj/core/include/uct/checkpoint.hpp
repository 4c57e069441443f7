#pragma once

// Checkpoint directory layout:
//   manifest.txt          "UCTθ1" magic line, then key=value lines
//   layer<n>_kernels.uct  dump with rows c_{n+1}, cols 9 c_n
//   layer<n>_bias.uct     dump with rows c_{n+1}, cols 1

#include <cstdint>
#include <filesystem>
#include <string>

#include "uct/network.hpp"
#include "uct/space.hpp"

namespace uct {

inline constexpr const char* kCheckpointMagic = "UCT\xce\xb8" "1";

struct CheckpointInfo {
  ImageGrid grid;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

struct Checkpoint {
  NetParams theta;
  CheckpointInfo info;
};

void save_checkpoint(const std::filesystem::path& dir, const NetParams& theta, const CheckpointInfo& info);

/// Throws IoError for missing or malformed files and ConfigError when the
/// manifest and the stored arrays disagree.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace uct
