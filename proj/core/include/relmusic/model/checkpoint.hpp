// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container (little-endian):
//   magic "RMCKPT\0\0", u32 format version, u64 training step,
//   u64 config length + config JSON bytes,
//   u64 tensor count, then per tensor:
//     u64 name length + name, u64 rank, rank × u64 dims, numel × f64 values.

#pragma once

#include <cstdint>
#include <string>

#include "relmusic/model/config.hpp"
#include "relmusic/model/weights.hpp"

namespace relmusic::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelWeights weights;
  std::uint64_t step = 0;
};

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelWeights& w, std::uint64_t step);
/// Throws CheckpointError for unreadable files, a foreign magic, an
/// unsupported version, or tensors that do not match the stored config.
Checkpoint load_checkpoint(const std::string& path);

/// Throws CheckpointError when a checkpoint cannot serve a config: every
/// field that shapes weights or changes the forward pass must match.
void require_compatible(const ModelConfig& checkpoint_cfg, const ModelConfig& requested);

}  // namespace relmusic::model
