// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <random>
#include <vector>

#include "relmusic/codec/notes.hpp"

namespace relmusic::codec {

inline constexpr std::array<double, 5> kStretchFactors{0.95, 0.975, 1.0, 1.025, 1.05};
inline constexpr int kMaxTranspose = 3;

struct Augmentation {
  int transpose = 0;
  double stretch = 1.0;
};

/// Shifts pitches by `transpose` semitones and scales all times by `stretch`
/// (rounded to whole milliseconds). Notes leaving 0..127 are dropped and
/// reported. Throws ConfigError for parameters outside the allowed sets.
std::vector<NoteEvent> augment(const std::vector<NoteEvent>& notes, const Augmentation& aug,
                               Diagnostics* diagnostics = nullptr);

std::vector<PedalEvent> stretch_pedals(const std::vector<PedalEvent>& pedals, double stretch);

/// Uniform draw from {-3..3} × {0.95, 0.975, 1.0, 1.025, 1.05}.
Augmentation sample_augmentation(std::mt19937_64& rng);

}  // namespace relmusic::codec
