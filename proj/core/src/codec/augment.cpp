// SPDX-License-Identifier: Apache-2.0
#include "relmusic/codec/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relmusic/errors.hpp"

namespace relmusic::codec {

namespace {

void check_augmentation(const Augmentation& aug) {
  if (aug.transpose < -kMaxTranspose || aug.transpose > kMaxTranspose) {
    throw ConfigError("transpose " + std::to_string(aug.transpose) + " outside -3..3");
  }
  const bool allowed = std::any_of(kStretchFactors.begin(), kStretchFactors.end(),
                                   [&](double f) { return std::abs(f - aug.stretch) < 1e-9; });
  if (!allowed) {
    throw ConfigError("stretch " + std::to_string(aug.stretch) + " not in {0.95, 0.975, 1.0, 1.025, 1.05}");
  }
}

std::int64_t stretch_time(std::int64_t ms, double factor) {
  return static_cast<std::int64_t>(std::llround(static_cast<double>(ms) * factor));
}

}  // namespace

std::vector<NoteEvent> augment(const std::vector<NoteEvent>& notes, const Augmentation& aug,
                               Diagnostics* diagnostics) {
  check_augmentation(aug);
  std::vector<NoteEvent> out;
  out.reserve(notes.size());
  for (const auto& n : notes) {
    NoteEvent m = n;
    m.pitch += aug.transpose;
    if (m.pitch < 0 || m.pitch > 127) {
      if (diagnostics) {
        diagnostics->push_back("pitch " + std::to_string(n.pitch) + " transposed out of range; note dropped");
      }
      continue;
    }
    m.onset_ms = stretch_time(n.onset_ms, aug.stretch);
    m.offset_ms = std::max(m.onset_ms + 1, stretch_time(n.offset_ms, aug.stretch));
    out.push_back(m);
  }
  return out;
}

std::vector<PedalEvent> stretch_pedals(const std::vector<PedalEvent>& pedals, double stretch) {
  check_augmentation({0, stretch});
  std::vector<PedalEvent> out = pedals;
  for (auto& p : out) p.time_ms = stretch_time(p.time_ms, stretch);
  return out;
}

Augmentation sample_augmentation(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> transpose(-kMaxTranspose, kMaxTranspose);
  std::uniform_int_distribution<std::size_t> stretch(0, kStretchFactors.size() - 1);
  Augmentation aug;
  aug.transpose = transpose(rng);
  aug.stretch = kStretchFactors[stretch(rng)];
  return aug;
}

}  // namespace relmusic::codec
