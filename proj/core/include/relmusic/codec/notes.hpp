// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace relmusic::codec {

struct NoteEvent {
  int pitch = 60;         // MIDI 0..127
  int velocity = 64;      // 1..127
  std::int64_t onset_ms = 0;
  std::int64_t offset_ms = 0;  // > onset_ms
  std::optional<int> voice;    // 0..3 for four-part grids

  bool operator==(const NoteEvent&) const = default;
};

struct PedalEvent {
  std::int64_t time_ms = 0;
  int value = 0;  // 0..127; >= 64 is down

  bool operator==(const PedalEvent&) const = default;
};

enum class CodecId { jsb_grid, performance };

struct TokenSequence {
  CodecId codec = CodecId::performance;
  std::vector<int> ids;
  std::size_t vocab_size = 0;
};

/// Non-fatal conditions raised while converting (dropped notes and the like).
using Diagnostics = std::vector<std::string>;

/// Throws ConfigError when a field is out of range or the note has no duration.
void validate_note(const NoteEvent& note);

/// Orders notes by onset, then pitch.
void sort_notes(std::vector<NoteEvent>& notes);

}  // namespace relmusic::codec
