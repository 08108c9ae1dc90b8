// SPDX-License-Identifier: Apache-2.0
#include "relmusic/codec/notes.hpp"

#include <algorithm>
#include <string>

#include "relmusic/errors.hpp"

namespace relmusic::codec {

void validate_note(const NoteEvent& note) {
  if (note.pitch < 0 || note.pitch > 127) {
    throw ConfigError("note pitch " + std::to_string(note.pitch) + " outside 0..127");
  }
  if (note.velocity < 1 || note.velocity > 127) {
    throw ConfigError("note velocity " + std::to_string(note.velocity) + " outside 1..127");
  }
  if (note.onset_ms < 0 || note.offset_ms <= note.onset_ms) {
    throw ConfigError("note at " + std::to_string(note.onset_ms) + " ms must have offset_ms > onset_ms >= 0");
  }
  if (note.voice && (*note.voice < 0 || *note.voice > 3)) {
    throw ConfigError("note voice " + std::to_string(*note.voice) + " outside 0..3");
  }
}

void sort_notes(std::vector<NoteEvent>& notes) {
  std::stable_sort(notes.begin(), notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
    if (a.onset_ms != b.onset_ms) return a.onset_ms < b.onset_ms;
    return a.pitch < b.pitch;
  });
}

}  // namespace relmusic::codec
