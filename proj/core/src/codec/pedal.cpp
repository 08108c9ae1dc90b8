// SPDX-License-Identifier: Apache-2.0
#include "relmusic/codec/pedal.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <utility>

namespace relmusic::codec {

namespace {

struct Interval {
  std::int64_t down;
  std::int64_t up;
};

std::vector<Interval> pedal_intervals(std::vector<PedalEvent> pedals, std::int64_t end_of_piece) {
  std::stable_sort(pedals.begin(), pedals.end(),
                   [](const PedalEvent& a, const PedalEvent& b) { return a.time_ms < b.time_ms; });
  std::vector<Interval> out;
  bool down = false;
  std::int64_t start = 0;
  for (const auto& p : pedals) {
    if (!down && p.value >= 64) {
      down = true;
      start = p.time_ms;
    } else if (down && p.value < 64) {
      down = false;
      out.push_back({start, p.time_ms});
    }
  }
  if (down) out.push_back({start, std::max(start, end_of_piece)});
  return out;
}

}  // namespace

std::vector<NoteEvent> apply_sustain_pedal(const std::vector<NoteEvent>& notes,
                                           const std::vector<PedalEvent>& pedals) {
  if (pedals.empty() || notes.empty()) return notes;
  std::int64_t end_of_piece = 0;
  for (const auto& n : notes) end_of_piece = std::max(end_of_piece, n.offset_ms);
  const auto intervals = pedal_intervals(pedals, end_of_piece);

  std::vector<NoteEvent> out = notes;
  for (auto& note : out) {
    const auto it = std::find_if(intervals.begin(), intervals.end(), [&](const Interval& iv) {
      return iv.down <= note.offset_ms && note.offset_ms < iv.up;
    });
    if (it == intervals.end()) continue;
    std::int64_t end = it->up;
    for (const auto& other : notes) {
      if (other.pitch == note.pitch && other.onset_ms > note.onset_ms) end = std::min(end, other.onset_ms);
    }
    note.offset_ms = std::max(note.offset_ms, end);
  }
  return out;
}

}  // namespace relmusic::codec
