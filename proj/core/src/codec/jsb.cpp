// SPDX-License-Identifier: Apache-2.0
#include "relmusic/codec/jsb.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "relmusic/errors.hpp"

namespace relmusic::codec {

TokenSequence jsb_serialize(const JsbGrid& grid) {
  if (grid.size() != kJsbVoices) {
    throw ParseError("JSB grid must have 4 voice rows, got " + std::to_string(grid.size()));
  }
  const std::size_t steps = grid[0].size();
  for (const auto& row : grid) {
    if (row.size() != steps) throw ParseError("JSB grid rows have different lengths");
  }
  TokenSequence seq{CodecId::jsb_grid, {}, kJsbVocabSize};
  seq.ids.reserve(steps * kJsbVoices);
  for (std::size_t t = 0; t < steps; ++t) {
    for (const auto& row : grid) {
      const int cell = row[t];
      if (cell == kJsbRest) {
        seq.ids.push_back(kJsbRestToken);
      } else if (cell >= 0 && cell <= 127) {
        seq.ids.push_back(cell);
      } else {
        throw ParseError("JSB grid cell " + std::to_string(cell) + " is neither a MIDI pitch nor a rest");
      }
    }
  }
  return seq;
}

JsbGrid jsb_deserialize(const TokenSequence& tokens) {
  if (tokens.ids.size() % kJsbVoices != 0) {
    throw ParseError("JSB token count " + std::to_string(tokens.ids.size()) + " is not a multiple of 4");
  }
  const std::size_t steps = tokens.ids.size() / kJsbVoices;
  JsbGrid grid(kJsbVoices, std::vector<int>(steps));
  for (std::size_t i = 0; i < tokens.ids.size(); ++i) {
    const int id = tokens.ids[i];
    if (id < 0 || id > kJsbRestToken) throw ParseError("JSB token id " + std::to_string(id) + " out of range");
    grid[i % kJsbVoices][i / kJsbVoices] = id == kJsbRestToken ? kJsbRest : id;
  }
  return grid;
}

JsbGrid notes_to_grid(const std::vector<NoteEvent>& notes, std::int64_t sixteenth_ms) {
  if (notes.empty()) throw ConfigError("JSB grid needs notes for 4 voices; the note list is empty");
  if (sixteenth_ms <= 0) throw ConfigError("sixteenth duration must be positive");
  std::int64_t origin = std::numeric_limits<std::int64_t>::max();
  std::int64_t end = 0;
  for (const auto& n : notes) {
    validate_note(n);
    if (!n.voice) throw ConfigError("JSB grid needs a voice (0..3) on every note");
    origin = std::min(origin, n.onset_ms);
    end = std::max(end, n.offset_ms);
  }
  auto column = [&](std::int64_t t) { return (t - origin + sixteenth_ms / 2) / sixteenth_ms; };
  const auto steps = static_cast<std::size_t>(std::max<std::int64_t>(1, column(end)));
  JsbGrid grid(kJsbVoices, std::vector<int>(steps, kJsbRest));
  for (const auto& n : notes) {
    const auto first = static_cast<std::size_t>(column(n.onset_ms));
    const auto last = std::max<std::size_t>(first + 1, static_cast<std::size_t>(column(n.offset_ms)));
    for (std::size_t t = first; t < last && t < steps; ++t) grid[static_cast<std::size_t>(*n.voice)][t] = n.pitch;
  }
  return grid;
}

}  // namespace relmusic::codec
