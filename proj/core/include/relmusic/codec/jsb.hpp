// SPDX-License-Identifier: Apache-2.0
//
// Four-part chorale grid codec. A grid holds one row per voice (soprano,
// alto, tenor, bass) and one column per sixteenth note; held notes repeat in
// every column they sound. Serialization interleaves voices per time step:
// S1 A1 T1 B1 S2 A2 T2 B2 ...

#pragma once

#include <cstdint>
#include <vector>

#include "relmusic/codec/notes.hpp"

namespace relmusic::codec {

inline constexpr int kJsbVoices = 4;
/// Grid cell value for a silent voice.
inline constexpr int kJsbRest = -1;
/// Token ids 0..127 are MIDI pitches; 128 is the rest token.
inline constexpr int kJsbRestToken = 128;
inline constexpr std::size_t kJsbVocabSize = 129;

/// voices × time steps.
using JsbGrid = std::vector<std::vector<int>>;

TokenSequence jsb_serialize(const JsbGrid& grid);
JsbGrid jsb_deserialize(const TokenSequence& tokens);

/// Rasterizes voiced notes onto a sixteenth-note grid (sixteenth_ms per
/// column, origin at the first onset). Every note needs a voice 0..3.
JsbGrid notes_to_grid(const std::vector<NoteEvent>& notes, std::int64_t sixteenth_ms = 125);

}  // namespace relmusic::codec
