// SPDX-License-Identifier: Apache-2.0
//
// Performance-event codec (388 symbols):
//   0..127    NOTE_ON<pitch>
//   128..255  NOTE_OFF<pitch>
//   256..355  TIME_SHIFT, id 256+k advances (k+1)*10 ms
//   356..387  SET_VELOCITY<bin>, bin = floor(velocity*32/128)
//
// Times are quantized to 10 ms. At one timestamp, NOTE_OFFs come first, then
// each NOTE_ON preceded by SET_VELOCITY when its bin differs from the current
// one. Gaps longer than 1 s are emitted as 1 s shifts plus a remainder. The
// time origin is the first event.

#pragma once

#include <string>
#include <vector>

#include "relmusic/codec/notes.hpp"

namespace relmusic::codec {

inline constexpr int kNoteOnBase = 0;
inline constexpr int kNoteOffBase = 128;
inline constexpr int kTimeShiftBase = 256;
inline constexpr int kTimeShiftCount = 100;
inline constexpr int kVelocityBase = 356;
inline constexpr int kVelocityBins = 32;
inline constexpr std::size_t kPerformanceVocabSize = 388;
inline constexpr int kTimeQuantumMs = 10;
/// Velocity assumed for NOTE_ONs that precede any SET_VELOCITY.
inline constexpr int kDefaultVelocity = 64;

inline int velocity_bin(int velocity) { return velocity * kVelocityBins / 128; }
inline int bin_velocity(int bin) { return bin * 4 + 2; }

inline int note_on_id(int pitch) { return kNoteOnBase + pitch; }
inline int note_off_id(int pitch) { return kNoteOffBase + pitch; }
/// Shift of `ms` milliseconds, 10..1000 in steps of 10.
inline int time_shift_id(int ms) { return kTimeShiftBase + ms / kTimeQuantumMs - 1; }
inline int velocity_id(int bin) { return kVelocityBase + bin; }

/// Human-readable event name, e.g. "TIME_SHIFT<500>".
std::string describe_event(int id);

TokenSequence performance_encode(const std::vector<NoteEvent>& notes, Diagnostics* diagnostics = nullptr);

struct DecodedPerformance {
  std::vector<NoteEvent> notes;
  Diagnostics diagnostics;
};

DecodedPerformance performance_decode(const TokenSequence& tokens);

}  // namespace relmusic::codec
