// SPDX-License-Identifier: Apache-2.0
#include "relmusic/codec/performance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <tuple>

#include "relmusic/errors.hpp"

namespace relmusic::codec {

namespace {

std::int64_t quantize(std::int64_t ms) {
  // Round half up to the 10 ms grid.
  return (ms + kTimeQuantumMs / 2) / kTimeQuantumMs;
}

struct QuantizedNote {
  int pitch;
  int velocity;
  std::int64_t on;   // in quanta
  std::int64_t off;  // in quanta
};

struct Event {
  std::int64_t time;
  int kind;  // 0 = off, 1 = on
  int pitch;
  int velocity;
};

void emit_shift(std::vector<int>& ids, std::int64_t quanta) {
  while (quanta > kTimeShiftCount) {
    ids.push_back(kTimeShiftBase + kTimeShiftCount - 1);
    quanta -= kTimeShiftCount;
  }
  if (quanta > 0) ids.push_back(kTimeShiftBase + static_cast<int>(quanta) - 1);
}

}  // namespace

std::string describe_event(int id) {
  if (id >= kNoteOnBase && id < kNoteOffBase) return "NOTE_ON<" + std::to_string(id - kNoteOnBase) + ">";
  if (id >= kNoteOffBase && id < kTimeShiftBase) return "NOTE_OFF<" + std::to_string(id - kNoteOffBase) + ">";
  if (id >= kTimeShiftBase && id < kVelocityBase) {
    return "TIME_SHIFT<" + std::to_string((id - kTimeShiftBase + 1) * kTimeQuantumMs) + ">";
  }
  if (id >= kVelocityBase && id < static_cast<int>(kPerformanceVocabSize)) {
    return "SET_VELOCITY<" + std::to_string(id - kVelocityBase) + ">";
  }
  return "INVALID<" + std::to_string(id) + ">";
}

TokenSequence performance_encode(const std::vector<NoteEvent>& notes, Diagnostics* diagnostics) {
  TokenSequence seq{CodecId::performance, {}, kPerformanceVocabSize};
  if (notes.empty()) return seq;

  // The clock starts at the first onset; times are quantized relative to it.
  std::int64_t origin = notes.front().onset_ms;
  for (const auto& n : notes) origin = std::min(origin, n.onset_ms);
  std::map<int, std::vector<QuantizedNote>> by_pitch;
  for (const auto& n : notes) {
    validate_note(n);
    QuantizedNote q{n.pitch, n.velocity, quantize(n.onset_ms - origin), quantize(n.offset_ms - origin)};
    if (q.off <= q.on) q.off = q.on + 1;
    by_pitch[n.pitch].push_back(q);
  }

  std::vector<Event> events;
  for (auto& [pitch, list] : by_pitch) {
    std::stable_sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.on < b.on; });
    for (std::size_t i = 0; i < list.size(); ++i) {
      auto& cur = list[i];
      if (i + 1 < list.size()) {
        const auto& next = list[i + 1];
        if (next.on == cur.on) {
          if (diagnostics) {
            diagnostics->push_back("dropped duplicate onset of pitch " + std::to_string(pitch) + " at " +
                                   std::to_string(origin + cur.on * kTimeQuantumMs) + " ms");
          }
          continue;
        }
        // A re-strike ends the sounding note of the same pitch.
        cur.off = std::min(cur.off, next.on);
      }
      events.push_back({cur.on, 1, cur.pitch, cur.velocity});
      events.push_back({cur.off, 0, cur.pitch, 0});
    }
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return std::tie(a.time, a.kind, a.pitch) < std::tie(b.time, b.kind, b.pitch);
  });

  std::int64_t now = events.front().time;
  int current_bin = -1;
  for (const auto& e : events) {
    emit_shift(seq.ids, e.time - now);
    now = e.time;
    if (e.kind == 0) {
      seq.ids.push_back(note_off_id(e.pitch));
    } else {
      const int bin = velocity_bin(e.velocity);
      if (bin != current_bin) {
        seq.ids.push_back(velocity_id(bin));
        current_bin = bin;
      }
      seq.ids.push_back(note_on_id(e.pitch));
    }
  }
  return seq;
}

DecodedPerformance performance_decode(const TokenSequence& tokens) {
  DecodedPerformance out;
  std::int64_t now = 0;
  int velocity = kDefaultVelocity;
  std::map<int, std::deque<std::pair<std::int64_t, int>>> open;  // pitch -> (onset_ms, velocity)
  for (const int id : tokens.ids) {
    if (id < 0 || id >= static_cast<int>(kPerformanceVocabSize)) {
      throw ParseError("performance token id " + std::to_string(id) + " out of range 0..387");
    }
    if (id < kNoteOffBase) {
      open[id - kNoteOnBase].emplace_back(now, velocity);
    } else if (id < kTimeShiftBase) {
      const int pitch = id - kNoteOffBase;
      auto& q = open[pitch];
      if (q.empty()) {
        out.diagnostics.push_back("NOTE_OFF<" + std::to_string(pitch) + "> at " + std::to_string(now) +
                                  " ms has no open note; dropped");
        continue;
      }
      auto [onset, vel] = q.front();
      q.pop_front();
      if (now <= onset) {
        out.diagnostics.push_back("zero-length note of pitch " + std::to_string(pitch) + " at " +
                                  std::to_string(onset) + " ms dropped");
        continue;
      }
      out.notes.push_back({pitch, vel, onset, now, std::nullopt});
    } else if (id < kVelocityBase) {
      now += static_cast<std::int64_t>(id - kTimeShiftBase + 1) * kTimeQuantumMs;
    } else {
      velocity = bin_velocity(id - kVelocityBase);
    }
  }
  for (auto& [pitch, q] : open) {
    for (const auto& [onset, vel] : q) {
      const std::int64_t end = now > onset ? now : onset + kTimeQuantumMs;
      out.diagnostics.push_back("NOTE_ON<" + std::to_string(pitch) + "> at " + std::to_string(onset) +
                                " ms never released; closed at " + std::to_string(end) + " ms");
      out.notes.push_back({pitch, vel, onset, end, std::nullopt});
    }
  }
  sort_notes(out.notes);
  return out;
}

}  // namespace relmusic::codec
