// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "relmusic/codec/augment.hpp"
#include "relmusic/codec/jsb.hpp"
#include "relmusic/codec/note_io.hpp"
#include "relmusic/codec/pedal.hpp"
#include "relmusic/codec/performance.hpp"
#include "relmusic/errors.hpp"

using namespace relmusic;
using namespace relmusic::codec;

namespace {

NoteEvent note(int pitch, int velocity, std::int64_t on, std::int64_t off) {
  return NoteEvent{pitch, velocity, on, off, std::nullopt};
}

std::vector<NoteEvent> fig6_notes() {
  return {note(60, 80, 0, 400), note(64, 80, 500, 900), note(67, 80, 1000, 1400), note(65, 100, 2500, 3000)};
}

std::vector<PedalEvent> fig6_pedals() { return {{0, 127}, {2000, 0}}; }

// Pedal state at time t by scanning all events at or before t.
bool pedal_down_at(const std::vector<PedalEvent>& pedals, std::int64_t t) {
  bool down = false;
  std::int64_t last = -1;
  for (const auto& p : pedals) {
    if (p.time_ms <= t && p.time_ms >= last) {
      down = p.value >= 64;
      last = p.time_ms;
    }
  }
  return down;
}

// Event-sweep oracle: walk forward one millisecond at a time from the note's
// release while the pedal stays down and no same-pitch onset arrives.
std::vector<NoteEvent> sweep_oracle(const std::vector<NoteEvent>& notes, const std::vector<PedalEvent>& pedals,
                                    std::int64_t horizon) {
  std::vector<NoteEvent> out = notes;
  for (auto& n : out) {
    if (!pedal_down_at(pedals, n.offset_ms)) continue;
    std::int64_t t = n.offset_ms;
    auto restrike = [&](std::int64_t time) {
      return std::any_of(notes.begin(), notes.end(), [&](const NoteEvent& o) {
        return o.pitch == n.pitch && o.onset_ms > n.onset_ms && o.onset_ms == time;
      });
    };
    // A same-pitch onset before the release already ended the note.
    bool struck_again = false;
    for (std::int64_t u = n.onset_ms + 1; u <= n.offset_ms; ++u) struck_again |= restrike(u);
    if (struck_again) continue;
    while (t < horizon && pedal_down_at(pedals, t) && !restrike(t)) ++t;
    n.offset_ms = t;
  }
  return out;
}

std::vector<NoteEvent> random_notes(std::mt19937_64& rng, int count) {
  std::uniform_int_distribution<int> pitch(40, 80);
  std::uniform_int_distribution<int> velocity(1, 127);
  std::uniform_int_distribution<std::int64_t> onset(0, 4000);
  std::uniform_int_distribution<std::int64_t> duration(1, 1500);
  std::vector<NoteEvent> out;
  for (int i = 0; i < count; ++i) {
    const auto on = onset(rng);
    out.push_back(note(pitch(rng), velocity(rng), on, on + duration(rng)));
  }
  sort_notes(out);
  return out;
}

std::int64_t round_to_quantum(std::int64_t ms) { return (ms + 5) / 10 * 10; }

}  // namespace

TEST(JsbCodec, Figure5MeasureSerializes) {
  const JsbGrid grid{{67, 67, 67, 67}, {62, 62, 62, 62}, {59, 59, 57, 57}, {43, 43, 45, 45}};
  const auto seq = jsb_serialize(grid);
  const std::vector<int> expected{67, 62, 59, 43, 67, 62, 59, 43, 67, 62, 57, 45, 67, 62, 57, 45};
  EXPECT_EQ(seq.ids, expected);
  EXPECT_EQ(seq.codec, CodecId::jsb_grid);
  EXPECT_EQ(jsb_deserialize(seq), grid);
}

TEST(JsbCodec, SingleColumnRoundTrips) {
  const JsbGrid grid{{72}, {kJsbRest}, {55}, {40}};
  const auto seq = jsb_serialize(grid);
  EXPECT_EQ(seq.ids, (std::vector<int>{72, kJsbRestToken, 55, 40}));
  EXPECT_EQ(jsb_deserialize(seq), grid);
}

TEST(JsbCodec, RandomGridsRoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> cell(-1, 127);
  for (int trial = 0; trial < 100; ++trial) {
    JsbGrid grid(4, std::vector<int>(16));
    for (auto& row : grid) {
      for (auto& c : row) c = cell(rng);
    }
    const auto seq = jsb_serialize(grid);
    for (const int id : seq.ids) EXPECT_LT(static_cast<std::size_t>(id), kJsbVocabSize);
    EXPECT_EQ(jsb_deserialize(seq), grid);
  }
}

TEST(JsbCodec, WrongVoiceCountIsFormatError) {
  EXPECT_THROW(jsb_serialize(JsbGrid{{60}, {60}, {60}}), ParseError);
  EXPECT_THROW(jsb_serialize(JsbGrid{{60, 61}, {60}, {60}, {60}}), ParseError);
  EXPECT_THROW(jsb_deserialize(TokenSequence{CodecId::jsb_grid, {60, 60, 60}, kJsbVocabSize}), ParseError);
  EXPECT_THROW(jsb_deserialize(TokenSequence{CodecId::jsb_grid, {60, 60, 60, 129}, kJsbVocabSize}), ParseError);
}

TEST(JsbCodec, NotesToGridRepeatsHeldNotes) {
  std::vector<NoteEvent> notes;
  for (int v = 0; v < 4; ++v) {
    NoteEvent n = note(60 + v, 64, 0, 500);  // a quarter note = 4 sixteenths
    n.voice = v;
    notes.push_back(n);
  }
  NoteEvent late = note(70, 64, 500, 625);
  late.voice = 0;
  notes.push_back(late);
  const auto grid = notes_to_grid(notes);
  ASSERT_EQ(grid.size(), 4u);
  EXPECT_EQ(grid[0], (std::vector<int>{60, 60, 60, 60, 70}));
  EXPECT_EQ(grid[3], (std::vector<int>{63, 63, 63, 63, kJsbRest}));
  EXPECT_THROW(notes_to_grid({}), ConfigError);
  EXPECT_THROW(notes_to_grid({note(60, 64, 0, 100)}), ConfigError);
}

TEST(Pedal, ExtendsToPedalRelease) {
  const auto out = apply_sustain_pedal({note(60, 80, 0, 1000)}, {{0, 127}, {2000, 0}});
  EXPECT_EQ(out[0].offset_ms, 2000);
}

TEST(Pedal, NoPedalIsIdentity) {
  const auto notes = fig6_notes();
  EXPECT_EQ(apply_sustain_pedal(notes, {}), notes);
}

TEST(Pedal, RestrikeEndsSustain) {
  const std::vector<NoteEvent> notes{note(60, 80, 0, 1000), note(60, 80, 1500, 1700)};
  const std::vector<PedalEvent> pedals{{0, 127}, {2000, 0}};
  const auto out = apply_sustain_pedal(notes, pedals);
  EXPECT_EQ(out[0].offset_ms, 1500);
  EXPECT_EQ(out, sweep_oracle(notes, pedals, 10000));
}

TEST(Pedal, LongerOriginalDurationIsKept) {
  const auto out = apply_sustain_pedal({note(60, 80, 0, 3000)}, {{0, 127}, {2000, 0}});
  EXPECT_EQ(out[0].offset_ms, 3000);
}

TEST(Pedal, ThresholdIs64) {
  EXPECT_EQ(apply_sustain_pedal({note(60, 80, 0, 100)}, {{0, 63}, {500, 0}})[0].offset_ms, 100);
  EXPECT_EQ(apply_sustain_pedal({note(60, 80, 0, 100)}, {{0, 64}, {500, 0}})[0].offset_ms, 500);
}

TEST(Pedal, MatchesSweepOracleOnRandomInputs) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::int64_t> time(0, 3000);
  std::uniform_int_distribution<int> value(0, 127);
  std::uniform_int_distribution<int> pitch(60, 63);
  std::uniform_int_distribution<std::int64_t> dur(1, 600);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<NoteEvent> notes;
    for (int i = 0; i < 6; ++i) {
      const auto on = time(rng);
      notes.push_back(note(pitch(rng), 64, on, on + dur(rng)));
    }
    sort_notes(notes);
    std::vector<PedalEvent> pedals;
    for (int i = 0; i < 5; ++i) pedals.push_back({time(rng), value(rng)});
    std::sort(pedals.begin(), pedals.end(), [](auto& a, auto& b) { return a.time_ms < b.time_ms; });
    // Close the pedal so the oracle's sweep terminates at a well-defined time.
    pedals.push_back({4000, 0});
    // Equal-time pedal events make the state ambiguous; skip such draws.
    bool ambiguous = false;
    for (std::size_t i = 1; i < pedals.size(); ++i) ambiguous |= pedals[i].time_ms == pedals[i - 1].time_ms;
    bool duplicate_onset = false;
    for (std::size_t i = 0; i < notes.size(); ++i) {
      for (std::size_t j = i + 1; j < notes.size(); ++j) {
        duplicate_onset |= notes[i].pitch == notes[j].pitch && notes[i].onset_ms == notes[j].onset_ms;
      }
    }
    if (ambiguous || duplicate_onset) continue;
    const auto out = apply_sustain_pedal(notes, pedals);
    EXPECT_EQ(out, sweep_oracle(notes, pedals, 10000)) << "trial " << trial;
    for (std::size_t i = 0; i < notes.size(); ++i) EXPECT_GE(out[i].offset_ms, notes[i].offset_ms);
  }
}

TEST(Performance, VelocityBins) {
  EXPECT_EQ(velocity_bin(80), 20);
  EXPECT_EQ(velocity_bin(100), 25);
  EXPECT_EQ(velocity_bin(1), 0);
  EXPECT_EQ(velocity_bin(127), 31);
  EXPECT_EQ(bin_velocity(20), 82);
}

TEST(Performance, Figure6EventSequence) {
  const auto notes = apply_sustain_pedal(fig6_notes(), fig6_pedals());
  const auto seq = performance_encode(notes);
  const std::vector<int> expected{376, 60, 305, 64, 305, 67, 355, 188, 192, 195, 305, 381, 65, 305, 193};
  EXPECT_EQ(seq.ids, expected);
  std::vector<std::string> names;
  for (const int id : seq.ids) names.push_back(describe_event(id));
  EXPECT_EQ(names.front(), "SET_VELOCITY<20>");
  EXPECT_EQ(names[6], "TIME_SHIFT<1000>");
  EXPECT_EQ(names[12], "NOTE_ON<65>");

  const auto decoded = performance_decode(seq);
  EXPECT_TRUE(decoded.diagnostics.empty());
  ASSERT_EQ(decoded.notes.size(), notes.size());
  for (std::size_t i = 0; i < notes.size(); ++i) {
    EXPECT_EQ(decoded.notes[i].pitch, notes[i].pitch);
    EXPECT_LE(std::abs(decoded.notes[i].onset_ms - notes[i].onset_ms), 5);
    EXPECT_LE(std::abs(decoded.notes[i].offset_ms - notes[i].offset_ms), 5);
    EXPECT_EQ(velocity_bin(decoded.notes[i].velocity), velocity_bin(notes[i].velocity));
  }
}

TEST(Performance, LongGapsSplitIntoMaximalChunks) {
  const auto seq = performance_encode({note(60, 64, 0, 2730)});
  EXPECT_EQ(seq.ids, (std::vector<int>{velocity_id(16), 60, 355, 355, time_shift_id(730), 188}));
}

TEST(Performance, RoundTripPreservesNotes) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> count(1, 20);
  for (int trial = 0; trial < 100; ++trial) {
    // Distinct pitches per list keep same-pitch notes from interacting.
    std::vector<int> pitches(88);
    std::iota(pitches.begin(), pitches.end(), 21);
    std::shuffle(pitches.begin(), pitches.end(), rng);
    auto notes = random_notes(rng, count(rng));
    for (std::size_t i = 0; i < notes.size(); ++i) notes[i].pitch = pitches[i];
    notes[0].onset_ms = 0;
    for (auto& n : notes) n.offset_ms = std::max(n.offset_ms, n.onset_ms + 10);
    sort_notes(notes);

    const auto seq = performance_encode(notes);
    for (const int id : seq.ids) ASSERT_LT(static_cast<std::size_t>(id), kPerformanceVocabSize);
    const auto decoded = performance_decode(seq);
    EXPECT_TRUE(decoded.diagnostics.empty());
    ASSERT_EQ(decoded.notes.size(), notes.size());
    auto by_pitch = [](auto v) {
      std::sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.pitch < b.pitch; });
      return v;
    };
    const auto a = by_pitch(notes);
    const auto b = by_pitch(decoded.notes);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].pitch, b[i].pitch);
      EXPECT_LE(std::abs(a[i].onset_ms - b[i].onset_ms), 5);
      EXPECT_LE(std::abs(a[i].offset_ms - b[i].offset_ms), 5);
      EXPECT_LE(std::abs(a[i].velocity - b[i].velocity), 4);
    }
  }
}

TEST(Performance, EncodeDecodeEncodeIsFixedPoint) {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> count(0, 30);
  for (int trial = 0; trial < 100; ++trial) {
    const auto notes = random_notes(rng, count(rng));
    const auto first = performance_encode(notes);
    const auto decoded = performance_decode(first);
    const auto second = performance_encode(decoded.notes);
    EXPECT_EQ(first.ids, second.ids) << "trial " << trial;
  }
}

TEST(Performance, SimultaneousEventsOrderOffsBeforeOns) {
  // Note 62 ends exactly when note 64 starts at a new velocity.
  const auto seq = performance_encode({note(62, 64, 0, 100), note(64, 100, 100, 200)});
  EXPECT_EQ(seq.ids, (std::vector<int>{velocity_id(16), 62, time_shift_id(100), note_off_id(62), velocity_id(25),
                                       64, time_shift_id(100), note_off_id(64)}));
}

TEST(Performance, DecodePolicies) {
  TokenSequence seq{CodecId::performance, {note_off_id(60), 61, time_shift_id(50)}, kPerformanceVocabSize};
  const auto out = performance_decode(seq);
  EXPECT_EQ(out.diagnostics.size(), 2u);  // orphan NOTE_OFF, dangling NOTE_ON
  ASSERT_EQ(out.notes.size(), 1u);
  EXPECT_EQ(out.notes[0].pitch, 61);
  EXPECT_EQ(out.notes[0].velocity, kDefaultVelocity);
  EXPECT_EQ(out.notes[0].offset_ms, 50);
  EXPECT_THROW(performance_decode(TokenSequence{CodecId::performance, {388}, kPerformanceVocabSize}), ParseError);
}

TEST(Performance, EmptyNoteListEncodesToNothing) {
  EXPECT_TRUE(performance_encode({}).ids.empty());
}

TEST(Performance, LeadingSilenceIsDropped) {
  EXPECT_EQ(performance_encode({note(60, 64, 3000, 3100)}).ids,
            (std::vector<int>{velocity_id(16), 60, time_shift_id(100), 188}));
}

TEST(Augment, TransposeAndIdentity) {
  const auto notes = fig6_notes();
  EXPECT_EQ(augment(notes, {3, 1.0})[0].pitch, 63);
  EXPECT_EQ(augment(notes, {0, 1.0}), notes);
}

TEST(Augment, StretchRequantizes) {
  const auto stretched = augment({note(60, 64, 0, 1000)}, {0, 1.05});
  EXPECT_EQ(stretched[0].offset_ms, 1050);
  const auto seq = performance_encode(stretched);
  EXPECT_EQ(seq.ids, (std::vector<int>{velocity_id(16), 60, time_shift_id(1000), time_shift_id(50), 188}));
}

TEST(Augment, OutOfRangeNotesDropped) {
  Diagnostics diag;
  const auto out = augment({note(126, 64, 0, 10), note(60, 64, 0, 10)}, {3, 1.0}, &diag);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].pitch, 63);
  EXPECT_EQ(diag.size(), 1u);
}

TEST(Augment, RejectsParametersOutsideSets) {
  EXPECT_THROW(augment({}, {4, 1.0}), ConfigError);
  EXPECT_THROW(augment({}, {0, 1.1}), ConfigError);
  EXPECT_THROW(stretch_pedals({}, 0.9), ConfigError);
}

TEST(Augment, SamplingCoversTheSets) {
  std::mt19937_64 rng(1);
  std::set<int> transposes;
  std::set<double> stretches;
  for (int i = 0; i < 2000; ++i) {
    const auto a = sample_augmentation(rng);
    transposes.insert(a.transpose);
    stretches.insert(a.stretch);
  }
  EXPECT_EQ(transposes.size(), 7u);
  EXPECT_EQ(stretches.size(), 5u);
}

TEST(NoteIo, ParsesAndSortsRecords) {
  std::istringstream in("# piece\nnote 64 80 500 900\nnote 60 80 0 400 2\npedal 2000 0\npedal 0 127\n");
  const auto list = read_note_list(in);
  ASSERT_EQ(list.notes.size(), 2u);
  EXPECT_EQ(list.notes[0].pitch, 60);
  EXPECT_EQ(list.notes[0].voice, 2);
  EXPECT_EQ(list.pedals[0].time_ms, 0);
  std::ostringstream out;
  write_note_list(out, list);
  std::istringstream back(out.str());
  const auto again = read_note_list(back);
  EXPECT_EQ(again.notes, list.notes);
  EXPECT_EQ(again.pedals, list.pedals);
}

TEST(NoteIo, OneNoteEncodesToVelocityOnShiftOff) {
  std::istringstream in("note 60 80 0 1000\n");
  const auto seq = performance_encode(read_note_list(in).notes);
  EXPECT_EQ(seq.ids, (std::vector<int>{velocity_id(20), 60, time_shift_id(1000), note_off_id(60)}));
}

TEST(NoteIo, EmptyListEncodesEmptyOrFailsForGrid) {
  std::istringstream in("# nothing\n");
  const auto list = read_note_list(in);
  EXPECT_TRUE(performance_encode(list.notes).ids.empty());
  EXPECT_THROW(notes_to_grid(list.notes), ConfigError);
}

TEST(NoteIo, BadFieldReportsLineAndColumn) {
  std::istringstream in("note 60 80 0 100\n\nnote 130 80 0 100\n");
  try {
    read_note_list(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.column(), 6u);
  }
  std::istringstream junk("note 60 eighty 0 100\n");
  EXPECT_THROW(read_note_list(junk), ParseError);
  std::istringstream reversed("note 60 80 100 100\n");
  EXPECT_THROW(read_note_list(reversed), ParseError);
  std::istringstream unknown("chord 60\n");
  EXPECT_THROW(read_note_list(unknown), ParseError);
}

TEST(NoteIo, JsonNoteList) {
  std::istringstream in(R"({"notes": [{"pitch": 64, "velocity": 80, "onset_ms": 500, "offset_ms": 900},
                                      {"pitch": 60, "velocity": 80, "onset_ms": 0, "offset_ms": 400, "voice": 1}],
                            "pedals": [{"time_ms": 0, "value": 127}]})");
  const auto list = read_note_list(in);
  ASSERT_EQ(list.notes.size(), 2u);
  EXPECT_EQ(list.notes[0].pitch, 60);
  EXPECT_EQ(list.notes[0].voice, 1);
  EXPECT_EQ(list.pedals.size(), 1u);
  std::istringstream bad(R"({"notes": [{"pitch": 130, "velocity": 80, "onset_ms": 0, "offset_ms": 10}]})");
  EXPECT_THROW(read_note_list(bad), ParseError);
  std::istringstream broken("{\"notes\": [\n  {\"pitch\": }\n]}");
  try {
    read_note_list(broken);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(NoteIo, GridAndTokenFiles) {
  std::istringstream in("67 67 R\n62 62 62\n59 59 57\n43 43 45\n");
  const auto grid = read_grid(in);
  EXPECT_EQ(grid[0][2], kJsbRest);
  std::ostringstream out;
  write_grid(out, grid);
  EXPECT_EQ(out.str(), "67 67 R\n62 62 62\n59 59 57\n43 43 45\n");
  std::istringstream three("1 2\n3 4\n5 6\n");
  EXPECT_THROW(read_grid(three), ParseError);

  std::ostringstream tok;
  write_tokens(tok, {1, 2, 3});
  EXPECT_EQ(tok.str(), "1 2 3\n");
  std::istringstream back(tok.str());
  EXPECT_EQ(read_tokens(back), (std::vector<int>{1, 2, 3}));
}

TEST(Performance, QuantizesRelativeToFirstOnset) {
  // On an absolute 10 ms grid these would land 9 ms apart from their true offsets.
  const auto decoded = performance_decode(performance_encode({note(60, 64, 3425, 3504), note(64, 64, 3504, 3600)}));
  ASSERT_EQ(decoded.notes.size(), 2u);
  EXPECT_EQ(decoded.notes[0].onset_ms, 0);
  EXPECT_EQ(decoded.notes[0].offset_ms, 80);
  EXPECT_EQ(decoded.notes[1].onset_ms, 80);
  EXPECT_EQ(decoded.notes[1].offset_ms, 180);
}
