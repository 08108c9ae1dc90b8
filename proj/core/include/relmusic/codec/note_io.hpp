// SPDX-License-Identifier: Apache-2.0
//
// Text formats:
//   note list   one record per line, '#' starts a comment:
//                 note <pitch> <velocity> <onset_ms> <offset_ms> [voice]
//                 pedal <time_ms> <value>
//               or a JSON object {"notes": [...], "pedals": [...]} with the same field names
//   JSB grid    four lines (S, A, T, B) of space-separated pitches; R is a rest
//   tokens      space-separated integer ids, newline-terminated

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "relmusic/codec/jsb.hpp"
#include "relmusic/codec/notes.hpp"

namespace relmusic::codec {

struct NoteList {
  std::vector<NoteEvent> notes;
  std::vector<PedalEvent> pedals;
};

/// Parses and validates a note list; the result is sorted chronologically.
/// Throws ParseError carrying the line and column of the offending field.
NoteList read_note_list(std::istream& in);
NoteList read_note_list_file(const std::string& path);
void write_note_list(std::ostream& out, const NoteList& list);

JsbGrid read_grid(std::istream& in);
void write_grid(std::ostream& out, const JsbGrid& grid);

std::vector<int> read_tokens(std::istream& in);
std::vector<int> read_tokens_file(const std::string& path);
void write_tokens(std::ostream& out, const std::vector<int>& ids);

}  // namespace relmusic::codec
