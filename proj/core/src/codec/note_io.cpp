// SPDX-License-Identifier: Apache-2.0
#include "relmusic/codec/note_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <iterator>
#include <sstream>
#include <string_view>

#include "json.hpp"
#include "relmusic/errors.hpp"

namespace relmusic::codec {

namespace {

struct Field {
  std::string_view text;
  std::size_t column;  // 1-based
};

std::vector<Field> split_fields(std::string_view line) {
  std::vector<Field> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

std::int64_t parse_int(const Field& f, std::size_t line, std::string_view what) {
  std::int64_t value = 0;
  const auto* end = f.text.data() + f.text.size();
  auto [ptr, ec] = std::from_chars(f.text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("malformed " + std::string(what) + " '" + std::string(f.text) + "'", line, f.column);
  }
  return value;
}

std::int64_t parse_ranged(const Field& f, std::size_t line, std::string_view what, std::int64_t lo,
                          std::int64_t hi) {
  const auto v = parse_int(f, line, what);
  if (v < lo || v > hi) {
    throw ParseError(std::string(what) + " " + std::to_string(v) + " outside " + std::to_string(lo) + ".." +
                         std::to_string(hi),
                     line, f.column);
  }
  return v;
}

std::int64_t json_int(const nlohmann::json& record, const char* key, std::size_t index, std::int64_t lo,
                      std::int64_t hi) {
  const auto it = record.find(key);
  if (it == record.end() || !it->is_number_integer()) {
    throw ParseError(std::string("record ") + std::to_string(index) + ": missing or non-integer '" + key + "'",
                     index + 1, 0);
  }
  const auto v = it->get<std::int64_t>();
  if (v < lo || v > hi) {
    throw ParseError(std::string("record ") + std::to_string(index) + ": " + key + " " + std::to_string(v) +
                         " outside " + std::to_string(lo) + ".." + std::to_string(hi),
                     index + 1, 0);
  }
  return v;
}

// {"notes": [{"pitch", "velocity", "onset_ms", "offset_ms", "voice"?}], "pedals": [{"time_ms", "value"}]}
// Errors report the record index as the line.
NoteList read_json_note_list(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError(std::string("malformed JSON note list: ") + e.what(), line, column);
  }
  if (!doc.is_object()) throw ParseError("JSON note list must be an object with 'notes' and 'pedals'", 1, 1);
  constexpr std::int64_t kMaxTime = std::int64_t{1} << 40;
  NoteList list;
  std::size_t index = 0;
  for (const auto& r : doc.value("notes", nlohmann::json::array())) {
    NoteEvent n;
    n.pitch = static_cast<int>(json_int(r, "pitch", index, 0, 127));
    n.velocity = static_cast<int>(json_int(r, "velocity", index, 1, 127));
    n.onset_ms = json_int(r, "onset_ms", index, 0, kMaxTime);
    n.offset_ms = json_int(r, "offset_ms", index, n.onset_ms + 1, kMaxTime);
    if (r.contains("voice")) n.voice = static_cast<int>(json_int(r, "voice", index, 0, 3));
    list.notes.push_back(n);
    ++index;
  }
  for (const auto& r : doc.value("pedals", nlohmann::json::array())) {
    PedalEvent p;
    p.time_ms = json_int(r, "time_ms", index, 0, kMaxTime);
    p.value = static_cast<int>(json_int(r, "value", index, 0, 127));
    list.pedals.push_back(p);
    ++index;
  }
  return list;
}

void sort_list(NoteList& list) {
  sort_notes(list.notes);
  std::stable_sort(list.pedals.begin(), list.pedals.end(),
                   [](const PedalEvent& a, const PedalEvent& b) { return a.time_ms < b.time_ms; });
}

}  // namespace

NoteList read_note_list(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    auto list = read_json_note_list(text);
    sort_list(list);
    return list;
  }
  std::istringstream lines(text);
  NoteList list;
  std::string raw;
  std::size_t line_no = 0;
  constexpr std::int64_t kMaxTime = std::int64_t{1} << 40;
  while (std::getline(lines, raw)) {
    ++line_no;
    const auto fields = split_fields(raw);
    if (fields.empty()) continue;
    const auto& kind = fields[0].text;
    if (kind == "note") {
      if (fields.size() != 5 && fields.size() != 6) {
        throw ParseError("note record needs: note pitch velocity onset_ms offset_ms [voice]", line_no,
                         fields[0].column);
      }
      NoteEvent n;
      n.pitch = static_cast<int>(parse_ranged(fields[1], line_no, "pitch", 0, 127));
      n.velocity = static_cast<int>(parse_ranged(fields[2], line_no, "velocity", 1, 127));
      n.onset_ms = parse_ranged(fields[3], line_no, "onset_ms", 0, kMaxTime);
      n.offset_ms = parse_ranged(fields[4], line_no, "offset_ms", 0, kMaxTime);
      if (n.offset_ms <= n.onset_ms) {
        throw ParseError("offset_ms must be greater than onset_ms", line_no, fields[4].column);
      }
      if (fields.size() == 6) n.voice = static_cast<int>(parse_ranged(fields[5], line_no, "voice", 0, 3));
      list.notes.push_back(n);
    } else if (kind == "pedal") {
      if (fields.size() != 3) throw ParseError("pedal record needs: pedal time_ms value", line_no, fields[0].column);
      PedalEvent p;
      p.time_ms = parse_ranged(fields[1], line_no, "time_ms", 0, kMaxTime);
      p.value = static_cast<int>(parse_ranged(fields[2], line_no, "pedal value", 0, 127));
      list.pedals.push_back(p);
    } else {
      throw ParseError("unknown record '" + std::string(kind) + "'", line_no, fields[0].column);
    }
  }
  sort_list(list);
  return list;
}

NoteList read_note_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open note list '" + path + "'");
  return read_note_list(in);
}

void write_note_list(std::ostream& out, const NoteList& list) {
  for (const auto& p : list.pedals) out << "pedal " << p.time_ms << ' ' << p.value << '\n';
  for (const auto& n : list.notes) {
    out << "note " << n.pitch << ' ' << n.velocity << ' ' << n.onset_ms << ' ' << n.offset_ms;
    if (n.voice) out << ' ' << *n.voice;
    out << '\n';
  }
}

JsbGrid read_grid(std::istream& in) {
  JsbGrid grid;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto fields = split_fields(raw);
    if (fields.empty()) continue;
    std::vector<int> row;
    for (const auto& f : fields) {
      if (f.text == "R" || f.text == "r" || f.text == "-") {
        row.push_back(kJsbRest);
      } else {
        row.push_back(static_cast<int>(parse_ranged(f, line_no, "pitch", 0, 127)));
      }
    }
    if (!grid.empty() && row.size() != grid.front().size()) {
      throw ParseError("grid row has " + std::to_string(row.size()) + " steps, expected " +
                           std::to_string(grid.front().size()),
                       line_no, 1);
    }
    grid.push_back(std::move(row));
  }
  if (grid.size() != kJsbVoices) {
    throw ParseError("JSB grid must have exactly 4 rows (S A T B), got " + std::to_string(grid.size()));
  }
  return grid;
}

void write_grid(std::ostream& out, const JsbGrid& grid) {
  for (const auto& row : grid) {
    for (std::size_t t = 0; t < row.size(); ++t) {
      if (t) out << ' ';
      if (row[t] == kJsbRest) {
        out << 'R';
      } else {
        out << row[t];
      }
    }
    out << '\n';
  }
}

std::vector<int> read_tokens(std::istream& in) {
  std::vector<int> ids;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    for (const auto& f : split_fields(raw)) {
      ids.push_back(static_cast<int>(parse_ranged(f, line_no, "token id", 0, 1 << 30)));
    }
  }
  return ids;
}

std::vector<int> read_tokens_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open token file '" + path + "'");
  return read_tokens(in);
}

void write_tokens(std::ostream& out, const std::vector<int>& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out << ' ';
    out << ids[i];
  }
  out << '\n';
}

}  // namespace relmusic::codec
