#pragma once

#include <algorithm>
#include <bitset>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "strokegan/error.hpp"

namespace strokegan {

inline constexpr int kStrokeTypes = 32;

/// Character → ordered list of 1-based stroke-type ids (1..32).
struct StrokeTable {
  std::map<char32_t, std::vector<int>> entries;
  std::string source_path;
  std::string version;

  bool contains(char32_t cp) const { return entries.contains(cp); }
  std::size_t size() const { return entries.size(); }

  // Provenance fields do not take part in equality.
  friend bool operator==(const StrokeTable& a, const StrokeTable& b) {
    return a.entries == b.entries && a.version == b.version;
  }
};

/// 32 presence bits; bit i is stroke type i + 1.
struct StrokeEncoding {
  std::bitset<kStrokeTypes> bits;

  bool operator[](std::size_t i) const { return bits[i]; }
  std::size_t popcount() const { return bits.count(); }
  std::string to_string() const {
    std::string s(kStrokeTypes, '0');
    for (int i = 0; i < kStrokeTypes; ++i) s[i] = bits[i] ? '1' : '0';
    return s;
  }
  friend bool operator==(const StrokeEncoding&, const StrokeEncoding&) = default;
};

inline std::string format_codepoint(char32_t cp) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
  return buf;
}

/// Parses `U+XXXX` (4 to 6 uppercase or lowercase hex digits). Returns false on
/// anything else.
inline bool parse_codepoint(std::string_view text, char32_t& out) {
  if (text.size() < 6 || text.size() > 8 || text[0] != 'U' || text[1] != '+') return false;
  std::uint32_t value = 0;
  const char* first = text.data() + 2;
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value, 16);
  if (ec != std::errc{} || ptr != last || value > 0x10FFFF) return false;
  out = static_cast<char32_t>(value);
  return true;
}

inline void validate(const StrokeTable& table) {
  for (const auto& [cp, ids] : table.entries) {
    if (ids.empty()) throw Error(ErrorKind::MalformedRecord, format_codepoint(cp) + " has no strokes");
    for (int id : ids) {
      if (id < 1 || id > kStrokeTypes) {
        throw Error(ErrorKind::StrokeIdOutOfRange, format_codepoint(cp) + " stroke id " + std::to_string(id));
      }
    }
  }
}

/// Reads the tab-separated table format (see docs/stroke_table.md).
/// Malformed records are rejected, never repaired.
inline StrokeTable parse_stroke_table(std::istream& in, std::string source_path = {}) {
  StrokeTable table;
  table.source_path = std::move(source_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      constexpr std::string_view tag = "#version ";
      if (line.starts_with(tag) && table.version.empty()) table.version = line.substr(tag.size());
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw LineError(ErrorKind::MalformedRecord, line_no, "missing TAB separator");
    char32_t cp = 0;
    if (!parse_codepoint(std::string_view(line).substr(0, tab), cp)) {
      throw LineError(ErrorKind::MalformedRecord, line_no, "bad codepoint '" + line.substr(0, tab) + "'");
    }
    std::vector<int> ids;
    std::string_view rest = std::string_view(line).substr(tab + 1);
    if (rest.empty()) throw LineError(ErrorKind::MalformedRecord, line_no, "empty stroke list");
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view field = rest.substr(0, comma);
      int id = 0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), id);
      if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
        throw LineError(ErrorKind::MalformedRecord, line_no, "bad stroke id '" + std::string(field) + "'");
      }
      if (id < 1 || id > kStrokeTypes) {
        throw LineError(ErrorKind::StrokeIdOutOfRange, line_no, "stroke id " + std::to_string(id));
      }
      ids.push_back(id);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!table.entries.emplace(cp, std::move(ids)).second) {
      throw LineError(ErrorKind::DuplicateCodepoint, line_no, format_codepoint(cp));
    }
  }
  return table;
}

inline StrokeTable load_stroke_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, path.string());
  return parse_stroke_table(in, path.string());
}

inline void write_stroke_table(std::ostream& out, const StrokeTable& table) {
  if (!table.version.empty()) out << "#version " << table.version << '\n';
  for (const auto& [cp, ids] : table.entries) {
    out << format_codepoint(cp) << '\t';
    for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? "," : "") << ids[i];
    out << '\n';
  }
}

inline void save_stroke_table(const std::filesystem::path& path, const StrokeTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  write_stroke_table(out, table);
}

/// One-bit encoding: multiplicity and order of strokes are discarded. The only
/// place where 1-based stroke ids become 0-based bit indices.
inline StrokeEncoding encode_character(const StrokeTable& table, char32_t cp) {
  const auto it = table.entries.find(cp);
  if (it == table.entries.end()) throw Error(ErrorKind::UnknownCharacter, format_codepoint(cp));
  StrokeEncoding enc;
  for (int id : it->second) {
    if (id < 1 || id > kStrokeTypes) throw Error(ErrorKind::StrokeIdOutOfRange, std::to_string(id));
    enc.bits.set(static_cast<std::size_t>(id - 1));
  }
  return enc;
}

/// Groups (size ≥ 2) of characters sharing one encoding, each group in
/// codepoint order, groups ordered by their first member.
inline std::vector<std::vector<char32_t>> encoding_collisions(const StrokeTable& table) {
  std::map<unsigned long, std::vector<char32_t>> by_bits;
  for (const auto& [cp, ids] : table.entries) by_bits[encode_character(table, cp).bits.to_ulong()].push_back(cp);
  std::vector<std::vector<char32_t>> groups;
  for (auto& [bits, members] : by_bits) {
    if (members.size() >= 2) groups.push_back(std::move(members));
  }
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return groups;
}

}  // namespace strokegan
