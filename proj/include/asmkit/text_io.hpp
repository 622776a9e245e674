#pragma once

// Shared helpers for the line-oriented text formats (.pts, ASMMODEL, ASMDATA,
// ASMREG, CSV exports). Numbers are written with 17 significant digits so a
// write/read cycle reproduces every double exactly.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "asmkit/error.hpp"

namespace asmkit::text {

inline std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc{}) throw Error("format_double: conversion failed");
  return std::string(buf, ptr);
}

/// Shortest text that parses back to the same double.
inline std::string format_shortest(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error("format_shortest: conversion failed");
  return std::string(buf, ptr);
}

inline void append_numbers(std::string& out, std::span<const double> values) {
  for (double v : values) {
    out.push_back(' ');
    out += format_double(v);
  }
}

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Strict parse: the whole token must be a finite decimal number.
inline std::optional<double> parse_double(std::string_view token) {
  if (token.empty()) return std::nullopt;
  // from_chars rejects a leading '+'; accept it for hand-written files.
  if (token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

inline std::optional<std::int64_t> parse_int(std::string_view token) {
  if (token.empty()) return std::nullopt;
  if (token.front() == '+') token.remove_prefix(1);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) return std::nullopt;
  return value;
}

struct Line {
  std::size_t number;  // 1-based
  std::string_view text;
};

/// Splits on LF, dropping a trailing CR from each line.
inline std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t start = 0;
  std::size_t number = 1;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    const bool last = end == std::string_view::npos;
    if (last) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!(last && line.empty())) lines.push_back({number, line});
    if (last) break;
    start = end + 1;
    ++number;
  }
  return lines;
}

/// Content lines of a format that allows `#` comments and blank lines.
inline std::vector<Line> content_lines(std::string_view text) {
  std::vector<Line> out;
  for (const auto& l : split_lines(text)) {
    const auto t = trim(l.text);
    if (t.empty() || t.front() == '#') continue;
    out.push_back({l.number, t});
  }
  return out;
}

inline std::vector<double> parse_numbers(std::span<const std::string_view> tokens, std::size_t line,
                                         std::string_view what) {
  std::vector<double> values;
  values.reserve(tokens.size());
  for (auto tok : tokens) {
    auto v = parse_double(tok);
    if (!v) {
      throw FormatError(line, std::string(what) + ": invalid or non-finite number '" + std::string(tok) + "'");
    }
    values.push_back(*v);
  }
  return values;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for '" + path + "'");
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Prefixes each line of `block` with "# ".
inline std::string comment_block(std::string_view block) {
  std::string out;
  for (const auto& l : split_lines(block)) {
    out += l.text.empty() ? "#" : "# ";
    out += l.text;
    out += '\n';
  }
  return out;
}

}  // namespace asmkit::text
