#pragma once

// 300W-style .pts annotation files:
//
//   version: 1
//   n_points: 68
//   {
//   x y
//   ...
//   }
//
// The reader tolerates CRLF, surrounding whitespace and blank lines. The writer
// always emits the canonical form (LF, one space, 17 significant digits).

#include <string>
#include <utility>
#include <string_view>
#include <vector>

#include "asmkit/error.hpp"
#include "asmkit/shape.hpp"
#include "asmkit/text_io.hpp"

namespace asmkit {

struct PtsRecord {
  int version = 1;
  Shape shape;

  std::size_t n_points() const noexcept { return shape.n_points(); }
};

inline PtsRecord parse_pts(std::string_view input) {
  std::vector<text::Line> lines;
  for (const auto& l : text::split_lines(input)) {
    const auto t = text::trim(l.text);
    if (!t.empty()) lines.push_back({l.number, t});
  }
  const std::size_t eof_line = lines.empty() ? 1 : lines.back().number + 1;
  std::size_t cursor = 0;

  auto header = [&](std::string_view key) -> std::pair<std::size_t, std::int64_t> {
    if (cursor >= lines.size()) throw FormatError(eof_line, "missing '" + std::string(key) + ":' header");
    const auto& l = lines[cursor++];
    const auto colon = l.text.find(':');
    if (colon == std::string_view::npos || text::trim(l.text.substr(0, colon)) != key) {
      throw FormatError(l.number, "expected '" + std::string(key) + ":' header");
    }
    const auto value = text::parse_int(text::trim(l.text.substr(colon + 1)));
    if (!value) throw FormatError(l.number, std::string(key) + " must be an integer");
    return {l.number, *value};
  };

  PtsRecord record;
  auto [version_line, version] = header("version");
  if (version < 0 || version > 1000000) throw FormatError(version_line, "version out of range");
  record.version = static_cast<int>(version);
  auto [count_line, count] = header("n_points");
  if (count < 3) throw FormatError(count_line, "n_points must be at least 3");
  if (count > 1000000) throw FormatError(count_line, "n_points is implausibly large");

  if (cursor >= lines.size() || lines[cursor].text != "{") {
    throw FormatError(cursor < lines.size() ? lines[cursor].number : eof_line, "missing opening brace '{'");
  }
  ++cursor;

  std::vector<double> coords;
  coords.reserve(static_cast<std::size_t>(count) * 2);
  std::size_t seen = 0;
  for (; cursor < lines.size() && lines[cursor].text != "}"; ++cursor) {
    const auto& l = lines[cursor];
    const auto tokens = text::split_ws(l.text);
    if (tokens.size() != 2) throw FormatError(l.number, "expected two coordinates per point");
    for (auto v : text::parse_numbers(tokens, l.number, "coordinate")) coords.push_back(v);
    ++seen;
    if (seen > static_cast<std::size_t>(count)) {
      throw FormatError(l.number, "point count mismatch: more than the declared " + std::to_string(count) + " points");
    }
  }
  if (cursor >= lines.size()) throw FormatError(eof_line, "missing closing brace '}'");
  if (seen != static_cast<std::size_t>(count)) {
    throw FormatError(lines[cursor].number, "point count mismatch: n_points declares " + std::to_string(count) +
                                                " but " + std::to_string(seen) + " points are listed");
  }
  ++cursor;
  if (cursor != lines.size()) throw FormatError(lines[cursor].number, "unexpected content after closing brace");

  record.shape = Shape(std::move(coords));
  return record;
}

inline std::string write_pts(const PtsRecord& record) {
  std::string out = "version: " + std::to_string(record.version) + "\n";
  out += "n_points: " + std::to_string(record.n_points()) + "\n{\n";
  for (std::size_t i = 0; i < record.n_points(); ++i) {
    const auto p = record.shape.point(i);
    out += text::format_double(p.x) + " " + text::format_double(p.y) + "\n";
  }
  out += "}\n";
  return out;
}

}  // namespace asmkit
