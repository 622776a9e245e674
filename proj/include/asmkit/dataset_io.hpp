#pragma once

// ASMDATA v1 container:
//
//   ASMDATA v1
//   # optional comment lines
//   n_points <n>
//   train <count>
//   test <count>
//   <split> <yaw> <pitch> <roll> <observation: 2n numbers> <ground truth: 2n numbers>
//   ... one record per line, train + test lines in total
//
// Angles are degrees; numbers use 17 significant digits.

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "asmkit/error.hpp"
#include "asmkit/synthetic.hpp"
#include "asmkit/text_io.hpp"

namespace asmkit {

inline std::string serialize_dataset(const Dataset& data, std::string_view comments = {}) {
  std::string out = "ASMDATA v1\n";
  out += text::comment_block(comments);
  out += "n_points " + std::to_string(data.n_points) + "\n";
  out += "train " + std::to_string(data.count(Split::train)) + "\n";
  out += "test " + std::to_string(data.count(Split::test)) + "\n";
  for (const auto& r : data.records) {
    out += to_string(r.split);
    const double pose[] = {r.pose.yaw, r.pose.pitch, r.pose.roll};
    text::append_numbers(out, pose);
    text::append_numbers(out, r.observation);
    text::append_numbers(out, r.gt_shape.coords());
    out += '\n';
  }
  return out;
}

inline Dataset deserialize_dataset(std::string_view input) {
  const auto all = text::split_lines(input);
  if (all.empty() || text::trim(all.front().text) != "ASMDATA v1") throw FormatError(1, "expected header 'ASMDATA v1'");
  std::vector<text::Line> lines;
  for (std::size_t i = 1; i < all.size(); ++i) {
    const auto t = text::trim(all[i].text);
    if (t.empty() || t.front() == '#') continue;
    lines.push_back({all[i].number, t});
  }
  const std::size_t eof_line = all.back().number + 1;

  std::size_t cursor = 0;
  auto count_line = [&](std::string_view key, std::int64_t min_value) {
    if (cursor >= lines.size()) throw FormatError(eof_line, "missing '" + std::string(key) + "' header");
    const auto& l = lines[cursor++];
    const auto tok = text::split_ws(l.text);
    if (tok.size() != 2 || tok[0] != key) throw FormatError(l.number, "expected '" + std::string(key) + " <count>'");
    const auto v = text::parse_int(tok[1]);
    if (!v || *v < min_value) throw FormatError(l.number, std::string(key) + " must be an integer >= " + std::to_string(min_value));
    return static_cast<std::size_t>(*v);
  };

  Dataset data;
  data.n_points = count_line("n_points", 3);
  if (data.n_points > 1000000) throw FormatError(lines[0].number, "n_points is implausibly large");
  const std::size_t n_train = count_line("train", 0);
  const std::size_t n_test = count_line("test", 0);
  const std::size_t expected = n_train + n_test;
  const std::size_t dim = 2 * data.n_points;

  std::size_t seen_train = 0, seen_test = 0;
  data.records.reserve(std::min(expected, lines.size()));
  for (; cursor < lines.size(); ++cursor) {
    const auto& l = lines[cursor];
    if (data.records.size() == expected) {
      throw FormatError(l.number, "more records than the " + std::to_string(expected) + " declared in the header");
    }
    const auto tok = text::split_ws(l.text);
    if (tok.size() != 4 + 2 * dim) {
      throw FormatError(l.number, "record has " + std::to_string(tok.size()) + " fields, expected " +
                                      std::to_string(4 + 2 * dim));
    }
    DatasetRecord r;
    if (tok[0] == "train") {
      r.split = Split::train;
      ++seen_train;
    } else if (tok[0] == "test") {
      r.split = Split::test;
      ++seen_test;
    } else {
      throw FormatError(l.number, "split must be 'train' or 'test'");
    }
    const auto values = text::parse_numbers(std::span(tok).subspan(1), l.number, "record");
    r.pose = {values[0], values[1], values[2]};
    r.observation.assign(values.begin() + 3, values.begin() + 3 + static_cast<std::ptrdiff_t>(dim));
    r.gt_shape = Shape(std::vector<double>(values.begin() + 3 + static_cast<std::ptrdiff_t>(dim), values.end()));
    data.records.push_back(std::move(r));
  }
  if (data.records.size() != expected) {
    throw FormatError(eof_line, "truncated file: header declares " + std::to_string(expected) + " records, found " +
                                    std::to_string(data.records.size()));
  }
  if (seen_train != n_train || seen_test != n_test) {
    throw FormatError(0, "split counts do not match the header (train " + std::to_string(seen_train) + "/" +
                             std::to_string(n_train) + ", test " + std::to_string(seen_test) + "/" +
                             std::to_string(n_test) + ")");
  }
  return data;
}

inline void save_dataset(const Dataset& data, const std::string& path, std::string_view comments = {}) {
  text::write_file(path, serialize_dataset(data, comments));
}

inline Dataset load_dataset(const std::string& path) { return deserialize_dataset(text::read_file(path)); }

}  // namespace asmkit
