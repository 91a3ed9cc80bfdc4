#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "flowtrack/detection.hpp"
#include "flowtrack/metrics.hpp"

namespace flowtrack {

// Six significant digits, as everywhere in the text outputs.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool skippable(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

inline std::vector<double> parse_fields(std::string_view line, const std::string& where) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::string_view field =
        trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size())
      throw DataError(where + ": cannot parse field '" + std::string(field) + "'");
    if (!std::isfinite(v)) throw DataError(where + ": non-finite value");
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline int to_frame(double v, const std::string& where) {
  if (v != std::floor(v) || v < 0 || v > 1e9) throw DataError(where + ": frame must be a non-negative integer");
  return static_cast<int>(v);
}

inline TrackId to_id(double v, const std::string& where) {
  if (v != std::floor(v) || std::abs(v) > 9e15) throw DataError(where + ": id must be an integer");
  return static_cast<TrackId>(v);
}

inline std::string location(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

inline Detection detection_from_fields(const std::vector<double>& f, const std::string& where) {
  if (f.size() < 7) throw DataError(where + ": expected frame,id,x,y,w,h,score[,features...]");
  Detection d;
  d.frame = to_frame(f[0], where);
  d.box = Box{f[2], f[3], f[4], f[5]};
  d.score = f[6];
  d.extra.assign(f.begin() + 7, f.end());
  try {
    validate(d);
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  }
  return d;
}

}  // namespace detail

// `frame,ignored_id,x,y,w,h,score[,f...]`, no header. Blank lines and lines
// starting with '#' are skipped. The result is stably sorted by frame and
// local indices count up per frame in file order.
inline std::vector<Detection> parse_detections(std::istream& in, const std::string& source = "<input>") {
  std::vector<Detection> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::skippable(line)) continue;
    const std::string where = detail::location(source, n);
    out.push_back(detail::detection_from_fields(detail::parse_fields(line, where), where));
  }
  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) { return a.frame < b.frame; });
  std::map<int, int> next;
  for (Detection& d : out) d.local_index = next[d.frame]++;
  return out;
}

// Detections of the dense frame range [first, last] of a sorted list.
struct FrameSequence {
  int first_frame = 0;
  std::vector<std::vector<Detection>> frames;
};

inline FrameSequence group_by_frame(const std::vector<Detection>& sorted) {
  FrameSequence s;
  if (sorted.empty()) return s;
  s.first_frame = sorted.front().frame;
  s.frames.resize(static_cast<std::size_t>(sorted.back().frame - s.first_frame + 1));
  for (const Detection& d : sorted) s.frames[static_cast<std::size_t>(d.frame - s.first_frame)].push_back(d);
  return s;
}

// One frame of a stream: detection lines up to a blank line or end of input.
// Returns nullopt at end of input. `line_number` tracks the position for
// error messages. All lines of a block must share one frame index.
inline std::optional<std::vector<Detection>> read_frame_block(std::istream& in, std::size_t& line_number,
                                                              const std::string& source = "<stdin>") {
  std::vector<Detection> block;
  std::string line;
  bool any = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (detail::trim(line).empty()) {
      if (any) break;
      continue;
    }
    if (detail::trim(line).front() == '#') continue;
    any = true;
    const std::string where = detail::location(source, line_number);
    Detection d = detail::detection_from_fields(detail::parse_fields(line, where), where);
    if (!block.empty() && d.frame != block.front().frame)
      throw DataError(where + ": frame " + std::to_string(d.frame) + " inside the block of frame " +
                      std::to_string(block.front().frame));
    d.local_index = static_cast<int>(block.size());
    block.push_back(std::move(d));
  }
  if (!any) return std::nullopt;
  return block;
}

// `frame,id,x,y,w,h[,ignored]`: ground truth or tracker output.
inline FrameBoxes parse_labeled_boxes(std::istream& in, const std::string& source = "<input>") {
  FrameBoxes out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::skippable(line)) continue;
    const std::string where = detail::location(source, n);
    const auto f = detail::parse_fields(line, where);
    if (f.size() < 6 || f.size() > 7) throw DataError(where + ": expected frame,id,x,y,w,h[,ignored]");
    LabeledBox b;
    b.id = detail::to_id(f[1], where);
    b.box = Box{f[2], f[3], f[4], f[5]};
    b.ignored = f.size() == 7 && f[6] != 0.0;
    if (!(b.box.w > 0.0) || !(b.box.h > 0.0)) throw DataError(where + ": box must have positive width and height");
    auto& list = out[detail::to_frame(f[0], where)];
    for (const LabeledBox& o : list)
      if (o.id == b.id) throw DataError(where + ": id " + std::to_string(b.id) + " repeated within the frame");
    list.push_back(b);
  }
  return out;
}

struct TrackRow {
  int frame = 0;
  TrackId track_id = 0;
  Box box;
};

inline void sort_rows(std::vector<TrackRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const TrackRow& a, const TrackRow& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.track_id < b.track_id;
  });
}

// `frame,track_id,x,y,w,h` in the given order.
inline void write_tracks(std::ostream& out, const std::vector<TrackRow>& rows) {
  for (const TrackRow& r : rows)
    out << r.frame << ',' << r.track_id << ',' << format_number(r.box.x) << ',' << format_number(r.box.y) << ','
        << format_number(r.box.w) << ',' << format_number(r.box.h) << '\n';
}

inline void write_labeled_boxes(std::ostream& out, const FrameBoxes& boxes) {
  for (const auto& [frame, list] : boxes) {
    std::vector<LabeledBox> sorted = list;
    std::sort(sorted.begin(), sorted.end(), [](const LabeledBox& a, const LabeledBox& b) { return a.id < b.id; });
    for (const LabeledBox& b : sorted) {
      out << frame << ',' << b.id << ',' << format_number(b.box.x) << ',' << format_number(b.box.y) << ','
          << format_number(b.box.w) << ',' << format_number(b.box.h);
      if (b.ignored) out << ",1";
      out << '\n';
    }
  }
}

inline void write_detections(std::ostream& out, const std::vector<Detection>& dets) {
  for (const Detection& d : dets) {
    out << d.frame << ",-1," << format_number(d.box.x) << ',' << format_number(d.box.y) << ','
        << format_number(d.box.w) << ',' << format_number(d.box.h) << ',' << format_number(d.score);
    for (double f : d.extra) out << ',' << format_number(f);
    out << '\n';
  }
}

inline FrameBoxes rows_to_boxes(const std::vector<TrackRow>& rows) {
  FrameBoxes out;
  for (const TrackRow& r : rows) out[r.frame].push_back(LabeledBox{r.track_id, r.box, false});
  return out;
}

}  // namespace flowtrack
