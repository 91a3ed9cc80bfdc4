#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowtrack {

// Raised for malformed or out-of-contract input data (bad boxes, frame gaps, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an internal algorithmic invariant is breached (stale labels,
// negative reduced costs, dangling flow). Indicates a bug, not bad input.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double diagonal() const { return std::hypot(w, h); }
  double center_x() const { return x + 0.5 * w; }
  double center_y() const { return y + 0.5 * h; }

  friend bool operator==(const Box&, const Box&) = default;
};

inline double intersection_over_union(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

struct Detection {
  int frame = 0;
  Box box;
  double score = 0.0;
  int local_index = 0;
  // Optional per-detection inputs for extra pairwise features (file columns 8+).
  std::vector<double> extra;
};

inline void validate(const Detection& d) {
  if (d.frame < 0) throw DataError("detection has negative frame index");
  if (!(d.box.w > 0.0) || !(d.box.h > 0.0))
    throw DataError("detection box must have positive width and height");
  if (!std::isfinite(d.box.x) || !std::isfinite(d.box.y) || !std::isfinite(d.box.w) ||
      !std::isfinite(d.box.h) || !std::isfinite(d.score))
    throw DataError("detection has non-finite values");
  for (double f : d.extra)
    if (!std::isfinite(f)) throw DataError("detection has non-finite feature values");
}

using TrackId = std::int64_t;

// Running index of a detection inside one TrackingGraph. Never reused.
struct DetectionId {
  std::uint64_t value = 0;
  friend auto operator<=>(const DetectionId&, const DetectionId&) = default;
};

struct EdgeId {
  std::uint64_t value = std::numeric_limits<std::uint64_t>::max();
  bool valid() const { return value != std::numeric_limits<std::uint64_t>::max(); }
  friend auto operator<=>(const EdgeId&, const EdgeId&) = default;
};

enum class NodeKind : std::uint8_t { Source, Sink, U, V };

// 0 is the source, 1 the sink; detection k owns U = 2 + 2k and V = 3 + 2k.
struct NodeId {
  std::uint64_t value = 0;

  static constexpr NodeId source() { return NodeId{0}; }
  static constexpr NodeId sink() { return NodeId{1}; }
  static constexpr NodeId u(DetectionId d) { return NodeId{2 + 2 * d.value}; }
  static constexpr NodeId v(DetectionId d) { return NodeId{3 + 2 * d.value}; }

  constexpr NodeKind kind() const {
    if (value == 0) return NodeKind::Source;
    if (value == 1) return NodeKind::Sink;
    return (value % 2 == 0) ? NodeKind::U : NodeKind::V;
  }
  constexpr bool is_terminal() const { return value < 2; }
  constexpr DetectionId detection() const { return DetectionId{(value - 2) / 2}; }

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

}  // namespace flowtrack

template <>
struct std::hash<flowtrack::DetectionId> {
  std::size_t operator()(const flowtrack::DetectionId& d) const noexcept {
    return std::hash<std::uint64_t>{}(d.value);
  }
};
