#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "flowtrack/cost_model.hpp"
#include "flowtrack/detection.hpp"

namespace flowtrack {

enum class EdgeKind : std::uint8_t { Entry, Detection, Link, Exit };

struct Edge {
  NodeId from;
  NodeId to;
  EdgeKind kind = EdgeKind::Entry;
  double cost = 0.0;
  // Set only on entry edges that carry a clipped trajectory prefix.
  std::optional<TrackId> origin_track;
};

struct DetectionRecord {
  Detection detection;
  EdgeId entry;
  EdgeId detection_edge;
  EdgeId exit;
  double plain_entry_cost = 0.0;
  std::vector<EdgeId> in_links;
  std::vector<EdgeId> out_links;
};

struct FrameLayer {
  int frame = 0;
  DetectionId first;
  std::size_t count = 0;
  // First edge created for this frame that is not a link into it.
  EdgeId own_edges_begin;
};

// Layered min-cost flow network: source, sink, and a (u, v) node pair per
// detection. Detection and edge ids grow monotonically; frames are appended
// at the back and clipped at the front, so live ids always form a contiguous
// range and the storage is a pair of deques.
class TrackingGraph {
 public:
  bool empty() const { return layers_.empty(); }
  std::size_t frame_count() const { return layers_.size(); }
  int t_min() const {
    require_frames();
    return layers_.front().frame;
  }
  int t_max() const {
    require_frames();
    return layers_.back().frame;
  }

  std::size_t detection_count() const { return records_.size(); }
  std::size_t node_count() const { return 2 + 2 * records_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  DetectionId first_detection() const { return DetectionId{det_base_}; }
  DetectionId end_detection() const { return DetectionId{det_base_ + records_.size()}; }
  EdgeId first_edge() const { return EdgeId{edge_base_}; }
  EdgeId end_edge() const { return EdgeId{edge_base_ + edges_.size()}; }

  bool contains(DetectionId d) const {
    return d.value >= det_base_ && d.value < det_base_ + records_.size();
  }
  bool contains(NodeId n) const { return n.is_terminal() || contains(n.detection()); }
  bool contains(EdgeId e) const {
    return e.valid() && e.value >= edge_base_ && e.value < edge_base_ + edges_.size();
  }

  const DetectionRecord& record(DetectionId d) const { return records_[d.value - det_base_]; }
  const Detection& detection(DetectionId d) const { return record(d).detection; }
  const Edge& edge(EdgeId e) const { return edges_[e.value - edge_base_]; }

  const std::deque<FrameLayer>& layers() const { return layers_; }
  const FrameLayer& layer(int frame) const {
    if (empty() || frame < t_min() || frame > t_max())
      throw DataError("frame " + std::to_string(frame) + " is not in the graph");
    return layers_[static_cast<std::size_t>(frame - t_min())];
  }

  std::size_t max_detections_per_frame() const {
    std::size_t m = 0;
    for (const auto& l : layers_) m = std::max(m, l.count);
    return m;
  }

  // Dense index in [0, node_count()).
  std::size_t slot(NodeId n) const {
    if (n.is_terminal()) return n.value;
    return 2 + (n.value - 2 - 2 * det_base_);
  }
  NodeId node_at(std::size_t slot) const {
    if (slot < 2) return NodeId{slot};
    return NodeId{slot - 2 + 2 + 2 * det_base_};
  }
  std::size_t slot(EdgeId e) const { return e.value - edge_base_; }

  // Appends frame t_max + 1 (any frame >= 0 when empty). An empty detection
  // list is a legal empty layer.
  template <CostProvider C>
  void append_frame(int frame, std::span<const Detection> detections, const C& costs);

  void set_entry(DetectionId d, double cost, std::optional<TrackId> origin) {
    if (!std::isfinite(cost)) throw DataError("entry cost must be finite");
    Edge& e = edges_[records_[d.value - det_base_].entry.value - edge_base_];
    e.cost = cost;
    e.origin_track = origin;
  }

  // Drops the oldest layer with all incident edges. No cost bookkeeping; see
  // clip_oldest_frame() for the trajectory-preserving variant. Removing the
  // only layer leaves an empty graph whose ids keep counting upwards.
  void remove_oldest_frame();

 private:
  void require_frames() const {
    if (layers_.empty()) throw DataError("graph has no frames");
  }
  EdgeId add_edge(NodeId from, NodeId to, EdgeKind kind, double cost) {
    if (!std::isfinite(cost)) throw DataError("edge cost is not finite");
    edges_.push_back(Edge{from, to, kind, cost, std::nullopt});
    return EdgeId{edge_base_ + edges_.size() - 1};
  }

  std::deque<DetectionRecord> records_;
  std::deque<Edge> edges_;
  std::deque<FrameLayer> layers_;
  std::uint64_t det_base_ = 0;
  std::uint64_t edge_base_ = 0;
};

template <CostProvider C>
void TrackingGraph::append_frame(int frame, std::span<const Detection> detections,
                                 const C& costs) {
  if (!empty() && frame != t_max() + 1)
    throw DataError("frame " + std::to_string(frame) + " appended after frame " +
                    std::to_string(t_max()) + "; frames must be consecutive");
  if (frame < 0) throw DataError("negative frame index");
  for (std::size_t i = 0; i < detections.size(); ++i) {
    validate(detections[i]);
    if (detections[i].frame != frame)
      throw DataError("detection frame " + std::to_string(detections[i].frame) +
                      " does not match appended frame " + std::to_string(frame));
    for (std::size_t j = 0; j < i; ++j)
      if (detections[j].local_index == detections[i].local_index)
        throw DataError("duplicate local index in frame " + std::to_string(frame));
  }

  const DetectionId first = end_detection();
  const std::size_t prev_count = empty() ? 0 : layers_.back().count;
  const DetectionId prev_first = empty() ? first : layers_.back().first;

  for (const Detection& d : detections) {
    DetectionRecord r;
    r.detection = d;
    records_.push_back(std::move(r));
  }

  // Links into the new layer come first so that clipping removes a prefix.
  for (std::size_t p = 0; p < prev_count; ++p) {
    const DetectionId from{prev_first.value + p};
    for (std::size_t j = 0; j < detections.size(); ++j) {
      const DetectionId to{first.value + j};
      const std::optional<double> c = costs.link(detection(from), detections[j]);
      if (!c) continue;
      if (!std::isfinite(*c)) continue;
      const EdgeId e = add_edge(NodeId::v(from), NodeId::u(to), EdgeKind::Link, *c);
      records_[from.value - det_base_].out_links.push_back(e);
      records_[to.value - det_base_].in_links.push_back(e);
    }
  }

  const EdgeId own_begin = end_edge();
  for (std::size_t j = 0; j < detections.size(); ++j) {
    const DetectionId id{first.value + j};
    const Detection& d = detections[j];
    const double en = costs.entry(d);
    const double det = costs.detection(d);
    const double ex = costs.exit(d);
    if (!std::isfinite(en) || !std::isfinite(det) || !std::isfinite(ex))
      throw DataError("non-finite unary cost in frame " + std::to_string(frame));
    DetectionRecord& r = records_[id.value - det_base_];
    r.entry = add_edge(NodeId::source(), NodeId::u(id), EdgeKind::Entry, en);
    r.detection_edge = add_edge(NodeId::u(id), NodeId::v(id), EdgeKind::Detection, det);
    r.exit = add_edge(NodeId::v(id), NodeId::sink(), EdgeKind::Exit, ex);
    r.plain_entry_cost = en;
  }

  layers_.push_back(FrameLayer{frame, first, detections.size(), own_begin});
}

inline void TrackingGraph::remove_oldest_frame() {
  require_frames();
  const FrameLayer old = layers_.front();
  std::uint64_t edge_end = edge_base_ + edges_.size();
  if (layers_.size() > 1) {
    const FrameLayer& next = layers_[1];
    for (std::size_t j = 0; j < next.count; ++j)
      records_[next.first.value + j - det_base_].in_links.clear();
    edge_end = next.own_edges_begin.value;
  }

  while (edge_base_ < edge_end) {
    edges_.pop_front();
    ++edge_base_;
  }
  for (std::size_t j = 0; j < old.count; ++j) {
    records_.pop_front();
    ++det_base_;
  }
  layers_.pop_front();
}

// ---------------------------------------------------------------------------
// Solutions

struct Trajectory {
  TrackId track_id = 0;
  // Strictly consecutive frames, earliest first.
  std::vector<DetectionId> detections;
  double cost = 0.0;
};

struct FlowSolution {
  std::vector<Trajectory> trajectories;
  double total_cost = 0.0;
  // Edges carrying one unit of flow, sorted by id.
  std::vector<EdgeId> flow_edges;

  bool flow(EdgeId e) const { return std::binary_search(flow_edges.begin(), flow_edges.end(), e); }
};

inline std::optional<EdgeId> find_link(const TrackingGraph& g, DetectionId from, DetectionId to) {
  for (EdgeId e : g.record(from).out_links)
    if (g.edge(e).to == NodeId::u(to)) return e;
  return std::nullopt;
}

// Entry, detection, link, ..., exit edges of a detection chain.
inline std::vector<EdgeId> trajectory_edges(const TrackingGraph& g,
                                            std::span<const DetectionId> chain) {
  if (chain.empty()) throw DataError("empty trajectory");
  std::vector<EdgeId> edges;
  edges.reserve(3 * chain.size());
  edges.push_back(g.record(chain.front()).entry);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (!g.contains(chain[i])) throw DataError("trajectory references a detection outside the graph");
    edges.push_back(g.record(chain[i]).detection_edge);
    if (i + 1 < chain.size()) {
      const auto link = find_link(g, chain[i], chain[i + 1]);
      if (!link) throw DataError("trajectory uses a link that is not in the graph");
      edges.push_back(*link);
    }
  }
  edges.push_back(g.record(chain.back()).exit);
  return edges;
}

// Left fold from the source: ((en + det) + li) + det ... + ex.
inline double path_cost(const TrackingGraph& g, std::span<const DetectionId> chain) {
  double cost = 0.0;
  for (EdgeId e : trajectory_edges(g, chain)) cost += g.edge(e).cost;
  return cost;
}

inline FlowSolution make_solution(const TrackingGraph& g,
                                  const std::vector<std::vector<DetectionId>>& chains) {
  FlowSolution s;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    Trajectory t;
    t.track_id = static_cast<TrackId>(i);
    t.detections = chains[i];
    t.cost = path_cost(g, t.detections);
    s.total_cost += t.cost;
    for (EdgeId e : trajectory_edges(g, t.detections)) s.flow_edges.push_back(e);
    s.trajectories.push_back(std::move(t));
  }
  std::sort(s.flow_edges.begin(), s.flow_edges.end());
  return s;
}

// Unit flow on every edge and conservation at every u/v node:
// f_en + sum f_li(in) = f_det = f_ex + sum f_li(out). Also checks that the
// trajectories agree with the edge flows and are node-disjoint.
inline bool satisfies_flow_conservation(const TrackingGraph& g, const FlowSolution& s) {
  if (std::adjacent_find(s.flow_edges.begin(), s.flow_edges.end()) != s.flow_edges.end()) return false;
  for (EdgeId e : s.flow_edges)
    if (!g.contains(e)) return false;
  for (DetectionId d = g.first_detection(); d < g.end_detection(); ++d.value) {
    const DetectionRecord& r = g.record(d);
    int in = s.flow(r.entry) ? 1 : 0;
    for (EdgeId e : r.in_links) in += s.flow(e) ? 1 : 0;
    int out = s.flow(r.exit) ? 1 : 0;
    for (EdgeId e : r.out_links) out += s.flow(e) ? 1 : 0;
    const int det = s.flow(r.detection_edge) ? 1 : 0;
    if (in != det || out != det) return false;
  }
  std::vector<DetectionId> seen;
  std::size_t path_edges = 0;
  for (const Trajectory& t : s.trajectories) {
    if (t.detections.empty()) return false;
    for (std::size_t i = 0; i + 1 < t.detections.size(); ++i)
      if (g.detection(t.detections[i + 1]).frame != g.detection(t.detections[i]).frame + 1) return false;
    for (EdgeId e : trajectory_edges(g, t.detections)) {
      if (!s.flow(e)) return false;
      ++path_edges;
    }
    seen.insert(seen.end(), t.detections.begin(), t.detections.end());
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) return false;
  return path_edges == s.flow_edges.size();
}

// Topological check: every edge goes strictly forward in the layer order
// source < (frame t, u) < (frame t, v) < (frame t+1, u) < ... < sink.
inline bool is_layered_dag(const TrackingGraph& g) {
  if (g.empty()) return g.edge_count() == 0 && g.detection_count() == 0;
  auto rank = [&](NodeId n) -> long long {
    if (n == NodeId::source()) return -1;
    if (n == NodeId::sink()) return 2LL * (g.t_max() - g.t_min() + 1);
    const long long f = g.detection(n.detection()).frame - g.t_min();
    return 2 * f + (n.kind() == NodeKind::V ? 1 : 0);
  };
  std::size_t seen = 0;
  for (const auto& layer : g.layers()) {
    if (layer.frame != g.t_min() + static_cast<int>(seen)) return false;
    ++seen;
  }
  std::size_t counted = 0;
  for (const auto& layer : g.layers()) counted += layer.count;
  if (counted != g.detection_count()) return false;
  for (EdgeId e = g.first_edge(); e < g.end_edge(); ++e.value) {
    const Edge& ed = g.edge(e);
    if (!g.contains(ed.from) || !g.contains(ed.to)) return false;
    const long long rf = rank(ed.from);
    const long long rt = rank(ed.to);
    if (rt <= rf) return false;
    switch (ed.kind) {
      case EdgeKind::Entry:
        if (ed.from != NodeId::source() || ed.to.kind() != NodeKind::U) return false;
        break;
      case EdgeKind::Detection:
        if (ed.from.kind() != NodeKind::U || ed.to != NodeId::v(ed.from.detection())) return false;
        break;
      case EdgeKind::Link:
        if (ed.from.kind() != NodeKind::V || ed.to.kind() != NodeKind::U || rt != rf + 1) return false;
        break;
      case EdgeKind::Exit:
        if (ed.from.kind() != NodeKind::V || ed.to != NodeId::sink()) return false;
        break;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Construction and clipping

// Detections are grouped by frame; frames missing between the smallest and
// largest index become empty layers.
template <CostProvider C>
TrackingGraph build_batch_graph(std::span<const Detection> detections, const C& costs) {
  TrackingGraph g;
  if (detections.empty()) return g;
  std::map<int, std::vector<Detection>> by_frame;
  for (const Detection& d : detections) {
    validate(d);
    by_frame[d.frame].push_back(d);
  }
  const int first = by_frame.begin()->first;
  const int last = by_frame.rbegin()->first;
  const std::vector<Detection> none;
  for (int t = first; t <= last; ++t) {
    auto it = by_frame.find(t);
    g.append_frame(t, it == by_frame.end() ? std::span<const Detection>(none)
                                           : std::span<const Detection>(it->second),
                   costs);
  }
  return g;
}

template <CostProvider C>
void append_frame(TrackingGraph& g, int frame, std::span<const Detection> detections, const C& costs) {
  g.append_frame(frame, detections, costs);
}

enum class EntryMerge {
  // new entry(v) = entry(u) + det(u) + link(u, v); entry(u) may itself be a
  // remembered prefix, so the whole clipped prefix is carried forward.
  AccumulatedPrefix,
  // new entry(v) = plain entry(v) + det(u) + link(u, v).
  OneHop,
};

// Removes frame t_min. Trajectories of `solution` that run from t_min into
// t_min + 1 are remembered by folding their clipped prefix into the entry
// edge of their successor, tagged with the trajectory's track id. All other
// entry edges at the new first frame revert to their plain cost.
inline void clip_oldest_frame(TrackingGraph& g, const FlowSolution& solution,
                              EntryMerge merge = EntryMerge::AccumulatedPrefix) {
  if (g.frame_count() < 2) throw DataError("cannot clip the only frame of the graph");
  const int oldest = g.t_min();
  const FrameLayer next = g.layer(oldest + 1);
  for (std::size_t j = 0; j < next.count; ++j) {
    const DetectionId d{next.first.value + j};
    g.set_entry(d, g.record(d).plain_entry_cost, std::nullopt);
  }
  for (const Trajectory& t : solution.trajectories) {
    if (t.detections.size() < 2) continue;
    const DetectionId u = t.detections[0];
    const DetectionId v = t.detections[1];
    if (!g.contains(u) || g.detection(u).frame != oldest) continue;
    const auto link = find_link(g, u, v);
    if (!link) throw InvariantError("clipped trajectory uses a missing link");
    const DetectionRecord& ru = g.record(u);
    const double head = merge == EntryMerge::AccumulatedPrefix ? g.edge(ru.entry).cost
                                                               : g.record(v).plain_entry_cost;
    const double remembered = (head + g.edge(ru.detection_edge).cost) + g.edge(*link).cost;
    g.set_entry(v, remembered, t.track_id);
  }
  g.remove_oldest_frame();
}

}  // namespace flowtrack
