#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "flowtrack/residual_graph.hpp"
#include "flowtrack/ssp.hpp"
#include "flowtrack/tracking_graph.hpp"

namespace flowtrack {

enum class TrackerMode {
  // Globally optimal over every frame seen so far; the graph grows without bound.
  Optimal,
  // Sliding window of `window` frames; older assignments are frozen.
  Bounded,
};

struct TrackerConfig {
  TrackerMode mode = TrackerMode::Bounded;
  std::size_t window = 10;
  std::size_t cache_size = 10;
  EntryMerge entry_merge = EntryMerge::AccumulatedPrefix;
  bool use_cache = true;
  bool verify = false;

  void validate() const {
    if (window < 1) throw DataError("window must be at least 1 frame");
    if (cache_size < 1) throw DataError("cache size must be at least 1 frame");
  }
};

// Labels of one SSP iteration together with the flow they were computed on.
struct CachedIteration {
  PredecessorMap labels;
  std::vector<EdgeId> flow_edges;
};

struct CachedFrame {
  int frame = 0;
  int window_start = 0;
  // Node sequence (source excluded) of every accepted augmenting path.
  std::vector<std::vector<NodeId>> paths;
  // iterations[k] was computed after paths[0..k-1] were augmented.
  std::vector<CachedIteration> iterations;
};

// Per-iteration labels of the last `capacity` frames, most recent last.
class PredecessorCache {
 public:
  explicit PredecessorCache(std::size_t capacity = 1) : capacity_(std::max<std::size_t>(capacity, 1)) {}

  void push(CachedFrame f) {
    frames_.push_back(std::move(f));
    while (frames_.size() > capacity_) frames_.pop_front();
  }
  // Re-keys every stored map onto g after a clip.
  void align_to(const TrackingGraph& g) {
    for (CachedFrame& f : frames_)
      for (CachedIteration& it : f.iterations) it.labels.align_to(g);
  }
  void clear() { frames_.clear(); }

  std::size_t size() const { return frames_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<CachedFrame>& frames() const { return frames_; }
  const CachedFrame* latest() const { return frames_.empty() ? nullptr : &frames_.back(); }

 private:
  std::size_t capacity_;
  std::deque<CachedFrame> frames_;
};

// A detection whose assignment left the window and can no longer change.
struct FrozenPoint {
  int frame = 0;
  TrackId track_id = 0;
  DetectionId detection;
  Box box;
};

struct FrameReport {
  int frame = 0;
  SolverStats stats;
  double wall_seconds = 0.0;
  std::size_t live_nodes = 0;
  std::size_t live_edges = 0;
  std::size_t cache_entries = 0;
};

// Hands out ids that are never reused. An id becomes anchored once part of
// its trajectory is frozen; from then on only the remembered entry edge can
// continue it.
class TrackRegistry {
 public:
  TrackId fresh() { return next_++; }
  void anchor(TrackId id) { anchored_.insert(id); }
  bool anchored(TrackId id) const { return anchored_.contains(id); }
  TrackId issued() const { return next_; }

 private:
  TrackId next_ = 0;
  std::set<TrackId> anchored_;
};

// Gives every trajectory of `current` a stable id: the origin of a
// remembered entry edge, else the previous trajectory with the largest
// detection overlap (ties to the lower id, each id used once), else a new id.
inline void assign_track_ids(const TrackingGraph& g, const FlowSolution& previous, FlowSolution& current,
                             TrackRegistry& registry) {
  std::vector<std::optional<TrackId>> ids(current.trajectories.size());
  std::set<TrackId> taken;
  for (std::size_t i = 0; i < current.trajectories.size(); ++i) {
    const Trajectory& t = current.trajectories[i];
    const auto& origin = g.edge(g.record(t.detections.front()).entry).origin_track;
    if (origin && !taken.contains(*origin)) {
      ids[i] = *origin;
      taken.insert(*origin);
    }
  }

  std::map<DetectionId, TrackId> owner;
  for (const Trajectory& t : previous.trajectories)
    for (DetectionId d : t.detections) owner[d] = t.track_id;
  // (overlap, previous id, current index)
  std::vector<std::tuple<std::size_t, TrackId, std::size_t>> candidates;
  for (std::size_t i = 0; i < current.trajectories.size(); ++i) {
    if (ids[i]) continue;
    std::map<TrackId, std::size_t> overlap;
    for (DetectionId d : current.trajectories[i].detections) {
      auto it = owner.find(d);
      if (it != owner.end()) ++overlap[it->second];
    }
    for (const auto& [id, n] : overlap)
      if (!registry.anchored(id) && !taken.contains(id)) candidates.emplace_back(n, id, i);
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  for (const auto& [n, id, i] : candidates) {
    if (ids[i] || taken.contains(id)) continue;
    ids[i] = id;
    taken.insert(id);
  }
  for (std::size_t i = 0; i < current.trajectories.size(); ++i)
    current.trajectories[i].track_id = ids[i] ? *ids[i] : registry.fresh();
}

// Streaming tracker. Each frame re-solves the whole graph (optimal mode) or
// window (bounded mode) from zero flow, reusing shortest-path labels of
// earlier frames wherever the cached augmenting paths agree with the current
// ones. Results are exact for the graph at hand; the bounded window is
// approximate only through its frozen prefix.
template <CostProvider C>
class OnlineTracker {
 public:
  OnlineTracker(TrackerConfig config, C costs)
      : config_(config), costs_(std::move(costs)), cache_(config.cache_size) {
    config_.validate();
  }

  const FlowSolution& process_frame(int frame, std::span<const Detection> detections) {
    if (last_frame_ && frame <= *last_frame_)
      throw DataError("frame " + std::to_string(frame) + " arrived after frame " + std::to_string(*last_frame_));
    if (last_frame_ && frame != *last_frame_ + 1)
      throw DataError("frame " + std::to_string(frame) + " skips frames after " + std::to_string(*last_frame_) +
                      "; feed empty frames for gaps");
    const auto start = detail::Clock::now();

    if (config_.mode == TrackerMode::Bounded && graph_.frame_count() >= config_.window) clip();
    graph_.append_frame(frame, detections, costs_);
    last_frame_ = frame;

    FrameReport report;
    report.frame = frame;
    FlowSolution next = solve(report.stats);
    assign_track_ids(graph_, solution_, next, registry_);
    solution_ = std::move(next);

    report.wall_seconds = detail::seconds_since(start);
    report.live_nodes = graph_.node_count();
    report.live_edges = graph_.edge_count();
    report.cache_entries = cache_.size();
    peak_nodes_ = std::max(peak_nodes_, report.live_nodes);
    totals_ += report.stats;
    last_report_ = report;
    return solution_;
  }

  const FlowSolution& solution() const { return solution_; }
  const TrackingGraph& graph() const { return graph_; }
  const PredecessorCache& cache() const { return cache_; }
  const FrameReport& last_report() const { return last_report_; }
  const SolverStats& totals() const { return totals_; }
  std::size_t peak_nodes() const { return peak_nodes_; }
  const TrackerConfig& config() const { return config_; }
  const std::vector<FrozenPoint>& frozen() const { return frozen_; }

  // Current points of one frame, frozen or live, sorted by id.
  std::vector<FrozenPoint> points_in_frame(int frame) const {
    std::vector<FrozenPoint> out;
    // frozen_ is appended in frame order.
    auto lo = std::lower_bound(frozen_.begin(), frozen_.end(), frame,
                               [](const FrozenPoint& p, int f) { return p.frame < f; });
    for (; lo != frozen_.end() && lo->frame == frame; ++lo) out.push_back(*lo);
    if (!graph_.empty() && frame >= graph_.t_min() && frame <= graph_.t_max())
      for (const Trajectory& t : solution_.trajectories)
        for (DetectionId d : t.detections) {
          const Detection& det = graph_.detection(d);
          if (det.frame == frame) out.push_back(FrozenPoint{det.frame, t.track_id, d, det.box});
        }
    std::sort(out.begin(), out.end(),
              [](const FrozenPoint& a, const FrozenPoint& b) { return a.track_id < b.track_id; });
    return out;
  }

  // Frozen points followed by the live solution, sorted by (frame, id).
  std::vector<FrozenPoint> output_points() const {
    std::vector<FrozenPoint> out = frozen_;
    for (const Trajectory& t : solution_.trajectories)
      for (DetectionId d : t.detections) {
        const Detection& det = graph_.detection(d);
        out.push_back(FrozenPoint{det.frame, t.track_id, d, det.box});
      }
    std::sort(out.begin(), out.end(), [](const FrozenPoint& a, const FrozenPoint& b) {
      return std::tie(a.frame, a.track_id) < std::tie(b.frame, b.track_id);
    });
    return out;
  }

 private:
  void clip() {
    const int oldest = graph_.t_min();
    for (const Trajectory& t : solution_.trajectories) {
      const DetectionId head = t.detections.front();
      if (graph_.detection(head).frame != oldest) continue;
      frozen_.push_back(FrozenPoint{oldest, t.track_id, head, graph_.detection(head).box});
      registry_.anchor(t.track_id);
    }
    if (graph_.frame_count() >= 2)
      clip_oldest_frame(graph_, solution_, config_.entry_merge);
    else
      graph_.remove_oldest_frame();
    // The clipped solution keeps only detections that are still alive.
    for (Trajectory& t : solution_.trajectories)
      std::erase_if(t.detections, [&](DetectionId d) { return !graph_.contains(d); });
    std::erase_if(solution_.trajectories, [](const Trajectory& t) { return t.detections.empty(); });
    std::erase_if(solution_.flow_edges, [&](EdgeId e) { return !graph_.contains(e); });
    cache_.align_to(graph_);
  }

  static bool same_restricted(const TrackingGraph& g, const std::vector<NodeId>& a,
                                   const std::vector<NodeId>& b, int last_frame) {
    auto keep = [&](NodeId n) {
      return !n.is_terminal() && g.contains(n) && g.detection(n.detection()).frame <= last_frame;
    };
    std::size_t i = 0, j = 0;
    while (true) {
      while (i < a.size() && !keep(a[i])) ++i;
      while (j < b.size() && !keep(b[j])) ++j;
      if (i == a.size() || j == b.size()) return i == a.size() && j == b.size();
      if (a[i] != b[j]) return false;
      ++i;
      ++j;
    }
  }

  // Most recent cached frame whose first k paths, cut to that frame, agree
  // with the current ones.
  const CachedFrame* lookup(std::size_t k, const std::vector<std::vector<NodeId>>& paths) const {
    const auto& frames = cache_.frames();
    for (auto it = frames.rbegin(); it != frames.rend(); ++it) {
      if (it->iterations.size() <= k || it->paths.size() < k) continue;
      bool match = true;
      for (std::size_t i = 0; i < k && match; ++i)
        match = same_restricted(graph_, paths[i], it->paths[i], it->frame);
      if (match) return &*it;
    }
    return nullptr;
  }

  // Every node whose in-arcs or their costs may differ between the cached
  // residual graph and the current one, plus nodes without a usable label.
  std::vector<NodeId> repair_seeds(const ResidualGraph& r, const CachedFrame& cached, const CachedIteration& it,
                                   const PredecessorMap& labels) const {
    const TrackingGraph& g = graph_;
    std::vector<std::uint8_t> marked(g.node_count(), 0);
    std::vector<NodeId> seeds;
    auto add = [&](NodeId n) {
      if (n == NodeId::source() || !g.contains(n)) return;
      std::uint8_t& m = marked[g.slot(n)];
      if (!m) {
        m = 1;
        seeds.push_back(n);
      }
    };
    add(NodeId::sink());
    const std::vector<EdgeId> now = r.flow_edges();
    std::vector<EdgeId> changed;
    std::set_symmetric_difference(now.begin(), now.end(), it.flow_edges.begin(), it.flow_edges.end(),
                                  std::back_inserter(changed));
    for (EdgeId e : changed) {
      if (!g.contains(e)) continue;
      add(g.edge(e).from);
      add(g.edge(e).to);
    }
    if (cached.window_start != g.t_min()) {
      const FrameLayer& first = g.layer(g.t_min());
      for (std::size_t j = 0; j < first.count; ++j) add(NodeId::u(DetectionId{first.first.value + j}));
    }
    for (std::size_t s = 1; s < g.node_count(); ++s) {
      const NodeId n = g.node_at(s);
      if (!labels.reachable(n) || !labels.pred(n)) add(n);
    }
    return seeds;
  }

  FlowSolution solve(SolverStats& stats) {
    ResidualGraph r(graph_);
    CachedFrame entry;
    entry.frame = graph_.t_max();
    entry.window_start = graph_.t_min();

    PredecessorMap labels;
    const CachedFrame* prev = config_.use_cache ? cache_.latest() : nullptr;
    std::optional<Path> path;
    if (prev && prev->frame + 1 == graph_.t_max() && prev->window_start == graph_.t_min() &&
        !prev->iterations.empty()) {
      labels = prev->iterations.front().labels;
      path = dag_shortest_path(r, labels, graph_.t_max(), stats);
    } else {
      path = dag_shortest_path(r, labels, graph_.t_min(), stats);
    }
    entry.iterations.push_back(CachedIteration{labels, {}});

    while (path && path->cost < 0.0) {
      auto t0 = detail::Clock::now();
      convert_edge_costs(r, labels, config_.verify);
      stats.convert_seconds += detail::seconds_since(t0);
      build_residual(r, *path, config_.verify);
      ++stats.iterations;
      entry.paths.push_back(path_nodes(r, *path));
      const std::size_t k = entry.paths.size();

      const CachedFrame* hit = config_.use_cache ? lookup(k, entry.paths) : nullptr;
      if (hit) {
        ++stats.cache_hits;
        const CachedIteration& it = hit->iterations[k];
        labels = it.labels;
        labels.align_to(graph_);
        const std::vector<NodeId> seeds = repair_seeds(r, *hit, it, labels);
        path = dynamic_broadcast(r, seeds, labels, stats);
      } else {
        ++stats.cache_misses;
        path = dijkstra_full(r, labels, stats);
      }
      entry.iterations.push_back(CachedIteration{labels, r.flow_edges()});
    }

    const auto t0 = detail::Clock::now();
    FlowSolution s = solution_from_residual(r);
    stats.decode_seconds += detail::seconds_since(t0);
    if (config_.use_cache) cache_.push(std::move(entry));
    return s;
  }

  TrackerConfig config_;
  C costs_;
  TrackingGraph graph_;
  PredecessorCache cache_;
  FlowSolution solution_;
  TrackRegistry registry_;
  std::vector<FrozenPoint> frozen_;
  std::optional<int> last_frame_;
  FrameReport last_report_;
  SolverStats totals_;
  std::size_t peak_nodes_ = 0;
};

}  // namespace flowtrack
