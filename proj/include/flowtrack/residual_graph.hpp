#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowtrack/tracking_graph.hpp"

namespace flowtrack {

// Reduced costs in [-kReducedCostTolerance, 0) are floating-point drift and
// are treated as zero; anything below is an invariant breach.
inline constexpr double kReducedCostTolerance = 1e-9;

// A residual arc: edge traversed forward (no flow) or backward (flow 1).
struct Arc {
  EdgeId edge;
  bool reversed = false;

  bool valid() const { return edge.valid(); }
  friend bool operator==(const Arc&, const Arc&) = default;
};

struct Path {
  std::vector<Arc> arcs;
  // Original (unreduced) cost of the path.
  double cost = 0.0;
};

struct SolverStats {
  // Distance evaluations d(u) + c(u, v) < d(v).
  std::uint64_t relaxations = 0;
  // Every residual arc looked at, including tree walks and skipped targets.
  std::uint64_t arc_scans = 0;
  std::uint64_t queue_pushes = 0;
  std::uint64_t iterations = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  double dag_seconds = 0.0;
  double search_seconds = 0.0;
  double convert_seconds = 0.0;
  double decode_seconds = 0.0;
  // Whether the accumulated-reduced-cost stopping inequality fired on the
  // same iteration as the negative-path rule.
  bool stopping_rules_agree = true;

  SolverStats& operator+=(const SolverStats& o) {
    relaxations += o.relaxations;
    arc_scans += o.arc_scans;
    queue_pushes += o.queue_pushes;
    iterations += o.iterations;
    cache_hits += o.cache_hits;
    cache_misses += o.cache_misses;
    dag_seconds += o.dag_seconds;
    search_seconds += o.search_seconds;
    convert_seconds += o.convert_seconds;
    decode_seconds += o.decode_seconds;
    stopping_rules_agree = stopping_rules_agree && o.stopping_rules_agree;
    return *this;
  }
  double total_seconds() const { return dag_seconds + search_seconds + convert_seconds + decode_seconds; }
};

// Shortest-path labels: distance from the source in ORIGINAL costs of the
// residual graph, plus the arc each node was reached by. Keyed by NodeId so a
// map survives graph growth and clipping (see align_to()).
class PredecessorMap {
 public:
  PredecessorMap() = default;
  explicit PredecessorMap(const TrackingGraph& g)
      : first_det_(g.first_detection().value), dist_(g.node_count(), kInfinity), pred_(g.node_count()) {
    dist_[0] = 0.0;
  }

  bool contains(NodeId n) const {
    if (n.is_terminal()) return !dist_.empty();
    const std::uint64_t d = n.detection().value;
    return d >= first_det_ && slot(n) < dist_.size();
  }
  double dist(NodeId n) const { return contains(n) ? dist_[slot(n)] : kInfinity; }
  bool reachable(NodeId n) const { return dist(n) < kInfinity; }
  std::optional<Arc> pred(NodeId n) const {
    if (!contains(n)) return std::nullopt;
    const Arc& a = pred_[slot(n)];
    return a.valid() ? std::optional<Arc>(a) : std::nullopt;
  }
  void set(NodeId n, double d, std::optional<Arc> p) {
    dist_[slot(n)] = d;
    pred_[slot(n)] = p.value_or(Arc{});
  }
  void reset(NodeId n) { set(n, n == NodeId::source() ? 0.0 : kInfinity, std::nullopt); }

  // Re-keys the map onto g: entries of clipped nodes are dropped, nodes that
  // are new in g start unlabeled.
  void align_to(const TrackingGraph& g) {
    const std::uint64_t new_first = g.first_detection().value;
    if (dist_.empty()) {
      *this = PredecessorMap(g);
      return;
    }
    if (new_first > first_det_) {
      const std::size_t drop = std::min<std::size_t>(2 * (new_first - first_det_), dist_.size() - 2);
      dist_.erase(dist_.begin() + 2, dist_.begin() + 2 + static_cast<std::ptrdiff_t>(drop));
      pred_.erase(pred_.begin() + 2, pred_.begin() + 2 + static_cast<std::ptrdiff_t>(drop));
      first_det_ = new_first;
    }
    dist_.resize(g.node_count(), kInfinity);
    pred_.resize(g.node_count());
    for (std::size_t i = 0; i < pred_.size(); ++i)
      if (pred_[i].valid() && !g.contains(pred_[i].edge)) pred_[i] = Arc{};
  }

  std::size_t size() const { return dist_.size(); }

 private:
  std::size_t slot(NodeId n) const {
    if (n.is_terminal()) return n.value;
    return 2 + (n.value - 2 - 2 * first_det_);
  }

  std::uint64_t first_det_ = 0;
  std::vector<double> dist_;
  std::vector<Arc> pred_;
};

// The tracking graph plus unit-flow state and node potentials. An edge with
// flow is traversed backwards in the residual graph. Reduced costs are
// C'(u, v) = C(u, v) + p(u) - p(v), where p is the last converted label.
class ResidualGraph {
 public:
  explicit ResidualGraph(const TrackingGraph& g)
      : graph_(&g), flow_(g.edge_count(), 0), potential_(g.node_count(), 0.0) {}

  const TrackingGraph& graph() const { return *graph_; }
  std::uint64_t iteration() const { return iteration_; }

  bool flow(EdgeId e) const { return flow_[graph_->slot(e)] != 0; }

  NodeId tail(Arc a) const {
    const Edge& e = graph_->edge(a.edge);
    return a.reversed ? e.to : e.from;
  }
  NodeId head(Arc a) const {
    const Edge& e = graph_->edge(a.edge);
    return a.reversed ? e.from : e.to;
  }
  double cost(Arc a) const {
    const double c = graph_->edge(a.edge).cost;
    return a.reversed ? -c : c;
  }
  double potential(NodeId n) const { return potential_[graph_->slot(n)]; }
  void set_potential(NodeId n, double p) { potential_[graph_->slot(n)] = p; }
  double reduced_cost(Arc a) const { return cost(a) + potential(tail(a)) - potential(head(a)); }

  // Arc exists in the current residual graph.
  bool has_arc(Arc a) const { return graph_->contains(a.edge) && flow(a.edge) == a.reversed; }

  // Reverses an edge: flow 0 -> 1 or, for flow cancellation, 1 -> 0.
  void flip(EdgeId e) {
    std::uint8_t& f = flow_[graph_->slot(e)];
    f = f ? 0 : 1;
    const Edge& ed = graph_->edge(e);
    if (ed.kind == EdgeKind::Entry) toggle(used_entries_, e, f != 0);
    if (ed.kind == EdgeKind::Exit) toggle(used_exits_, e, f != 0);
  }
  void advance_iteration() { ++iteration_; }

  bool has_any_flow() const { return !used_exits_.empty() || !used_entries_.empty(); }

  std::vector<EdgeId> flow_edges() const {
    std::vector<EdgeId> out;
    for (std::size_t i = 0; i < flow_.size(); ++i)
      if (flow_[i]) out.push_back(EdgeId{graph_->first_edge().value + i});
    return out;
  }
  const std::set<EdgeId>& used_exits() const { return used_exits_; }

  template <class F>
  void for_each_out_arc(NodeId n, F&& f) const {
    const TrackingGraph& g = *graph_;
    switch (n.kind()) {
      case NodeKind::Source:
        for (DetectionId d = g.first_detection(); d < g.end_detection(); ++d.value)
          if (!flow(g.record(d).entry)) f(Arc{g.record(d).entry, false});
        break;
      case NodeKind::Sink:
        for (EdgeId e : used_exits_) f(Arc{e, true});
        break;
      case NodeKind::U: {
        const DetectionRecord& r = g.record(n.detection());
        if (!flow(r.detection_edge)) f(Arc{r.detection_edge, false});
        if (flow(r.entry)) f(Arc{r.entry, true});
        for (EdgeId e : r.in_links)
          if (flow(e)) f(Arc{e, true});
        break;
      }
      case NodeKind::V: {
        const DetectionRecord& r = g.record(n.detection());
        if (!flow(r.exit)) f(Arc{r.exit, false});
        for (EdgeId e : r.out_links)
          if (!flow(e)) f(Arc{e, false});
        if (flow(r.detection_edge)) f(Arc{r.detection_edge, true});
        break;
      }
    }
  }

  template <class F>
  void for_each_in_arc(NodeId n, F&& f) const {
    const TrackingGraph& g = *graph_;
    switch (n.kind()) {
      case NodeKind::Source:
        for (EdgeId e : used_entries_) f(Arc{e, true});
        break;
      case NodeKind::Sink:
        for (DetectionId d = g.first_detection(); d < g.end_detection(); ++d.value)
          if (!flow(g.record(d).exit)) f(Arc{g.record(d).exit, false});
        break;
      case NodeKind::U: {
        const DetectionRecord& r = g.record(n.detection());
        if (!flow(r.entry)) f(Arc{r.entry, false});
        for (EdgeId e : r.in_links)
          if (!flow(e)) f(Arc{e, false});
        if (flow(r.detection_edge)) f(Arc{r.detection_edge, true});
        break;
      }
      case NodeKind::V: {
        const DetectionRecord& r = g.record(n.detection());
        if (!flow(r.detection_edge)) f(Arc{r.detection_edge, false});
        if (flow(r.exit)) f(Arc{r.exit, true});
        for (EdgeId e : r.out_links)
          if (flow(e)) f(Arc{e, true});
        break;
      }
    }
  }

 private:
  static void toggle(std::set<EdgeId>& s, EdgeId e, bool on) {
    if (on)
      s.insert(e);
    else
      s.erase(e);
  }

  const TrackingGraph* graph_;
  std::vector<std::uint8_t> flow_;
  std::vector<double> potential_;
  std::set<EdgeId> used_entries_;
  std::set<EdgeId> used_exits_;
  std::uint64_t iteration_ = 0;
};

}  // namespace flowtrack
