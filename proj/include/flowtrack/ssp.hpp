#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "flowtrack/residual_graph.hpp"
#include "flowtrack/tracking_graph.hpp"

namespace flowtrack {

struct SolverOptions {
  // Check reduced-cost soundness after every conversion and zero reduced
  // cost along augmenting paths. O(m) per iteration; meant for tests.
  bool verify = false;
};

struct ShortestPathResult {
  std::optional<Path> path;
  PredecessorMap labels;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Min-heap on (reduced distance, node id); decrease-key by lazy reinsertion.
using NodeQueue = std::priority_queue<std::pair<double, std::uint64_t>,
                                      std::vector<std::pair<double, std::uint64_t>>, std::greater<>>;

inline double queue_key(const ResidualGraph& r, const PredecessorMap& labels, NodeId n) {
  const double key = labels.dist(n) - r.potential(n);
  if (key < -kReducedCostTolerance)
    throw InvariantError("negative reduced distance; node potentials are stale");
  return std::max(key, 0.0);
}

// A labelled node at reduced distance 0 cannot improve while reduced costs
// are non-negative, so arcs into it need no relaxation.
inline bool is_final(const ResidualGraph& r, const PredecessorMap& labels, NodeId n) {
  return labels.reachable(n) && labels.dist(n) - r.potential(n) <= 0.0;
}

struct KeepAll {
  bool operator()(DetectionId) const { return true; }
};

}  // namespace detail

// Walks predecessors back from the sink. nullopt when the sink is unlabeled.
inline std::optional<Path> extract_path(const ResidualGraph& r, const PredecessorMap& labels) {
  if (!labels.reachable(NodeId::sink())) return std::nullopt;
  Path p;
  NodeId n = NodeId::sink();
  std::size_t guard = r.graph().node_count() + 1;
  while (n != NodeId::source()) {
    const auto a = labels.pred(n);
    if (!a || !r.has_arc(*a) || r.head(*a) != n)
      throw InvariantError("predecessor chain does not reach the source");
    p.arcs.push_back(*a);
    n = r.tail(*a);
    if (--guard == 0) throw InvariantError("predecessor chain contains a cycle");
  }
  std::reverse(p.arcs.begin(), p.arcs.end());
  p.cost = labels.dist(NodeId::sink());
  return p;
}

// Topological dynamic programming over frames >= from_frame. Labels of
// nodes in earlier frames (and of the sink, when from_frame > t_min) are
// taken as already valid, so appending a frame only costs the edges that
// touch it. Negative costs are fine; the processed region must carry no flow.
template <class Keep = detail::KeepAll>
std::optional<Path> dag_shortest_path(const ResidualGraph& r, PredecessorMap& labels, int from_frame,
                                      SolverStats& stats, Keep&& keep = {}) {
  const TrackingGraph& g = r.graph();
  const auto start = detail::Clock::now();
  const bool full = g.empty() || from_frame <= g.t_min() || labels.size() == 0;
  if (full) {
    labels = PredecessorMap(g);
  } else {
    labels.align_to(g);
  }
  if (g.empty()) return std::nullopt;
  const int first = std::max(from_frame, g.t_min());
  if (!full) {
    for (int t = first; t <= g.t_max(); ++t) {
      const FrameLayer& layer = g.layer(t);
      for (std::size_t j = 0; j < layer.count; ++j) {
        const DetectionId d{layer.first.value + j};
        labels.reset(NodeId::u(d));
        labels.reset(NodeId::v(d));
      }
    }
  }

  auto relax_into = [&](NodeId n) {
    r.for_each_in_arc(n, [&](Arc a) {
      if (a.reversed) throw InvariantError("DAG shortest path over a region that carries flow");
      const NodeId tail = r.tail(a);
      ++stats.arc_scans;
      if (!tail.is_terminal() && !keep(tail.detection())) return;
      if (!labels.reachable(tail)) return;
      ++stats.relaxations;
      const double nd = labels.dist(tail) + r.cost(a);
      if (nd < labels.dist(n)) labels.set(n, nd, a);
    });
  };

  for (int t = first; t <= g.t_max(); ++t) {
    const FrameLayer& layer = g.layer(t);
    for (std::size_t j = 0; j < layer.count; ++j) {
      const DetectionId d{layer.first.value + j};
      if (!keep(d)) continue;
      relax_into(NodeId::u(d));
      relax_into(NodeId::v(d));
    }
    for (std::size_t j = 0; j < layer.count; ++j) {
      const DetectionId d{layer.first.value + j};
      if (!keep(d)) continue;
      const Arc exit{g.record(d).exit, false};
      if (r.flow(exit.edge)) throw InvariantError("DAG shortest path over a region that carries flow");
      ++stats.arc_scans;
      const NodeId v = NodeId::v(d);
      if (!labels.reachable(v)) continue;
      ++stats.relaxations;
      const double nd = labels.dist(v) + r.cost(exit);
      if (nd < labels.dist(NodeId::sink())) labels.set(NodeId::sink(), nd, exit);
    }
  }
  stats.dag_seconds += detail::seconds_since(start);
  return extract_path(r, labels);
}

inline ShortestPathResult dag_shortest_path(const ResidualGraph& r, int from_frame) {
  ShortestPathResult out;
  SolverStats stats;
  out.path = dag_shortest_path(r, out.labels, from_frame, stats);
  return out;
}

// Smallest reduced cost over every arc of the residual graph.
inline double min_reduced_cost(const ResidualGraph& r) {
  const TrackingGraph& g = r.graph();
  double m = kInfinity;
  for (EdgeId e = g.first_edge(); e < g.end_edge(); ++e.value)
    m = std::min(m, r.reduced_cost(Arc{e, r.flow(e)}));
  return m;
}

// Sets potentials to the labels: C'(u, v) = C(u, v) + d(u) - d(v). Nodes the
// labels cannot reach are raised by the largest finite reduced distance,
// which keeps every arc out of them non-negative.
inline void convert_edge_costs(ResidualGraph& r, const PredecessorMap& labels, bool verify = true) {
  const TrackingGraph& g = r.graph();
  double shift = 0.0;
  for (std::size_t s = 0; s < g.node_count(); ++s) {
    const NodeId n = g.node_at(s);
    if (labels.reachable(n)) shift = std::max(shift, labels.dist(n) - r.potential(n));
  }
  for (std::size_t s = 0; s < g.node_count(); ++s) {
    const NodeId n = g.node_at(s);
    if (labels.reachable(n))
      r.set_potential(n, labels.dist(n));
    else
      r.set_potential(n, r.potential(n) + shift);
  }
  if (verify && min_reduced_cost(r) < -kReducedCostTolerance)
    throw InvariantError("reduced cost below tolerance after conversion; labels were stale");
}

// Augments one unit of flow along a source-to-sink path of residual arcs.
inline void build_residual(ResidualGraph& r, const Path& path, bool verify = false) {
  if (path.arcs.empty()) throw std::invalid_argument("empty augmenting path");
  if (r.tail(path.arcs.front()) != NodeId::source() || r.head(path.arcs.back()) != NodeId::sink())
    throw std::invalid_argument("augmenting path does not run from source to sink");
  for (std::size_t i = 0; i < path.arcs.size(); ++i) {
    const Arc a = path.arcs[i];
    if (!r.has_arc(a)) throw std::invalid_argument("augmenting path uses an arc that is not residual");
    if (i + 1 < path.arcs.size() && r.head(a) != r.tail(path.arcs[i + 1]))
      throw std::invalid_argument("augmenting path is not connected");
    if (verify && std::abs(r.reduced_cost(a)) > kReducedCostTolerance)
      throw InvariantError("augmenting path arc has non-zero reduced cost");
  }
  for (const Arc& a : path.arcs) r.flip(a.edge);
  r.advance_iteration();
}

// Plain Dijkstra over reduced costs from the source; labels every reachable node.
inline std::optional<Path> dijkstra_full(const ResidualGraph& r, PredecessorMap& labels, SolverStats& stats) {
  const TrackingGraph& g = r.graph();
  const auto start = detail::Clock::now();
  labels = PredecessorMap(g);
  std::vector<std::uint8_t> settled(g.node_count(), 0);
  detail::NodeQueue queue;
  queue.emplace(0.0, NodeId::source().value);
  ++stats.queue_pushes;
  while (!queue.empty()) {
    const NodeId v{queue.top().second};
    queue.pop();
    std::uint8_t& done = settled[g.slot(v)];
    if (done) continue;
    done = 1;
    r.for_each_out_arc(v, [&](Arc a) {
      ++stats.arc_scans;
      const NodeId w = r.head(a);
      if (w == NodeId::source() || settled[g.slot(w)] || detail::is_final(r, labels, w)) return;
      ++stats.relaxations;
      const double nd = labels.dist(v) + r.cost(a);
      if (nd < labels.dist(w)) {
        labels.set(w, nd, a);
        queue.emplace(detail::queue_key(r, labels, w), w.value);
        ++stats.queue_pushes;
      }
    });
  }
  stats.search_seconds += detail::seconds_since(start);
  return extract_path(r, labels);
}

inline ShortestPathResult dijkstra_full(const ResidualGraph& r) {
  ShortestPathResult out;
  SolverStats stats;
  out.path = dijkstra_full(r, out.labels, stats);
  return out;
}

// Repairs `labels` after a local change of the residual graph. `seeds` must
// hold every node whose predecessor may have become invalid or improvable
// (the heads of all added, removed, or re-priced arcs; after an augmentation
// that is the previous shortest path). Seeds and every node whose
// predecessor chain runs through a seed are relabeled from their valid
// in-neighbours, then the queue is broadcast Dijkstra-style until empty. All
// other labels are reused untouched.
inline std::optional<Path> dynamic_broadcast(const ResidualGraph& r, std::span<const NodeId> seeds,
                                             PredecessorMap& labels, SolverStats& stats) {
  const TrackingGraph& g = r.graph();
  const auto start = detail::Clock::now();
  labels.align_to(g);
  constexpr std::uint8_t kInvalid = 1;
  constexpr std::uint8_t kSettled = 2;
  std::vector<std::uint8_t> state(g.node_count(), 0);

  std::vector<NodeId> stack;
  for (NodeId s : seeds) {
    if (s == NodeId::source() || !g.contains(s)) continue;
    if (state[g.slot(s)] == 0) {
      state[g.slot(s)] = kInvalid;
      stack.push_back(s);
    }
  }
  // Forward sweep: everything hanging below a seed in the predecessor tree.
  std::vector<NodeId> invalid;
  while (!stack.empty()) {
    const NodeId x = stack.back();
    stack.pop_back();
    invalid.push_back(x);
    r.for_each_out_arc(x, [&](Arc a) {
      ++stats.arc_scans;
      const NodeId w = r.head(a);
      if (w == NodeId::source() || state[g.slot(w)] != 0) return;
      const auto p = labels.pred(w);
      if (p && *p == a) {
        state[g.slot(w)] = kInvalid;
        stack.push_back(w);
      }
    });
  }
  for (NodeId x : invalid) labels.reset(x);

  detail::NodeQueue queue;
  for (NodeId x : invalid) {
    r.for_each_in_arc(x, [&](Arc a) {
      ++stats.arc_scans;
      const NodeId u = r.tail(a);
      if (state[g.slot(u)] == kInvalid || !labels.reachable(u)) return;
      ++stats.relaxations;
      const double nd = labels.dist(u) + r.cost(a);
      if (nd < labels.dist(x)) labels.set(x, nd, a);
    });
    if (labels.reachable(x)) {
      queue.emplace(detail::queue_key(r, labels, x), x.value);
      ++stats.queue_pushes;
    }
  }

  while (!queue.empty()) {
    const NodeId v{queue.top().second};
    queue.pop();
    std::uint8_t& st = state[g.slot(v)];
    if (st == kSettled) continue;
    st = kSettled;
    r.for_each_out_arc(v, [&](Arc a) {
      ++stats.arc_scans;
      const NodeId w = r.head(a);
      if (w == NodeId::source() || state[g.slot(w)] == kSettled || detail::is_final(r, labels, w)) return;
      ++stats.relaxations;
      const double nd = labels.dist(v) + r.cost(a);
      if (nd < labels.dist(w)) {
        labels.set(w, nd, a);
        queue.emplace(detail::queue_key(r, labels, w), w.value);
        ++stats.queue_pushes;
      }
    });
  }
  stats.search_seconds += detail::seconds_since(start);
  return extract_path(r, labels);
}

// Nodes of a path except the source, in path order.
inline std::vector<NodeId> path_nodes(const ResidualGraph& r, const Path& p) {
  std::vector<NodeId> nodes;
  nodes.reserve(p.arcs.size());
  for (const Arc& a : p.arcs) nodes.push_back(r.head(a));
  return nodes;
}

// Trajectories are the chains of reversed edges hanging off the sink.
inline std::vector<Trajectory> decode_trajectories(const ResidualGraph& r) {
  const TrackingGraph& g = r.graph();
  std::vector<Trajectory> out;
  for (EdgeId exit : r.used_exits()) {
    std::vector<DetectionId> chain;
    DetectionId d = g.edge(exit).from.detection();
    std::size_t guard = g.detection_count() + 1;
    while (true) {
      const DetectionRecord& rec = g.record(d);
      if (!r.flow(rec.detection_edge)) throw InvariantError("flow chain skips a detection edge");
      chain.push_back(d);
      if (r.flow(rec.entry)) break;
      std::optional<EdgeId> in;
      for (EdgeId e : rec.in_links)
        if (r.flow(e)) {
          if (in) throw InvariantError("two incoming flow units at one detection");
          in = e;
        }
      if (!in) throw InvariantError("dangling flow chain does not reach the source");
      d = g.edge(*in).from.detection();
      if (--guard == 0) throw InvariantError("cyclic flow chain");
    }
    std::reverse(chain.begin(), chain.end());
    Trajectory t;
    t.detections = std::move(chain);
    t.cost = path_cost(g, t.detections);
    out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end(),
            [](const Trajectory& a, const Trajectory& b) { return a.detections.front() < b.detections.front(); });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].track_id = static_cast<TrackId>(i);
  return out;
}

inline FlowSolution solution_from_residual(const ResidualGraph& r) {
  FlowSolution s;
  s.trajectories = decode_trajectories(r);
  for (const Trajectory& t : s.trajectories) s.total_cost += t.cost;
  s.flow_edges = r.flow_edges();
  return s;
}

enum class InnerSolver { Dijkstra, Dynamic };

namespace detail {

inline FlowSolution successive_shortest_paths(const TrackingGraph& g, InnerSolver inner, SolverStats& stats,
                                              const SolverOptions& options) {
  ResidualGraph r(g);
  PredecessorMap labels;
  std::optional<Path> path;
  if (!g.empty()) path = dag_shortest_path(r, labels, g.t_min(), stats);

  if (path && path->cost < 0.0) {
    const double first_cost = path->cost;
    double reduced_sum = 0.0;
    while (true) {
      auto t0 = Clock::now();
      convert_edge_costs(r, labels, options.verify);
      stats.convert_seconds += seconds_since(t0);
      build_residual(r, *path, options.verify);
      ++stats.iterations;

      const double sink_potential = r.potential(NodeId::sink());
      if (inner == InnerSolver::Dijkstra) {
        path = dijkstra_full(r, labels, stats);
      } else {
        const std::vector<NodeId> seeds = path_nodes(r, *path);
        path = dynamic_broadcast(r, seeds, labels, stats);
      }

      const bool stop = !path || path->cost >= 0.0;
      if (path) reduced_sum += path->cost - sink_potential;
      const bool stop_converted = !path || reduced_sum > std::abs(first_cost);
      if (stop != stop_converted && path && std::abs(path->cost) > kReducedCostTolerance)
        stats.stopping_rules_agree = false;
      if (stop) break;
    }
  }
  const auto t0 = Clock::now();
  FlowSolution s = solution_from_residual(r);
  stats.decode_seconds += seconds_since(t0);
  return s;
}

}  // namespace detail

// Successive shortest paths with a full Dijkstra per iteration. Globally optimal.
inline FlowSolution solve_ssp(const TrackingGraph& g, SolverStats& stats, const SolverOptions& options = {}) {
  return detail::successive_shortest_paths(g, InnerSolver::Dijkstra, stats, options);
}

// Same optimum as solve_ssp; each iteration repairs the previous labels
// instead of recomputing them.
inline FlowSolution solve_dssp(const TrackingGraph& g, SolverStats& stats, const SolverOptions& options = {}) {
  return detail::successive_shortest_paths(g, InnerSolver::Dynamic, stats, options);
}

inline FlowSolution solve_ssp(const TrackingGraph& g) {
  SolverStats stats;
  return solve_ssp(g, stats);
}
inline FlowSolution solve_dssp(const TrackingGraph& g) {
  SolverStats stats;
  return solve_dssp(g, stats);
}

// Greedy baseline: repeatedly take the cheapest path on the original graph
// and delete its detections. No flow cancellation, so not optimal.
inline FlowSolution solve_dp_greedy(const TrackingGraph& g, SolverStats& stats) {
  std::vector<std::vector<DetectionId>> chains;
  if (!g.empty()) {
    ResidualGraph r(g);
    std::vector<std::uint8_t> removed(g.detection_count(), 0);
    auto keep = [&](DetectionId d) { return removed[d.value - g.first_detection().value] == 0; };
    while (true) {
      PredecessorMap labels;
      const std::optional<Path> path = dag_shortest_path(r, labels, g.t_min(), stats, keep);
      if (!path || path->cost >= 0.0) break;
      std::vector<DetectionId> chain;
      for (const Arc& a : path->arcs) {
        const NodeId h = r.head(a);
        if (h.kind() == NodeKind::U) chain.push_back(h.detection());
      }
      for (DetectionId d : chain) removed[d.value - g.first_detection().value] = 1;
      chains.push_back(std::move(chain));
      ++stats.iterations;
    }
  }
  const auto t0 = detail::Clock::now();
  FlowSolution s = make_solution(g, chains);
  stats.decode_seconds += detail::seconds_since(t0);
  return s;
}

inline FlowSolution solve_dp_greedy(const TrackingGraph& g) {
  SolverStats stats;
  return solve_dp_greedy(g, stats);
}

}  // namespace flowtrack
