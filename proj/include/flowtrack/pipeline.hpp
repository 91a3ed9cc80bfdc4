#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "flowtrack/io.hpp"
#include "flowtrack/online_tracker.hpp"
#include "flowtrack/oracle.hpp"
#include "flowtrack/ssp.hpp"
#include "flowtrack/tracking_graph.hpp"

namespace flowtrack {

enum class SolverKind { Ssp, Dssp, Odssp, Mbodssp, Dp, Oracle };

inline const char* solver_name(SolverKind s) {
  switch (s) {
    case SolverKind::Ssp: return "ssp";
    case SolverKind::Dssp: return "dssp";
    case SolverKind::Odssp: return "odssp";
    case SolverKind::Mbodssp: return "mbodssp";
    case SolverKind::Dp: return "dp";
    case SolverKind::Oracle: return "oracle";
  }
  return "?";
}

inline SolverKind parse_solver(const std::string& name) {
  for (SolverKind s : {SolverKind::Ssp, SolverKind::Dssp, SolverKind::Odssp, SolverKind::Mbodssp, SolverKind::Dp,
                       SolverKind::Oracle})
    if (name == solver_name(s)) return s;
  throw DataError("unknown solver '" + name + "'");
}

inline bool is_online(SolverKind s) { return s == SolverKind::Odssp || s == SolverKind::Mbodssp; }

struct RunOptions {
  SolverKind solver = SolverKind::Mbodssp;
  std::size_t window = 10;
  // 0 selects the window length.
  std::size_t cache_size = 0;
  EntryMerge entry_merge = EntryMerge::AccumulatedPrefix;

  TrackerConfig tracker_config() const {
    TrackerConfig c;
    c.mode = solver == SolverKind::Mbodssp ? TrackerMode::Bounded : TrackerMode::Optimal;
    c.window = window;
    c.cache_size = cache_size ? cache_size : window;
    c.entry_merge = entry_merge;
    return c;
  }
};

struct RunResult {
  std::vector<TrackRow> rows;
  // Objective value of the emitted assignment on the full batch graph.
  double total_cost = 0.0;
  SolverStats stats;
  std::size_t peak_nodes = 0;
};

template <CostProvider C>
TrackingGraph build_sequence_graph(const FrameSequence& seq, const C& costs) {
  TrackingGraph g;
  for (std::size_t i = 0; i < seq.frames.size(); ++i)
    g.append_frame(seq.first_frame + static_cast<int>(i), std::span<const Detection>(seq.frames[i]), costs);
  return g;
}

// Cost of an assignment given as (track id, detection) points on `g`: each
// id's detections, in frame order, are cut wherever no link joins them and
// every piece is priced as one trajectory.
inline double assignment_cost(const TrackingGraph& g,
                              const std::vector<std::pair<TrackId, DetectionId>>& points) {
  std::map<TrackId, std::vector<DetectionId>> by_id;
  for (const auto& [id, d] : points) by_id[id].push_back(d);
  double total = 0.0;
  for (auto& [id, dets] : by_id) {
    std::sort(dets.begin(), dets.end());
    std::size_t start = 0;
    for (std::size_t i = 1; i <= dets.size(); ++i) {
      if (i < dets.size() && find_link(g, dets[i - 1], dets[i])) continue;
      total += path_cost(g, std::span<const DetectionId>(dets.data() + start, i - start));
      start = i;
    }
  }
  return total;
}

template <CostProvider C>
RunResult run_tracker(const FrameSequence& seq, const C& costs, const RunOptions& options) {
  RunResult out;
  const TrackingGraph full = build_sequence_graph(seq, costs);
  if (is_online(options.solver)) {
    OnlineTracker<C> tracker(options.tracker_config(), costs);
    for (std::size_t i = 0; i < seq.frames.size(); ++i)
      tracker.process_frame(seq.first_frame + static_cast<int>(i), std::span<const Detection>(seq.frames[i]));
    std::vector<std::pair<TrackId, DetectionId>> points;
    for (const FrozenPoint& p : tracker.output_points()) {
      out.rows.push_back(TrackRow{p.frame, p.track_id, p.box});
      points.emplace_back(p.track_id, p.detection);
    }
    out.total_cost = assignment_cost(full, points);
    out.stats = tracker.totals();
    out.peak_nodes = tracker.peak_nodes();
  } else {
    FlowSolution s;
    switch (options.solver) {
      case SolverKind::Ssp: s = solve_ssp(full, out.stats); break;
      case SolverKind::Dssp: s = solve_dssp(full, out.stats); break;
      case SolverKind::Dp: s = solve_dp_greedy(full, out.stats); break;
      default: s = brute_force_optimum(full); break;
    }
    for (const Trajectory& t : s.trajectories)
      for (DetectionId d : t.detections)
        out.rows.push_back(TrackRow{full.detection(d).frame, t.track_id, full.detection(d).box});
    out.total_cost = s.total_cost;
    out.peak_nodes = full.node_count();
  }
  sort_rows(out.rows);
  return out;
}

struct BenchRow {
  std::string solver;
  std::size_t tau = 0;
  int frame = 0;
  double wall_ms = 0.0;
  std::uint64_t relaxations = 0;
  std::uint64_t queue_pushes = 0;
  std::size_t live_nodes = 0;
  std::size_t live_edges = 0;
  std::size_t cache_entries = 0;
};

struct BenchConfig {
  std::vector<SolverKind> solvers{SolverKind::Mbodssp};
  std::vector<std::size_t> taus{10};
  // 0 selects tau (mbodssp) or 10 (odssp).
  std::size_t cache_size = 0;
  // Batch solvers re-solve the growing prefix every `stride` frames.
  int stride = 10;
};

// Online solvers report every frame; batch solvers report each solved
// prefix. The tau column is 0 for solvers without a window.
template <CostProvider C>
std::vector<BenchRow> run_bench(const FrameSequence& seq, const C& costs, const BenchConfig& config) {
  using Clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  const int stride = std::max(config.stride, 1);
  for (SolverKind solver : config.solvers) {
    const bool windowed = solver == SolverKind::Mbodssp;
    const std::vector<std::size_t> taus = windowed ? config.taus : std::vector<std::size_t>{0};
    for (std::size_t tau : taus) {
      if (is_online(solver)) {
        RunOptions o;
        o.solver = solver;
        o.window = windowed ? tau : 10;
        o.cache_size = config.cache_size;
        OnlineTracker<C> tracker(o.tracker_config(), costs);
        for (std::size_t i = 0; i < seq.frames.size(); ++i) {
          const int frame = seq.first_frame + static_cast<int>(i);
          tracker.process_frame(frame, std::span<const Detection>(seq.frames[i]));
          const FrameReport& r = tracker.last_report();
          rows.push_back(BenchRow{solver_name(solver), tau, frame, 1e3 * r.wall_seconds, r.stats.relaxations,
                                  r.stats.queue_pushes, r.live_nodes, r.live_edges, r.cache_entries});
        }
      } else {
        TrackingGraph g;
        for (std::size_t i = 0; i < seq.frames.size(); ++i) {
          const int frame = seq.first_frame + static_cast<int>(i);
          g.append_frame(frame, std::span<const Detection>(seq.frames[i]), costs);
          const bool last = i + 1 == seq.frames.size();
          if ((i + 1) % static_cast<std::size_t>(stride) != 0 && !last) continue;
          if (solver == SolverKind::Oracle && g.detection_count() > kBruteForceMaxDetections) continue;
          SolverStats st;
          const auto start = Clock::now();
          switch (solver) {
            case SolverKind::Ssp: solve_ssp(g, st); break;
            case SolverKind::Dssp: solve_dssp(g, st); break;
            case SolverKind::Dp: solve_dp_greedy(g, st); break;
            default: brute_force_optimum(g); break;
          }
          const double ms = 1e3 * std::chrono::duration<double>(Clock::now() - start).count();
          rows.push_back(BenchRow{solver_name(solver), 0, frame, ms, st.relaxations, st.queue_pushes, g.node_count(),
                                  g.edge_count(), 0});
        }
      }
    }
  }
  return rows;
}

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "solver,tau,frame,wall_ms,relaxations,queue_pushes,live_nodes,live_edges,cache_entries\n";
  for (const BenchRow& r : rows)
    out << r.solver << ',' << r.tau << ',' << r.frame << ',' << format_number(r.wall_ms) << ',' << r.relaxations
        << ',' << r.queue_pushes << ',' << r.live_nodes << ',' << r.live_edges << ',' << r.cache_entries << '\n';
}

}  // namespace flowtrack
