#pragma once

#include <map>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "flowtrack/cost_model.hpp"
#include "flowtrack/detection.hpp"
#include "flowtrack/tracking_graph.hpp"

namespace flowtrack::test {

// Explicit per-detection and per-pair costs keyed by (frame, local index).
// Unlisted links are absent from the graph.
struct CostTable {
  using Key = std::pair<int, int>;
  double default_entry = 2.0;
  double default_exit = 2.0;
  double default_detection = -5.0;
  std::map<Key, double> entry_costs;
  std::map<Key, double> exit_costs;
  std::map<Key, double> detection_costs;
  std::map<std::pair<Key, Key>, double> link_costs;

  static Key key(const Detection& d) { return {d.frame, d.local_index}; }

  double entry(const Detection& d) const { return lookup(entry_costs, key(d), default_entry); }
  double exit(const Detection& d) const { return lookup(exit_costs, key(d), default_exit); }
  double detection(const Detection& d) const { return lookup(detection_costs, key(d), default_detection); }
  std::optional<double> link(const Detection& a, const Detection& b) const {
    auto it = link_costs.find({key(a), key(b)});
    if (it == link_costs.end()) return std::nullopt;
    return it->second;
  }

 private:
  static double lookup(const std::map<Key, double>& m, Key k, double fallback) {
    auto it = m.find(k);
    return it == m.end() ? fallback : it->second;
  }
};
static_assert(CostProvider<CostTable>);

inline Detection make_detection(int frame, int local, double x = 0.0, double score = 1.0) {
  Detection d;
  d.frame = frame;
  d.local_index = local;
  d.box = Box{x, 0.0, 10.0, 10.0};
  d.score = score;
  return d;
}

struct Instance {
  std::vector<Detection> detections;
  CostTable costs;
  // Frames in [first_frame, first_frame + frames).
  int first_frame = 0;
  int frames = 0;

  std::vector<Detection> frame(int t) const {
    std::vector<Detection> out;
    for (const Detection& d : detections)
      if (d.frame == t) out.push_back(d);
    return out;
  }
  TrackingGraph graph() const { return build_batch_graph(std::span<const Detection>(detections), costs); }
  // Batch graph over frames [first_frame, last].
  TrackingGraph prefix_graph(int last) const {
    TrackingGraph g;
    for (int t = first_frame; t <= last; ++t) {
      const auto f = frame(t);
      g.append_frame(t, std::span<const Detection>(f), costs);
    }
    return g;
  }
};

// Two frames, two detections each; matched links cost 0, crossed links 1.
inline Instance canonical_2x2() {
  Instance in;
  in.frames = 2;
  for (int t = 0; t < 2; ++t)
    for (int j = 0; j < 2; ++j) in.detections.push_back(make_detection(t, j, 100.0 * j));
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) in.costs.link_costs[{{0, a}, {1, b}}] = (a == b) ? 0.0 : 1.0;
  return in;
}

struct RandomSpec {
  int min_frames = 2;
  int max_frames = 4;
  int min_per_frame = 1;
  int max_per_frame = 3;
  double link_probability = 0.8;
};

// Mixed-sign costs: every edge family draws from a range straddling zero.
inline Instance random_instance(std::mt19937_64& rng, const RandomSpec& spec = {}) {
  Instance in;
  std::uniform_int_distribution<int> nframes(spec.min_frames, spec.max_frames);
  std::uniform_int_distribution<int> nper(spec.min_per_frame, spec.max_per_frame);
  std::uniform_real_distribution<double> unary(-1.0, 3.0);
  std::uniform_real_distribution<double> det(-6.0, 1.0);
  std::uniform_real_distribution<double> link(-2.0, 3.0);
  std::bernoulli_distribution admit(spec.link_probability);
  in.frames = nframes(rng);
  std::vector<int> counts(static_cast<std::size_t>(in.frames));
  for (int t = 0; t < in.frames; ++t) {
    counts[static_cast<std::size_t>(t)] = nper(rng);
    for (int j = 0; j < counts[static_cast<std::size_t>(t)]; ++j) {
      Detection d = make_detection(t, j, 20.0 * j);
      in.detections.push_back(d);
      in.costs.entry_costs[{t, j}] = unary(rng);
      in.costs.exit_costs[{t, j}] = unary(rng);
      in.costs.detection_costs[{t, j}] = det(rng);
    }
  }
  for (int t = 0; t + 1 < in.frames; ++t)
    for (int a = 0; a < counts[static_cast<std::size_t>(t)]; ++a)
      for (int b = 0; b < counts[static_cast<std::size_t>(t) + 1]; ++b)
        if (admit(rng)) in.costs.link_costs[{{t, a}, {t + 1, b}}] = link(rng);
  return in;
}

}  // namespace flowtrack::test
