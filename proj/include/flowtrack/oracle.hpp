#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "flowtrack/tracking_graph.hpp"

namespace flowtrack {

inline constexpr std::size_t kBruteForceMaxDetections = 12;

namespace detail {

class BruteForce {
 public:
  BruteForce(const TrackingGraph& g, std::uint64_t seed) : g_(g), used_(g.detection_count(), 0) {
    order_.resize(g.detection_count());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order_.begin(), order_.end(), rng);
  }

  FlowSolution run() {
    search(0);
    std::sort(best_.begin(), best_.end());
    return make_solution(g_, best_);
  }

 private:
  DetectionId id(std::size_t i) const { return DetectionId{g_.first_detection().value + i}; }
  std::size_t index(DetectionId d) const { return d.value - g_.first_detection().value; }

  // The first undecided detection (in shuffled order) is either left out or
  // covered by exactly one path chosen right now. Every set of disjoint
  // paths is therefore reached exactly once.
  void search(std::size_t pos) {
    while (pos < order_.size() && used_[order_[pos]]) ++pos;
    if (pos == order_.size()) {
      const double c = chosen_cost();
      if (c < best_cost_) {
        best_cost_ = c;
        best_ = chosen_;
      }
      return;
    }
    const std::size_t i = order_[pos];
    used_[i] = 2;  // decided: unused
    search(pos + 1);
    used_[i] = 0;

    std::vector<std::vector<DetectionId>> prefixes;
    std::vector<DetectionId> cur{id(i)};
    used_[i] = 1;
    collect_backward(cur, prefixes);
    for (auto& pre : prefixes) {
      std::reverse(pre.begin(), pre.end());
      for (DetectionId d : pre) used_[index(d)] = 1;
      std::vector<std::vector<DetectionId>> paths;
      std::vector<DetectionId> fwd = pre;
      collect_forward(fwd, paths);
      for (const auto& p : paths) {
        for (DetectionId d : p) used_[index(d)] = 1;
        chosen_.push_back(p);
        search(pos + 1);
        chosen_.pop_back();
        for (std::size_t k = pre.size(); k < p.size(); ++k) used_[index(p[k])] = 0;
      }
      for (std::size_t k = 0; k + 1 < pre.size(); ++k) used_[index(pre[k])] = 0;
    }
    used_[i] = 0;
  }

  // Chains ending (in time) at cur.front(), stored latest first.
  void collect_backward(std::vector<DetectionId>& cur, std::vector<std::vector<DetectionId>>& out) {
    out.push_back(cur);
    for (EdgeId e : g_.record(cur.back()).in_links) {
      const DetectionId p = g_.edge(e).from.detection();
      if (used_[index(p)]) continue;
      used_[index(p)] = 1;
      cur.push_back(p);
      collect_backward(cur, out);
      cur.pop_back();
      used_[index(p)] = 0;
    }
  }

  void collect_forward(std::vector<DetectionId>& cur, std::vector<std::vector<DetectionId>>& out) {
    out.push_back(cur);
    for (EdgeId e : g_.record(cur.back()).out_links) {
      const DetectionId n = g_.edge(e).to.detection();
      if (used_[index(n)]) continue;
      used_[index(n)] = 1;
      cur.push_back(n);
      collect_forward(cur, out);
      cur.pop_back();
      used_[index(n)] = 0;
    }
  }

  double chosen_cost() const {
    double c = 0.0;
    for (const auto& p : chosen_) c += path_cost(g_, p);
    return c;
  }

  const TrackingGraph& g_;
  std::vector<std::size_t> order_;
  // 0 free, 1 on a chosen path, 2 decided unused.
  std::vector<std::uint8_t> used_;
  std::vector<std::vector<DetectionId>> chosen_;
  std::vector<std::vector<DetectionId>> best_;
  double best_cost_ = 0.0;
};

}  // namespace detail

// Exhaustive minimum over all sets of node-disjoint source-sink paths. The
// empty set (cost 0) is always a candidate. `seed` only permutes the
// enumeration order; the optimum cost must not depend on it.
inline FlowSolution brute_force_optimum(const TrackingGraph& g, std::uint64_t seed = 0) {
  if (g.detection_count() > kBruteForceMaxDetections)
    throw DataError("brute force is limited to " + std::to_string(kBruteForceMaxDetections) + " detections");
  return detail::BruteForce(g, seed).run();
}

}  // namespace flowtrack
