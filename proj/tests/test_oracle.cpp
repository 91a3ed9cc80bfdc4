#include <catch_amalgamated.hpp>

#include <random>
#include <set>

#include "flowtrack/oracle.hpp"
#include "support.hpp"

using namespace flowtrack;
using Catch::Matchers::WithinAbs;

namespace {

std::set<std::pair<int, int>> linked_pairs(const TrackingGraph& g, const FlowSolution& s) {
  std::set<std::pair<int, int>> out;
  for (const Trajectory& t : s.trajectories)
    for (std::size_t i = 1; i < t.detections.size(); ++i)
      out.emplace(g.detection(t.detections[i - 1]).local_index, g.detection(t.detections[i]).local_index);
  return out;
}

}  // namespace

TEST_CASE("oracle picks the matched pairs of the 2x2 graph", "[oracle]") {
  const auto in = test::canonical_2x2();
  const TrackingGraph g = in.graph();
  for (std::uint64_t seed : {0u, 1u, 7u}) {
    const FlowSolution s = brute_force_optimum(g, seed);
    CHECK_THAT(s.total_cost, WithinAbs(-12.0, 1e-12));
    CHECK(linked_pairs(g, s) == std::set<std::pair<int, int>>{{0, 0}, {1, 1}});
  }
}

TEST_CASE("oracle leaves a positive-cost detection unused", "[oracle]") {
  test::CostTable t;
  t.default_detection = 1.0;
  const std::vector<Detection> one{test::make_detection(0, 0)};
  const FlowSolution s = brute_force_optimum(build_batch_graph(std::span<const Detection>(one), t));
  CHECK(s.trajectories.empty());
  CHECK(s.total_cost == 0.0);
}

TEST_CASE("oracle crosses when crossed links are cheaper", "[oracle]") {
  auto in = test::canonical_2x2();
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) in.costs.link_costs[{{0, a}, {1, b}}] = (a == b) ? 2.0 : -1.0;
  const TrackingGraph g = in.graph();
  const FlowSolution s = brute_force_optimum(g);
  CHECK(linked_pairs(g, s) == std::set<std::pair<int, int>>{{0, 1}, {1, 0}});
  CHECK_THAT(s.total_cost, WithinAbs(2 * (2 - 5 - 1 - 5 + 2), 1e-12));
}

TEST_CASE("oracle rejects graphs above the enumeration bound", "[oracle]") {
  test::CostTable t;
  std::vector<Detection> dets;
  for (int i = 0; i < static_cast<int>(kBruteForceMaxDetections) + 1; ++i) dets.push_back(test::make_detection(0, i));
  const TrackingGraph g = build_batch_graph(std::span<const Detection>(dets), t);
  CHECK_THROWS_AS(brute_force_optimum(g), DataError);
}

TEST_CASE("oracle solutions are disjoint, conserve flow and agree across orders", "[oracle][property]") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 200; ++i) {
    const auto in = test::random_instance(rng, {.min_frames = 1, .max_frames = 4, .max_per_frame = 3});
    const TrackingGraph g = in.graph();
    const FlowSolution a = brute_force_optimum(g, 3);
    const FlowSolution b = brute_force_optimum(g, 4);
    CHECK_THAT(a.total_cost, WithinAbs(b.total_cost, 1e-12));
    CHECK(satisfies_flow_conservation(g, a));
    std::set<DetectionId> seen;
    double sum = 0.0;
    for (const Trajectory& t : a.trajectories) {
      for (DetectionId d : t.detections) CHECK(seen.insert(d).second);
      sum += path_cost(g, std::span<const DetectionId>(t.detections));
    }
    CHECK_THAT(sum, WithinAbs(a.total_cost, 1e-9));
    // No trajectory with non-negative cost is worth keeping.
    for (const Trajectory& t : a.trajectories) CHECK(path_cost(g, std::span<const DetectionId>(t.detections)) < 1e-9);
  }
}
