#include <catch_amalgamated.hpp>

#include <sstream>

#include "flowtrack/pipeline.hpp"
#include "flowtrack/synthetic.hpp"
#include "support.hpp"

using namespace flowtrack;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

TEST_CASE("a detection line parses into frame, box and score", "[io]") {
  std::istringstream in("0,-1,10,20,30,40,0.9\n");
  const auto d = parse_detections(in);
  REQUIRE(d.size() == 1);
  CHECK(d[0].frame == 0);
  CHECK(d[0].box.x == 10);
  CHECK(d[0].box.y == 20);
  CHECK(d[0].box.w == 30);
  CHECK(d[0].box.h == 40);
  CHECK(d[0].score == 0.9);
  CHECK(d[0].extra.empty());
}

TEST_CASE("an empty file is an empty sequence", "[io]") {
  std::istringstream in("");
  CHECK(parse_detections(in).empty());
  CHECK(group_by_frame({}).frames.empty());
}

TEST_CASE("zero width is reported with its line number", "[io]") {
  std::istringstream in("# header comment\n0,-1,10,20,30,40,0.9\n1,-1,10,20,0,40,0.9\n");
  try {
    parse_detections(in, "dets.csv");
    FAIL("no error");
  } catch (const DataError& e) {
    CHECK_THAT(e.what(), ContainsSubstring("dets.csv:3"));
  }
}

TEST_CASE("malformed and non-finite fields are rejected", "[io]") {
  for (const char* text : {"0,-1,10,20,30\n", "0,-1,a,20,30,40,1\n", "0,-1,10,20,30,40,nan\n", "0,-1,10,20,30,40,inf\n",
                           "-1,-1,10,20,30,40,1\n", "0.5,-1,10,20,30,40,1\n", "0,-1,10,,30,40,1\n"}) {
    std::istringstream in(text);
    CHECK_THROWS_AS(parse_detections(in), DataError);
  }
}

TEST_CASE("lines are sorted by frame and sparse frames become empty", "[io]") {
  std::istringstream in("3,-1,1,1,5,5,1\n0,-1,2,2,5,5,1,0.5,0.25\n3,-1,3,3,5,5,1\n");
  const auto d = parse_detections(in);
  REQUIRE(d.size() == 3);
  CHECK(d[0].frame == 0);
  CHECK(d[0].extra == std::vector<double>{0.5, 0.25});
  CHECK(d[1].frame == 3);
  CHECK(d[1].box.x == 1);
  CHECK(d[1].local_index == 0);
  CHECK(d[2].local_index == 1);
  const FrameSequence s = group_by_frame(d);
  CHECK(s.first_frame == 0);
  REQUIRE(s.frames.size() == 4);
  CHECK(s.frames[1].empty());
  CHECK(s.frames[2].empty());
  CHECK(s.frames[3].size() == 2);
}

TEST_CASE("frame blocks are split at blank lines", "[io]") {
  std::istringstream in("\n0,-1,1,1,5,5,1\n0,-1,2,2,5,5,1\n\n\n2,-1,1,1,5,5,1\n");
  std::size_t line = 0;
  const auto a = read_frame_block(in, line);
  REQUIRE(a);
  CHECK(a->size() == 2);
  const auto b = read_frame_block(in, line);
  REQUIRE(b);
  CHECK(b->front().frame == 2);
  CHECK_FALSE(read_frame_block(in, line));

  std::istringstream mixed("0,-1,1,1,5,5,1\n1,-1,2,2,5,5,1\n");
  line = 0;
  CHECK_THROWS_AS(read_frame_block(mixed, line), DataError);
}

TEST_CASE("track rows are written sorted with six significant digits", "[io]") {
  std::vector<TrackRow> rows{{1, 0, Box{1.0, 2.0, 3.0, 4.0}}, {0, 5, Box{0.1234567, 1e7, 2.5, 100}},
                             {0, 2, Box{0, 0, 1, 1}}};
  sort_rows(rows);
  std::ostringstream out;
  write_tracks(out, rows);
  CHECK(out.str() == "0,2,0,0,1,1\n0,5,0.123457,1e+07,2.5,100\n1,0,1,2,3,4\n");
  std::ostringstream empty;
  write_tracks(empty, {});
  CHECK(empty.str().empty());
}

TEST_CASE("canonical 2x2 tracks write four lines with two ids", "[io]") {
  std::vector<Detection> dets;
  for (int t = 0; t < 2; ++t)
    for (int j = 0; j < 2; ++j) {
      Detection d = test::make_detection(t, j, 100.0 * j + t, 5.0);
      dets.push_back(d);
    }
  CostModel m;
  m.entry_cost = m.exit_cost = 0.4;
  const RunResult r = run_tracker(group_by_frame(dets), m, RunOptions{.solver = SolverKind::Ssp});
  std::ostringstream out;
  write_tracks(out, r.rows);
  CHECK(out.str() == "0,0,0,0,10,10\n0,1,100,0,10,10\n1,0,1,0,10,10\n1,1,101,0,10,10\n");
}

TEST_CASE("labelled boxes round trip", "[io]") {
  std::istringstream in("0,3,1,2,3,4\n0,1,5,6,7,8,1\n2,3,1,2,3,4\n");
  const FrameBoxes b = parse_labeled_boxes(in);
  REQUIRE(b.at(0).size() == 2);
  CHECK(b.at(0)[1].ignored);
  std::ostringstream out;
  write_labeled_boxes(out, b);
  CHECK(out.str() == "0,1,5,6,7,8,1\n0,3,1,2,3,4\n2,3,1,2,3,4\n");
  std::istringstream dup("0,3,1,2,3,4\n0,3,1,2,3,4\n");
  CHECK_THROWS_AS(parse_labeled_boxes(dup), DataError);
}

TEST_CASE("written detections parse back unchanged at output precision", "[io]") {
  SyntheticConfig c;
  c.frames = 20;
  const auto s = generate_synthetic(c, 4);
  std::ostringstream out;
  write_detections(out, s.detections);
  std::istringstream in(out.str());
  const auto back = parse_detections(in);
  REQUIRE(back.size() == s.detections.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].frame == s.detections[i].frame);
    CHECK(back[i].local_index == s.detections[i].local_index);
    CHECK_THAT(back[i].box.x, WithinAbs(s.detections[i].box.x, 1e-3 * std::max(1.0, std::abs(s.detections[i].box.x))));
  }
}

TEST_CASE("tracker output scored against itself is perfect", "[io]") {
  SyntheticConfig c;
  c.frames = 40;
  const auto s = generate_synthetic(c, 6);
  for (SolverKind k : {SolverKind::Ssp, SolverKind::Mbodssp}) {
    const RunResult r = run_tracker(group_by_frame(s.detections), CostModel{}, RunOptions{.solver = k});
    std::ostringstream out;
    write_tracks(out, r.rows);
    std::istringstream in(out.str());
    const FrameBoxes boxes = parse_labeled_boxes(in);
    const MotReport m = clear_mot(boxes, boxes);
    CHECK_THAT(m.mota, WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("batch runs price their assignment on the full graph", "[io]") {
  SyntheticConfig c;
  c.frames = 30;
  const auto s = generate_synthetic(c, 12);
  const FrameSequence seq = group_by_frame(s.detections);
  const RunResult ssp = run_tracker(seq, CostModel{}, RunOptions{.solver = SolverKind::Ssp});
  const RunResult od = run_tracker(seq, CostModel{}, RunOptions{.solver = SolverKind::Odssp});
  const RunResult mb = run_tracker(seq, CostModel{}, RunOptions{.solver = SolverKind::Mbodssp, .window = 5});
  CHECK_THAT(od.total_cost, WithinAbs(ssp.total_cost, 1e-9));
  CHECK(mb.total_cost >= ssp.total_cost - 1e-9);
  CHECK(mb.peak_nodes <= 2 * 5 * 20 + 2);
}

TEST_CASE("bench rows cover every frame of online solvers", "[io]") {
  SyntheticConfig c;
  c.frames = 25;
  const auto s = generate_synthetic(c, 1);
  BenchConfig bc;
  bc.solvers = {SolverKind::Mbodssp, SolverKind::Dssp};
  bc.taus = {3, 6};
  const auto rows = run_bench(group_by_frame(s.detections), CostModel{}, bc);
  // 2 x 25 mbodssp rows, then dssp at frames 9, 19 and 24.
  REQUIRE(rows.size() == 53);
  CHECK(rows[0].tau == 3);
  CHECK(rows[25].tau == 6);
  CHECK(rows.back().frame == 24);
  CHECK(rows.back().tau == 0);
  std::ostringstream out;
  write_bench_csv(out, rows);
  CHECK_THAT(out.str(), ContainsSubstring("solver,tau,frame,wall_ms,relaxations,queue_pushes,live_nodes,live_edges,cache_entries\n"));
}

TEST_CASE("unknown solver names are data errors", "[io]") {
  CHECK(parse_solver("mbodssp") == SolverKind::Mbodssp);
  CHECK_THROWS_AS(parse_solver("hungarian"), DataError);
}

TEST_CASE("per-frame work grows with the window length", "[io][bench]") {
  SyntheticConfig c;
  c.frames = 150;
  const auto s = generate_synthetic(c, 21);
  BenchConfig bc;
  bc.taus = {2, 5, 10, 20};
  const auto rows = run_bench(group_by_frame(s.detections), CostModel{}, bc);
  std::map<std::size_t, double> work;
  for (const BenchRow& r : rows) work[r.tau] += static_cast<double>(r.relaxations);
  CHECK(work[2] <= work[5]);
  CHECK(work[5] <= work[10]);
  CHECK(work[10] <= work[20]);
}

TEST_CASE("dssp relaxes fewer arcs than ssp on long sequences", "[io][bench]") {
  for (int frames : {50, 200}) {
    SyntheticConfig c;
    c.frames = frames;
    const auto s = generate_synthetic(c, static_cast<std::uint64_t>(frames));
    const TrackingGraph g = build_sequence_graph(group_by_frame(s.detections), CostModel{});
    SolverStats a, b;
    const double x = solve_ssp(g, a).total_cost;
    const double y = solve_dssp(g, b).total_cost;
    CHECK_THAT(x, WithinAbs(y, 1e-9));
    CHECK(b.relaxations < a.relaxations);
  }
}
