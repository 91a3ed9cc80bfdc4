#include <catch_amalgamated.hpp>

#include <random>

#include "flowtrack/metrics.hpp"

using namespace flowtrack;
using Catch::Matchers::WithinAbs;

namespace {

Box box_at(double x) { return Box{x, 0.0, 10.0, 20.0}; }

// One object moving right by 5 px per frame over `frames` frames.
GroundTruth single_track(int frames) {
  GroundTruth gt;
  for (int t = 0; t < frames; ++t) gt[t].push_back(LabeledBox{7, box_at(5.0 * t), false});
  return gt;
}

}  // namespace

TEST_CASE("identical hypotheses score perfectly", "[metrics]") {
  GroundTruth gt = single_track(10);
  for (int t = 0; t < 10; ++t) gt[t].push_back(LabeledBox{8, box_at(200.0 + 3.0 * t), false});
  const MotReport r = clear_mot(gt, gt);
  CHECK_THAT(r.mota, WithinAbs(1.0, 1e-9));
  CHECK_THAT(r.motp, WithinAbs(1.0, 1e-9));
  CHECK(r.id_switches == 0);
  CHECK(r.fragmentations == 0);
  CHECK(r.false_positives == 0);
  CHECK(r.false_negatives == 0);
  CHECK(r.matches == 20);
  CHECK_THAT(r.mostly_tracked, WithinAbs(1.0, 1e-12));
  CHECK(r.false_alarm_rate == 0.0);
}

TEST_CASE("a hypothesis id change halfway costs one id switch", "[metrics]") {
  const GroundTruth gt = single_track(10);
  FrameBoxes hyp;
  for (int t = 0; t < 10; ++t) hyp[t].push_back(LabeledBox{t < 5 ? 1 : 2, box_at(5.0 * t), false});
  const MotReport r = clear_mot(gt, hyp);
  CHECK(r.id_switches == 1);
  CHECK(r.fragmentations == 0);
  CHECK_THAT(r.mota, WithinAbs(0.9, 1e-9));
  CHECK_THAT(r.motp, WithinAbs(1.0, 1e-9));
}

TEST_CASE("no hypotheses miss everything", "[metrics]") {
  const MotReport r = clear_mot(single_track(10), {});
  CHECK_THAT(r.mota, WithinAbs(0.0, 1e-9));
  CHECK(r.false_negatives == 10);
  CHECK(r.matches == 0);
  CHECK(r.motp == 0.0);
  CHECK_THAT(r.mostly_lost, WithinAbs(1.0, 1e-12));
}

TEST_CASE("false positives, fragmentation and coverage classes", "[metrics]") {
  GroundTruth gt;
  FrameBoxes hyp;
  // Object 1 present in frames 0..9, matched in 0..3 and 6..9: one fragmentation, coverage 0.8.
  // Object 2 present in frames 0..9, matched in frame 0 only: coverage 0.1.
  // One spurious hypothesis in frame 4.
  for (int t = 0; t < 10; ++t) {
    gt[t].push_back(LabeledBox{1, box_at(0.0), false});
    gt[t].push_back(LabeledBox{2, box_at(300.0), false});
    if (t < 4 || t >= 6) hyp[t].push_back(LabeledBox{10, box_at(0.0), false});
    if (t == 0) hyp[t].push_back(LabeledBox{11, box_at(300.0), false});
  }
  hyp[4].push_back(LabeledBox{12, box_at(600.0), false});
  const MotReport r = clear_mot(gt, hyp);
  CHECK(r.ground_truth == 20);
  CHECK(r.matches == 9);
  CHECK(r.false_negatives == 11);
  CHECK(r.false_positives == 1);
  CHECK(r.id_switches == 0);
  CHECK(r.fragmentations == 1);
  CHECK_THAT(r.mota, WithinAbs(1.0 - 12.0 / 20.0, 1e-9));
  CHECK_THAT(r.mostly_tracked, WithinAbs(0.5, 1e-12));
  CHECK_THAT(r.mostly_lost, WithinAbs(0.5, 1e-12));
  CHECK_THAT(r.partially_tracked, WithinAbs(0.0, 1e-12));
  CHECK_THAT(r.false_alarm_rate, WithinAbs(0.1, 1e-12));
}

TEST_CASE("motp averages the overlap of matches", "[metrics]") {
  GroundTruth gt;
  FrameBoxes hyp;
  gt[0].push_back(LabeledBox{1, Box{0, 0, 10, 10}, false});
  // Shifted by 2 px: IoU = 80 / 120.
  hyp[0].push_back(LabeledBox{1, Box{2, 0, 10, 10}, false});
  gt[1].push_back(LabeledBox{1, Box{0, 0, 10, 10}, false});
  hyp[1].push_back(LabeledBox{1, Box{0, 0, 10, 10}, false});
  const MotReport r = clear_mot(gt, hyp);
  CHECK_THAT(r.motp, WithinAbs((80.0 / 120.0 + 1.0) / 2.0, 1e-9));
  CHECK_THAT(r.mota, WithinAbs(1.0, 1e-9));
}

TEST_CASE("matches below the threshold count as a miss and a false positive", "[metrics]") {
  GroundTruth gt;
  FrameBoxes hyp;
  gt[0].push_back(LabeledBox{1, Box{0, 0, 10, 10}, false});
  // IoU = 40 / 160 = 0.25.
  hyp[0].push_back(LabeledBox{1, Box{6, 0, 10, 10}, false});
  const MotReport r = clear_mot(gt, hyp);
  CHECK(r.false_negatives == 1);
  CHECK(r.false_positives == 1);
  CHECK_THAT(r.mota, WithinAbs(-1.0, 1e-9));
  const MotReport loose = clear_mot(gt, hyp, 0.2);
  CHECK(loose.matches == 1);
  CHECK_THAT(loose.mota, WithinAbs(1.0, 1e-9));
}

TEST_CASE("previous matches are kept over a better new overlap", "[metrics]") {
  GroundTruth gt;
  FrameBoxes hyp;
  gt[0].push_back(LabeledBox{1, Box{0, 0, 10, 10}, false});
  hyp[0].push_back(LabeledBox{5, Box{0, 0, 10, 10}, false});
  gt[1].push_back(LabeledBox{1, Box{0, 0, 10, 10}, false});
  // Hypothesis 5 still overlaps enough (IoU 9/11), hypothesis 6 fits exactly.
  hyp[1].push_back(LabeledBox{5, Box{1, 0, 10, 10}, false});
  hyp[1].push_back(LabeledBox{6, Box{0, 0, 10, 10}, false});
  const MotReport r = clear_mot(gt, hyp);
  CHECK(r.id_switches == 0);
  CHECK(r.false_positives == 1);
}

TEST_CASE("hypotheses on ignored ground truth are excused", "[metrics]") {
  GroundTruth gt;
  FrameBoxes hyp;
  gt[0].push_back(LabeledBox{1, Box{0, 0, 10, 10}, true});
  hyp[0].push_back(LabeledBox{5, Box{0, 0, 10, 10}, false});
  const MotReport r = clear_mot(gt, hyp);
  CHECK(r.false_positives == 0);
  CHECK(r.ground_truth == 0);
  CHECK_THAT(r.mota, WithinAbs(1.0, 1e-9));
}

TEST_CASE("relabelling hypothesis ids bijectively changes nothing", "[metrics][property]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> jitter(-3.0, 3.0);
  std::bernoulli_distribution keep(0.85), flip(0.1);
  for (int trial = 0; trial < 50; ++trial) {
    GroundTruth gt;
    FrameBoxes hyp, relabeled;
    for (int t = 0; t < 20; ++t)
      for (int k = 0; k < 4; ++k) {
        const Box b{40.0 * k + 2.0 * t, 10.0 * k, 20.0, 30.0};
        gt[t].push_back(LabeledBox{k, b, false});
        if (!keep(rng)) continue;
        const TrackId id = flip(rng) ? k + 10 : k;
        const Box h{b.x + jitter(rng), b.y + jitter(rng), b.w, b.h};
        hyp[t].push_back(LabeledBox{id, h, false});
        relabeled[t].push_back(LabeledBox{1000 - 3 * id, h, false});
      }
    const MotReport a = clear_mot(gt, hyp);
    const MotReport b = clear_mot(gt, relabeled);
    CHECK(a.mota == b.mota);
    CHECK(a.motp == b.motp);
    CHECK(a.id_switches == b.id_switches);
    CHECK(a.fragmentations == b.fragmentations);
    CHECK(a.false_positives == b.false_positives);
    CHECK(a.mota <= 1.0);
    CHECK(a.motp >= 0.0);
    CHECK(a.motp <= 1.0);
    CHECK_THAT(a.mostly_tracked + a.partially_tracked + a.mostly_lost, WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("hungarian finds the minimum assignment", "[metrics]") {
  const std::vector<std::vector<double>> cost{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
  const auto a = hungarian(cost);
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += cost[i][a[i]];
  CHECK(total == 5.0);
  CHECK(a == std::vector<std::size_t>{1, 0, 2});

  const std::vector<std::vector<double>> wide{{7, 3, 9, 1}, {2, 8, 4, 6}};
  const auto w = hungarian(wide);
  CHECK(w == std::vector<std::size_t>{3, 0});
  CHECK_THROWS_AS(hungarian({{1}, {2}}), std::invalid_argument);
}

TEST_CASE("hungarian agrees with exhaustive search", "[metrics][property]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 5;
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (auto& row : cost)
      for (double& c : row) c = u(rng);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    double best = std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += cost[i][perm[i]];
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const auto a = hungarian(cost);
    double got = 0.0;
    for (std::size_t i = 0; i < n; ++i) got += cost[i][a[i]];
    CHECK_THAT(got, WithinAbs(best, 1e-9));
  }
}

TEST_CASE("frame boxes validation", "[metrics]") {
  FrameBoxes b;
  b[0].push_back(LabeledBox{1, box_at(0), false});
  CHECK_NOTHROW(validate_frame_boxes(b, "gt"));
  b[0].push_back(LabeledBox{1, box_at(50), false});
  CHECK_THROWS_AS(validate_frame_boxes(b, "gt"), DataError);
}
