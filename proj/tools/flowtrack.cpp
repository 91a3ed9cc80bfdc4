// flowtrack command-line front end.
//
// Exit codes: 0 ok, 1 usage error, 2 data error, 3 internal invariant breach.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flowtrack/flowtrack.hpp"

namespace ft = flowtrack;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInvariant = 3;

struct Settings {
  std::string solver = "mbodssp";
  std::size_t window = 10;
  std::size_t cache_size = 0;
  std::string entry_merge = "prefix";
  std::string detection_form = "affine";
  std::uint64_t seed = 0;
  double iou_threshold = 0.5;
  ft::CostModel costs;
};

// Opened lazily so that "-" means the standard stream.
class Input {
 public:
  explicit Input(const std::string& path) : path_(path) {
    if (path == "-") return;
    file_.open(path);
    if (!file_) throw ft::DataError("cannot open '" + path + "' for reading");
  }
  std::istream& stream() { return path_ == "-" ? std::cin : file_; }
  const std::string& name() const { return path_ == "-" ? stdin_name_ : path_; }

 private:
  std::string path_;
  std::string stdin_name_ = "<stdin>";
  std::ifstream file_;
};

class Output {
 public:
  explicit Output(const std::string& path) : path_(path) {
    if (path == "-") return;
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) throw ft::DataError("cannot open '" + path + "' for writing");
  }
  std::ostream& stream() { return path_ == "-" ? std::cout : file_; }
  void finish() {
    stream().flush();
    if (!stream()) throw ft::DataError("failed writing '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream file_;
};

ft::RunOptions run_options(const Settings& s) {
  ft::RunOptions o;
  o.solver = ft::parse_solver(s.solver);
  o.window = s.window;
  o.cache_size = s.cache_size;
  if (s.entry_merge == "prefix")
    o.entry_merge = ft::EntryMerge::AccumulatedPrefix;
  else if (s.entry_merge == "onehop")
    o.entry_merge = ft::EntryMerge::OneHop;
  else
    throw ft::DataError("entry-merge must be 'prefix' or 'onehop'");
  if (o.window < 1) throw ft::DataError("window must be at least 1");
  return o;
}

ft::CostModel cost_model(const Settings& s) {
  ft::CostModel m = s.costs;
  if (s.detection_form == "affine")
    m.detection_form = ft::DetectionCostForm::Affine;
  else if (s.detection_form == "logodds")
    m.detection_form = ft::DetectionCostForm::LogOdds;
  else
    throw ft::DataError("detection-form must be 'affine' or 'logodds'");
  m.validate();
  return m;
}

void write_points(std::ostream& out, const std::vector<ft::FrozenPoint>& points) {
  std::vector<ft::TrackRow> rows;
  rows.reserve(points.size());
  for (const ft::FrozenPoint& p : points) rows.push_back(ft::TrackRow{p.frame, p.track_id, p.box});
  ft::write_tracks(out, rows);
}

int run_track_batch(const Settings& s, const std::string& input, const std::string& output) {
  Input in(input);
  const auto dets = ft::parse_detections(in.stream(), in.name());
  const ft::FrameSequence seq = ft::group_by_frame(dets);
  const ft::RunResult r = ft::run_tracker(seq, cost_model(s), run_options(s));
  Output out(output);
  ft::write_tracks(out.stream(), r.rows);
  out.finish();
  return 0;
}

// Frames arrive as blank-line separated blocks. After frame t the points of
// frame t - lag are written; the rest follow at end of stream.
int run_track_stream(const Settings& s, const std::string& input, const std::string& output,
                     std::optional<std::size_t> confirm_lag) {
  const ft::RunOptions options = run_options(s);
  if (!ft::is_online(options.solver)) throw ft::DataError("--stream needs solver odssp or mbodssp");
  const int lag = static_cast<int>(confirm_lag.value_or(options.window));
  Input in(input);
  Output out(output);
  ft::OnlineTracker<ft::CostModel> tracker(options.tracker_config(), cost_model(s));
  std::size_t line = 0;
  std::optional<int> first, last, emitted;
  auto emit_through = [&](int frame) {
    for (int f = emitted ? *emitted + 1 : *first; f <= frame; ++f) {
      write_points(out.stream(), tracker.points_in_frame(f));
      emitted = f;
    }
    out.stream().flush();
  };
  while (auto block = ft::read_frame_block(in.stream(), line, in.name())) {
    if (block->empty()) continue;
    const int frame = block->front().frame;
    if (last && frame <= *last)
      throw ft::DataError(in.name() + ":" + std::to_string(line) + ": frame " + std::to_string(frame) +
                          " is not after frame " + std::to_string(*last));
    // Missing frames are empty.
    if (last)
      for (int f = *last + 1; f < frame; ++f) tracker.process_frame(f, {});
    if (!first) first = frame;
    tracker.process_frame(frame, std::span<const ft::Detection>(*block));
    last = frame;
    if (frame - lag >= *first) emit_through(frame - lag);
  }
  if (last) emit_through(*last);
  out.finish();
  return 0;
}

int run_bench(const Settings& s, const std::string& input, const ft::SyntheticConfig& synth,
              const std::vector<std::string>& solvers, const std::vector<std::size_t>& taus, int stride,
              const std::string& output) {
  ft::FrameSequence seq;
  if (!input.empty()) {
    Input in(input);
    seq = ft::group_by_frame(ft::parse_detections(in.stream(), in.name()));
  } else {
    seq = ft::group_by_frame(ft::generate_synthetic(synth, s.seed).detections);
  }
  ft::BenchConfig bc;
  bc.solvers.clear();
  for (const std::string& name : solvers) bc.solvers.push_back(ft::parse_solver(name));
  bc.taus = taus.empty() ? std::vector<std::size_t>{s.window} : taus;
  for (std::size_t t : bc.taus)
    if (t < 1) throw ft::DataError("tau values must be at least 1");
  bc.cache_size = s.cache_size;
  bc.stride = stride;
  const auto rows = ft::run_bench(seq, cost_model(s), bc);
  Output out(output);
  ft::write_bench_csv(out.stream(), rows);
  out.finish();
  return 0;
}

int run_synth(const Settings& s, const ft::SyntheticConfig& synth, const std::string& output,
              const std::string& gt_output) {
  const ft::SyntheticSequence seq = ft::generate_synthetic(synth, s.seed);
  Output out(output);
  ft::write_detections(out.stream(), seq.detections);
  out.finish();
  if (!gt_output.empty()) {
    Output gt(gt_output);
    ft::write_labeled_boxes(gt.stream(), seq.ground_truth);
    gt.finish();
  }
  return 0;
}

int run_eval(const Settings& s, const std::string& gt_path, const std::string& tracks_path,
             const std::string& output) {
  Input g(gt_path);
  const ft::GroundTruth gt = ft::parse_labeled_boxes(g.stream(), g.name());
  Input h(tracks_path);
  const ft::FrameBoxes hyp = ft::parse_labeled_boxes(h.stream(), h.name());
  const ft::MotReport r = ft::clear_mot(gt, hyp, s.iou_threshold);
  Output out(output);
  auto& o = out.stream();
  o << "mota," << ft::format_number(r.mota) << '\n'
    << "motp," << ft::format_number(r.motp) << '\n'
    << "mt," << ft::format_number(r.mostly_tracked) << '\n'
    << "pt," << ft::format_number(r.partially_tracked) << '\n'
    << "ml," << ft::format_number(r.mostly_lost) << '\n'
    << "ids," << r.id_switches << '\n'
    << "frag," << r.fragmentations << '\n'
    << "far," << ft::format_number(r.false_alarm_rate) << '\n'
    << "gt," << r.ground_truth << '\n'
    << "matches," << r.matches << '\n'
    << "fn," << r.false_negatives << '\n'
    << "fp," << r.false_positives << '\n'
    << "frames," << r.frames << '\n';
  out.finish();
  return 0;
}

int run_oracle(const Settings& s, const std::string& input, const std::string& output) {
  Input in(input);
  const ft::FrameSequence seq = ft::group_by_frame(ft::parse_detections(in.stream(), in.name()));
  const ft::TrackingGraph g = ft::build_sequence_graph(seq, cost_model(s));
  const ft::FlowSolution best = ft::brute_force_optimum(g, s.seed);
  std::vector<ft::TrackRow> rows;
  for (const ft::Trajectory& t : best.trajectories)
    for (ft::DetectionId d : t.detections)
      rows.push_back(ft::TrackRow{g.detection(d).frame, t.track_id, g.detection(d).box});
  ft::sort_rows(rows);
  Output out(output);
  ft::write_tracks(out.stream(), rows);
  out.finish();
  std::cerr << "total_cost," << ft::format_number(best.total_cost) << '\n';
  return 0;
}

// Track output and ground truth share the column layout; this validates and
// normalises the rows so they can be scored as ground truth.
int run_tracks_to_gt(const std::string& input, const std::string& output) {
  Input in(input);
  const ft::FrameBoxes boxes = ft::parse_labeled_boxes(in.stream(), in.name());
  Output out(output);
  ft::write_labeled_boxes(out.stream(), boxes);
  out.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Min-cost-flow multi-object tracking"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Flat key = value configuration file")->envname("FLOWTRACK_CONFIG");

  Settings s;
  app.add_option("--solver", s.solver, "ssp, dssp, odssp, mbodssp, dp or oracle")
      ->check(CLI::IsMember({"ssp", "dssp", "odssp", "mbodssp", "dp", "oracle"}))
      ->capture_default_str();
  app.add_option("--window", s.window, "History length tau of mbodssp")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--cache-size", s.cache_size, "Predecessor-map cache entries (0 = window)")->capture_default_str();
  app.add_option("--entry-merge", s.entry_merge, "Clipped prefix carried into entries: prefix or onehop")
      ->check(CLI::IsMember({"prefix", "onehop"}))
      ->capture_default_str();
  app.add_option("--seed", s.seed, "Seed for synthetic data and oracle order")->capture_default_str();
  app.add_option("--iou-threshold", s.iou_threshold, "CLEAR-MOT match threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--beta", s.costs.beta, "Score logistic slope")->capture_default_str();
  app.add_option("--entry-cost", s.costs.entry_cost)->capture_default_str();
  app.add_option("--exit-cost", s.costs.exit_cost)->capture_default_str();
  app.add_option("--det-offset", s.costs.det_offset)->capture_default_str();
  app.add_option("--det-weight", s.costs.det_weight)->capture_default_str();
  app.add_option("--detection-form", s.detection_form, "affine or logodds")
      ->check(CLI::IsMember({"affine", "logodds"}))
      ->capture_default_str();
  app.add_option("--feature-offsets", s.costs.feature_offsets)->capture_default_str();
  app.add_option("--feature-weights", s.costs.feature_weights)->capture_default_str();
  app.add_flag("--gating,!--no-gating", s.costs.gating, "Admit links only between nearby boxes")
      ->capture_default_str();
  app.add_option("--gating-factor", s.costs.gating_factor, "Gate radius in larger box diagonals")
      ->capture_default_str();

  std::string input = "-", output = "-";

  auto* track = app.add_subcommand("track", "Track a detection file, or a frame stream with --stream");
  bool stream = false;
  std::optional<std::size_t> confirm_lag;
  track->add_option("-i,--input", input, "Detections CSV ('-' for stdin)")->capture_default_str();
  track->add_option("-o,--output", output, "Tracks CSV ('-' for stdout)")->capture_default_str();
  track->add_flag("--stream", stream, "Read blank-line separated frame blocks and write tracks incrementally");
  track->add_option("--confirm-lag", confirm_lag, "Stream mode: frames older than this are written (default window)");

  ft::SyntheticConfig synth;
  auto add_synth_options = [&](CLI::App* sub) {
    sub->add_option("--frames", synth.frames)->capture_default_str();
    sub->add_option("--initial-tracks", synth.initial_tracks)->capture_default_str();
    sub->add_option("--max-tracks", synth.max_tracks)->capture_default_str();
    sub->add_option("--spawn-probability", synth.spawn_probability)->capture_default_str();
    sub->add_option("--death-probability", synth.death_probability)->capture_default_str();
    sub->add_option("--false-positive-rate", synth.false_positive_rate)->capture_default_str();
    sub->add_option("--miss-rate", synth.miss_rate)->capture_default_str();
    sub->add_option("--fixed-count", synth.fixed_count, "Exactly this many detections per frame");
    sub->add_option("--crossing-pairs", synth.crossing_pairs)->capture_default_str();
  };

  auto* bench = app.add_subcommand("bench", "Per-frame solver statistics as CSV");
  std::vector<std::string> solvers{"mbodssp"};
  std::vector<std::size_t> taus;
  int stride = 10;
  std::string bench_input;
  bench->add_option("-i,--input", bench_input, "Detections CSV; synthetic data when omitted");
  bench->add_option("-o,--output", output, "Statistics CSV ('-' for stdout)")->capture_default_str();
  bench->add_option("--solvers", solvers, "Solvers to run")->capture_default_str();
  bench->add_option("--taus", taus, "Window lengths swept for mbodssp (default: --window)");
  bench->add_option("--stride", stride, "Batch solvers re-solve every this many frames")->capture_default_str();
  add_synth_options(bench);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic detection sequence");
  std::string gt_output;
  synth_cmd->add_option("-o,--output", output, "Detections CSV ('-' for stdout)")->capture_default_str();
  synth_cmd->add_option("--gt", gt_output, "Ground-truth CSV");
  add_synth_options(synth_cmd);

  auto* eval = app.add_subcommand("eval", "CLEAR-MOT scores of tracks against ground truth");
  std::string gt_path, tracks_path;
  eval->add_option("--gt", gt_path, "Ground-truth CSV")->required();
  eval->add_option("--tracks", tracks_path, "Tracks CSV")->required();
  eval->add_option("-o,--output", output, "Report ('-' for stdout)")->capture_default_str();

  auto* oracle = app.add_subcommand("oracle", "Exhaustive optimum of a small detection file");
  oracle->add_option("-i,--input", input, "Detections CSV ('-' for stdin)")->capture_default_str();
  oracle->add_option("-o,--output", output, "Tracks CSV ('-' for stdout)")->capture_default_str();

  auto* to_gt = app.add_subcommand("tracks-to-gt", "Convert tracker output to ground-truth format");
  to_gt->add_option("-i,--input", input, "Tracks CSV ('-' for stdin)")->capture_default_str();
  to_gt->add_option("-o,--output", output, "Ground-truth CSV ('-' for stdout)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*track)
      return stream ? run_track_stream(s, input, output, confirm_lag) : run_track_batch(s, input, output);
    if (*bench) return run_bench(s, bench_input, synth, solvers, taus, stride, output);
    if (*synth_cmd) return run_synth(s, synth, output, gt_output);
    if (*eval) return run_eval(s, gt_path, tracks_path, output);
    if (*oracle) return run_oracle(s, input, output);
    if (*to_gt) return run_tracks_to_gt(input, output);
  } catch (const ft::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const ft::InvariantError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInvariant;
  }
  return kExitUsage;
}
