#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "flowtrack/detection.hpp"
#include "flowtrack/metrics.hpp"

namespace flowtrack {

struct SyntheticConfig {
  int frames = 100;
  int initial_tracks = 5;
  int max_tracks = 20;
  double spawn_probability = 0.05;
  double death_probability = 0.01;
  double image_width = 640.0;
  double image_height = 480.0;
  double box_width = 30.0;
  double box_height = 60.0;
  double speed = 3.0;
  // Per-frame velocity jitter (pixels).
  double motion_noise = 0.3;
  // Detection box jitter around the true box (pixels).
  double box_noise = 1.0;
  // Expected fraction of emitted boxes that are false positives.
  double false_positive_rate = 0.1;
  double miss_rate = 0.05;
  double true_score_mean = 1.5;
  double false_score_mean = -0.5;
  double score_sigma = 0.7;
  // Exactly this many detections per frame: true detections first (dropping
  // the surplus), the rest filled with false positives.
  std::optional<int> fixed_count;
  // Pairs of tracks that start on opposite sides and cross mid-sequence.
  int crossing_pairs = 0;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (frames < 0) throw DataError("synthetic frame count must be non-negative");
    if (initial_tracks < 0 || max_tracks < 0 || crossing_pairs < 0)
      throw DataError("synthetic track counts must be non-negative");
    if (!prob(spawn_probability) || !prob(death_probability) || !prob(miss_rate))
      throw DataError("synthetic probabilities must lie in [0, 1]");
    if (!(false_positive_rate >= 0.0 && false_positive_rate < 1.0))
      throw DataError("false positive rate must lie in [0, 1)");
    if (!(image_width > 0.0) || !(image_height > 0.0) || !(box_width > 0.0) || !(box_height > 0.0))
      throw DataError("synthetic image and box sizes must be positive");
    if (!(score_sigma >= 0.0) || !(motion_noise >= 0.0) || !(box_noise >= 0.0) || !(speed >= 0.0))
      throw DataError("synthetic noise levels must be non-negative");
    if (fixed_count && *fixed_count < 0) throw DataError("fixed detection count must be non-negative");
  }
};

struct SyntheticSequence {
  int frames = 0;
  // Sorted by frame; local indices follow the shuffled emission order.
  std::vector<Detection> detections;
  // Ground-truth id of each detection, nullopt for false positives.
  std::vector<std::optional<TrackId>> truth;
  GroundTruth ground_truth;
};

// Deterministic for a given (config, seed) on every platform: only the
// engine's raw output is used, never std:: distribution objects.
inline SyntheticSequence generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  auto uniform = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto normal = [&](double mean, double sigma) {
    // Box-Muller on (0, 1].
    const double a = 1.0 - uniform();
    const double b = uniform();
    return mean + sigma * std::sqrt(-2.0 * std::log(a)) * std::cos(2.0 * std::numbers::pi * b);
  };
  auto bernoulli = [&](double p) { return uniform() < p; };
  auto poisson = [&](double lambda) {
    // Knuth; lambda is small here.
    const double limit = std::exp(-lambda);
    int k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  };

  struct Track {
    TrackId id;
    double cx, cy, vx, vy, w, h;
  };
  std::vector<Track> alive;
  TrackId next_id = 0;
  const double margin = 0.5 * std::max(config.box_width, config.box_height);
  auto spawn = [&]() {
    const double scale = 0.8 + 0.4 * uniform();
    const double angle = 2.0 * std::numbers::pi * uniform();
    alive.push_back(Track{next_id++, margin + uniform() * (config.image_width - 2 * margin),
                          margin + uniform() * (config.image_height - 2 * margin), config.speed * std::cos(angle),
                          config.speed * std::sin(angle), config.box_width * scale, config.box_height * scale});
  };
  for (int p = 0; p < config.crossing_pairs; ++p) {
    // Both reach the image centre line at mid-sequence, vertically offset by
    // less than a box height so that their boxes overlap while crossing.
    const double mid = 0.5 * config.frames;
    const double y = config.image_height * (p + 1) / (config.crossing_pairs + 1);
    const double dy = 0.3 * config.box_height * (uniform() - 0.5);
    const double vx = config.speed;
    const double cx = 0.5 * config.image_width;
    alive.push_back(Track{next_id++, cx - vx * mid, y - dy, vx, 0.0, config.box_width, config.box_height});
    alive.push_back(Track{next_id++, cx + vx * mid, y + dy, -vx, 0.0, config.box_width, config.box_height});
  }
  for (int i = 0; i < config.initial_tracks; ++i) spawn();

  SyntheticSequence out;
  out.frames = config.frames;
  const std::size_t crossing_ids = static_cast<std::size_t>(2 * config.crossing_pairs);
  for (int t = 0; t < config.frames; ++t) {
    if (t > 0) {
      std::vector<Track> next;
      for (Track tr : alive) {
        const bool crossing = static_cast<std::size_t>(tr.id) < crossing_ids;
        if (!crossing && bernoulli(config.death_probability)) continue;
        if (!crossing) {
          tr.vx += normal(0.0, config.motion_noise);
          tr.vy += normal(0.0, config.motion_noise);
        }
        tr.cx += tr.vx;
        tr.cy += tr.vy;
        next.push_back(tr);
      }
      alive = std::move(next);
      if (static_cast<int>(alive.size()) < config.max_tracks && bernoulli(config.spawn_probability)) spawn();
    }
    // Crossing tracks may start outside the image; everything else dies there.
    std::erase_if(alive, [&](const Track& tr) {
      const bool inside = tr.cx >= 0 && tr.cx <= config.image_width && tr.cy >= 0 && tr.cy <= config.image_height;
      const bool crossing = static_cast<std::size_t>(tr.id) < crossing_ids;
      const bool heading_in = (tr.cx < 0 && tr.vx > 0) || (tr.cx > config.image_width && tr.vx < 0);
      return !inside && !(crossing && heading_in);
    });

    struct Emitted {
      Detection d;
      std::optional<TrackId> truth;
    };
    std::vector<Emitted> frame;
    for (const Track& tr : alive) {
      const bool inside = tr.cx >= 0 && tr.cx <= config.image_width;
      if (!inside) continue;
      const Box gt_box{tr.cx - 0.5 * tr.w, tr.cy - 0.5 * tr.h, tr.w, tr.h};
      out.ground_truth[t].push_back(LabeledBox{tr.id, gt_box, false});
      if (bernoulli(config.miss_rate)) continue;
      Detection d;
      d.frame = t;
      d.box = Box{gt_box.x + normal(0.0, config.box_noise), gt_box.y + normal(0.0, config.box_noise),
                  std::max(1.0, gt_box.w + normal(0.0, config.box_noise)),
                  std::max(1.0, gt_box.h + normal(0.0, config.box_noise))};
      d.score = normal(config.true_score_mean, config.score_sigma);
      frame.push_back(Emitted{d, tr.id});
    }
    int fp = 0;
    if (config.fixed_count) {
      if (static_cast<int>(frame.size()) > *config.fixed_count) frame.resize(static_cast<std::size_t>(*config.fixed_count));
      fp = *config.fixed_count - static_cast<int>(frame.size());
    } else if (config.false_positive_rate > 0.0) {
      const double r = config.false_positive_rate;
      // Poisson(n r / (1 - r)) false positives make r the expected FP fraction.
      const double n_true = std::max<double>(static_cast<double>(frame.size()), 1.0);
      fp = poisson(n_true * r / (1.0 - r));
    }
    for (int k = 0; k < fp; ++k) {
      const double scale = 0.8 + 0.4 * uniform();
      Detection d;
      d.frame = t;
      const double w = config.box_width * scale;
      const double h = config.box_height * scale;
      d.box = Box{uniform() * (config.image_width - w), uniform() * (config.image_height - h), w, h};
      d.score = normal(config.false_score_mean, config.score_sigma);
      frame.push_back(Emitted{d, std::nullopt});
    }
    // Fisher-Yates with the raw engine.
    for (std::size_t i = frame.size(); i > 1; --i) std::swap(frame[i - 1], frame[rng() % i]);
    for (std::size_t i = 0; i < frame.size(); ++i) {
      frame[i].d.local_index = static_cast<int>(i);
      out.detections.push_back(frame[i].d);
      out.truth.push_back(frame[i].truth);
    }
  }
  return out;
}

}  // namespace flowtrack
