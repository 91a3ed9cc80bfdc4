#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowtrack/detection.hpp"

namespace flowtrack {

struct LabeledBox {
  TrackId id = 0;
  Box box;
  // Ground truth only: matches against it are neither rewarded nor penalised.
  bool ignored = false;
};

// Boxes per absolute frame index.
using FrameBoxes = std::map<int, std::vector<LabeledBox>>;
using GroundTruth = FrameBoxes;

inline void validate_frame_boxes(const FrameBoxes& boxes, const std::string& what) {
  for (const auto& [frame, list] : boxes) {
    std::set<TrackId> ids;
    for (const LabeledBox& b : list) {
      if (!ids.insert(b.id).second)
        throw DataError(what + " repeats id " + std::to_string(b.id) + " in frame " + std::to_string(frame));
      if (!(b.box.w > 0.0) || !(b.box.h > 0.0))
        throw DataError(what + " has a box without positive size in frame " + std::to_string(frame));
    }
  }
}

struct MotReport {
  double mota = 1.0;
  double motp = 0.0;
  double mostly_tracked = 0.0;
  double partially_tracked = 0.0;
  double mostly_lost = 0.0;
  std::size_t id_switches = 0;
  std::size_t fragmentations = 0;
  // False positives per frame.
  double false_alarm_rate = 0.0;

  std::size_t ground_truth = 0;
  std::size_t matches = 0;
  std::size_t false_negatives = 0;
  std::size_t false_positives = 0;
  std::size_t frames = 0;
  std::size_t gt_tracks = 0;
};

// Minimum-cost assignment of rows to columns (rows <= columns). Returns the
// column of each row.
inline std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return {};
  const std::size_t m = cost.front().size();
  if (m < n) throw std::invalid_argument("assignment needs at least as many columns as rows");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials over rows (u) and columns (v); p[j] is the row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j]) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

namespace detail {

// Pairs (a index, b index) with IoU >= threshold maximising the match count,
// then the summed IoU.
inline std::vector<std::pair<std::size_t, std::size_t>> match_boxes(const std::vector<const LabeledBox*>& a,
                                                                     const std::vector<const LabeledBox*>& b,
                                                                     double threshold) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (a.empty() || b.empty()) return out;
  const bool transpose = a.size() > b.size();
  const auto& rows = transpose ? b : a;
  const auto& cols = transpose ? a : b;
  // Any feasible pair is cheaper than every infeasible one combined.
  const double blocked = 2.0 * static_cast<double>(rows.size() + 1);
  std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double iou = intersection_over_union(rows[i]->box, cols[j]->box);
      cost[i][j] = iou >= threshold ? 1.0 - iou : blocked;
    }
  const auto assign = hungarian(cost);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (cost[i][assign[i]] >= blocked) continue;
    if (transpose)
      out.emplace_back(assign[i], i);
    else
      out.emplace_back(i, assign[i]);
  }
  return out;
}

}  // namespace detail

// CLEAR-MOT. Per frame: ground-truth/hypothesis pairs matched in the previous
// frame are kept while their IoU stays >= threshold; the rest are matched by a
// Hungarian assignment on 1 - IoU restricted to IoU >= threshold. An id
// switch is a ground-truth object matched to a different hypothesis than at
// its last match. A fragmentation is a match that resumes after frames where
// the object was present but unmatched. Unmatched hypotheses overlapping an
// ignored ground-truth box are not counted as false positives.
inline MotReport clear_mot(const GroundTruth& gt, const FrameBoxes& hypotheses, double iou_threshold = 0.5) {
  MotReport r;
  std::set<int> frames;
  for (const auto& [f, _] : gt) frames.insert(f);
  for (const auto& [f, _] : hypotheses) frames.insert(f);
  if (!frames.empty()) r.frames = static_cast<std::size_t>(*frames.rbegin() - *frames.begin() + 1);

  struct GtTrack {
    std::size_t present = 0;
    std::size_t matched = 0;
    std::optional<TrackId> last_hypothesis;
    bool matched_when_last_present = false;
  };
  std::map<TrackId, GtTrack> tracks;
  std::map<TrackId, TrackId> previous;  // gt id -> hypothesis id, previous frame only
  double iou_sum = 0.0;
  static const std::vector<LabeledBox> none;

  for (int f : frames) {
    auto git = gt.find(f);
    auto hit = hypotheses.find(f);
    const auto& gboxes = git == gt.end() ? none : git->second;
    const auto& hboxes = hit == hypotheses.end() ? none : hit->second;

    std::vector<const LabeledBox*> g, ignored, h;
    for (const LabeledBox& b : gboxes) (b.ignored ? ignored : g).push_back(&b);
    for (const LabeledBox& b : hboxes) h.push_back(&b);

    std::vector<char> g_done(g.size(), 0), h_done(h.size(), 0);
    std::map<TrackId, TrackId> current;
    auto record = [&](std::size_t gi, std::size_t hi) {
      g_done[gi] = h_done[hi] = 1;
      current[g[gi]->id] = h[hi]->id;
      iou_sum += intersection_over_union(g[gi]->box, h[hi]->box);
      ++r.matches;
      GtTrack& t = tracks[g[gi]->id];
      if (t.last_hypothesis && *t.last_hypothesis != h[hi]->id) ++r.id_switches;
      if (t.matched > 0 && !t.matched_when_last_present) ++r.fragmentations;
      t.last_hypothesis = h[hi]->id;
    };

    for (std::size_t gi = 0; gi < g.size(); ++gi) {
      auto prev = previous.find(g[gi]->id);
      if (prev == previous.end()) continue;
      for (std::size_t hi = 0; hi < h.size(); ++hi)
        if (!h_done[hi] && h[hi]->id == prev->second &&
            intersection_over_union(g[gi]->box, h[hi]->box) >= iou_threshold) {
          record(gi, hi);
          break;
        }
    }

    std::vector<std::size_t> g_left, h_left;
    std::vector<const LabeledBox*> g_rest, h_rest;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!g_done[i]) {
        g_left.push_back(i);
        g_rest.push_back(g[i]);
      }
    for (std::size_t i = 0; i < h.size(); ++i)
      if (!h_done[i]) {
        h_left.push_back(i);
        h_rest.push_back(h[i]);
      }
    for (const auto& [a, b] : detail::match_boxes(g_rest, h_rest, iou_threshold)) record(g_left[a], h_left[b]);

    std::vector<const LabeledBox*> h_unmatched;
    for (std::size_t i = 0; i < h.size(); ++i)
      if (!h_done[i]) h_unmatched.push_back(h[i]);
    const std::size_t excused = detail::match_boxes(ignored, h_unmatched, iou_threshold).size();

    for (std::size_t gi = 0; gi < g.size(); ++gi) {
      GtTrack& t = tracks[g[gi]->id];
      ++t.present;
      if (g_done[gi]) ++t.matched;
      t.matched_when_last_present = g_done[gi] != 0;
    }
    r.ground_truth += g.size();
    r.false_negatives += g.size() - static_cast<std::size_t>(std::count(g_done.begin(), g_done.end(), 1));
    r.false_positives += h_unmatched.size() - excused;
    previous = std::move(current);
  }

  const double errors = static_cast<double>(r.false_negatives + r.false_positives + r.id_switches);
  r.mota = 1.0 - errors / static_cast<double>(std::max<std::size_t>(r.ground_truth, 1));
  r.motp = r.matches ? iou_sum / static_cast<double>(r.matches) : 0.0;
  r.gt_tracks = tracks.size();
  if (!tracks.empty()) {
    std::size_t mt = 0, ml = 0;
    for (const auto& [id, t] : tracks) {
      const double coverage = static_cast<double>(t.matched) / static_cast<double>(t.present);
      if (coverage >= 0.8)
        ++mt;
      else if (coverage < 0.2)
        ++ml;
    }
    const double n = static_cast<double>(tracks.size());
    r.mostly_tracked = static_cast<double>(mt) / n;
    r.mostly_lost = static_cast<double>(ml) / n;
    r.partially_tracked = static_cast<double>(tracks.size() - mt - ml) / n;
  }
  r.false_alarm_rate = r.frames ? static_cast<double>(r.false_positives) / static_cast<double>(r.frames) : 0.0;
  return r;
}

}  // namespace flowtrack
