#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "flowtrack/detection.hpp"

namespace flowtrack {

// Anything that can price the four edge families of the tracking network.
// link() returns nullopt when the pair must not be connected.
template <class C>
concept CostProvider = requires(const C& c, const Detection& a, const Detection& b) {
  { c.entry(a) } -> std::convertible_to<double>;
  { c.exit(a) } -> std::convertible_to<double>;
  { c.detection(a) } -> std::convertible_to<double>;
  { c.link(a, b) } -> std::convertible_to<std::optional<double>>;
};

enum class DetectionCostForm {
  // det_offset + det_weight * logistic(score)
  Affine,
  // -log(P / (1 - P)) with P = 1 - logistic(score), i.e. -beta * score
  LogOdds,
};

// Similarity vector in [0,1]^n, ordered (iou, location, size, extra...).
struct PairwiseFeatures {
  std::vector<double> s;
};

inline constexpr std::size_t kGeometricFeatureCount = 3;

struct CostModel {
  double beta = 1.0;
  double entry_cost = 2.0;
  double exit_cost = 2.0;
  double det_offset = -1.0;
  double det_weight = 2.0;
  std::vector<double> feature_offsets{-0.4, -0.4, -0.4};
  std::vector<double> feature_weights{2.0, 1.0, 1.0};
  DetectionCostForm detection_form = DetectionCostForm::Affine;
  bool gating = true;
  // Link admitted when center distance <= gating_factor * larger box diagonal.
  double gating_factor = 2.0;

  void validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(beta) || !finite(entry_cost) || !finite(exit_cost) || !finite(det_offset) ||
        !finite(det_weight) || !finite(gating_factor))
      throw DataError("cost model parameters must be finite");
    if (feature_offsets.size() != feature_weights.size())
      throw DataError("feature offsets and weights must have equal length");
    if (feature_weights.empty()) throw DataError("cost model needs at least one pairwise feature");
    if (!std::all_of(feature_offsets.begin(), feature_offsets.end(), finite) ||
        !std::all_of(feature_weights.begin(), feature_weights.end(), finite))
      throw DataError("feature offsets and weights must be finite");
  }

  std::size_t feature_count() const { return feature_weights.size(); }

  double entry(const Detection&) const { return entry_cost; }
  double exit(const Detection&) const { return exit_cost; }
  double detection(const Detection& d) const;
  std::optional<double> link(const Detection& a, const Detection& b) const;
};

// The logistic mapping 1 / (1 + exp(beta * score)).
inline double score_logistic(double score, double beta) {
  const double z = beta * score;
  // exp overflow saturates to 0 which is the correct limit
  return 1.0 / (1.0 + std::exp(z));
}

inline double detection_cost(double score, const CostModel& model) {
  if (model.detection_form == DetectionCostForm::LogOdds) return -model.beta * score;
  return model.det_offset + model.det_weight * score_logistic(score, model.beta);
}

inline PairwiseFeatures pairwise_features(const Detection& a, const Detection& b,
                                          std::size_t count = kGeometricFeatureCount) {
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  const std::size_t extra_available = std::min(a.extra.size(), b.extra.size());
  if (count > kGeometricFeatureCount + extra_available)
    throw DataError("cost model expects " + std::to_string(count) +
                    " pairwise features but detections supply only " +
                    std::to_string(kGeometricFeatureCount + extra_available));

  PairwiseFeatures f;
  f.s.reserve(count);
  const double dx = a.box.center_x() - b.box.center_x();
  const double dy = a.box.center_y() - b.box.center_y();
  const double geometric[kGeometricFeatureCount] = {
      intersection_over_union(a.box, b.box),
      std::exp(-std::hypot(dx, dy) / a.box.diagonal()),
      std::min(a.box.area(), b.box.area()) / std::max(a.box.area(), b.box.area()),
  };
  for (std::size_t i = 0; i < count; ++i) {
    if (i < kGeometricFeatureCount) {
      f.s.push_back(clamp01(geometric[i]));
    } else {
      const std::size_t j = i - kGeometricFeatureCount;
      f.s.push_back(clamp01(1.0 - std::abs(a.extra[j] - b.extra[j])));
    }
  }
  return f;
}

// ((1 - s) + o)^T w
inline double link_cost(const PairwiseFeatures& f, const CostModel& model) {
  if (f.s.size() != model.feature_weights.size())
    throw DataError("pairwise feature dimension does not match the cost model");
  double cost = 0.0;
  for (std::size_t i = 0; i < f.s.size(); ++i)
    cost += ((1.0 - f.s[i]) + model.feature_offsets[i]) * model.feature_weights[i];
  return cost;
}

inline bool passes_gate(const Detection& a, const Detection& b, const CostModel& model) {
  if (!model.gating) return true;
  const double dx = a.box.center_x() - b.box.center_x();
  const double dy = a.box.center_y() - b.box.center_y();
  const double radius = model.gating_factor * std::max(a.box.diagonal(), b.box.diagonal());
  return std::hypot(dx, dy) <= radius;
}

inline double CostModel::detection(const Detection& d) const { return detection_cost(d.score, *this); }

inline std::optional<double> CostModel::link(const Detection& a, const Detection& b) const {
  if (!passes_gate(a, b, *this)) return std::nullopt;
  const double c = link_cost(pairwise_features(a, b, feature_count()), *this);
  if (!std::isfinite(c)) return std::nullopt;
  return c;
}

static_assert(CostProvider<CostModel>);

}  // namespace flowtrack
