#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "lgfa/baselines.hpp"
#include "lgfa/error.hpp"
#include "lgfa/geom.hpp"
#include "lgfa/map_model.hpp"
#include "lgfa/pose.hpp"

namespace lgfa::metrics {

inline std::vector<Point2> class_samples(const GlobalVectorMap& map, SemanticClass c, double step) {
  std::vector<Point2> out;
  for (const auto& e : map.elements[c]) {
    const auto s = resample(e.geometry, step);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

inline std::vector<Point2> all_samples(const GlobalVectorMap& map, double step) {
  std::vector<Point2> out;
  for (auto c : kAllClasses) {
    const auto s = class_samples(map, c, step);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

/// Symmetric Chamfer distance over the pooled samples of each class; nullopt when either map
/// lacks the class.
inline PerClass<std::optional<double>> chamfer_map(const GlobalVectorMap& pred, const GlobalVectorMap& gt,
                                                   double step) {
  PerClass<std::optional<double>> out;
  const double cell = std::max(step, kDefaultCell);
  for (auto c : kAllClasses) {
    const auto p = class_samples(pred, c, step);
    const auto g = class_samples(gt, c, step);
    if (p.empty() || g.empty()) continue;
    out[c] = 0.5 * (directed_distance(p, g, cell) + directed_distance(g, p, cell));
  }
  return out;
}

struct AnchorPair {
  Point2 gt;
  Point2 pred;
};

namespace detail {

// Endpoint correspondences of two polylines tracing the same element: ends are paired in the
// orientation with the smaller total distance, and a pair is kept when its ends lie within gate.
inline void end_anchors(std::span<const Point2> pred, std::span<const Point2> gt, double gate,
                        std::vector<AnchorPair>& out) {
  const double same = distance(pred.front(), gt.front()) + distance(pred.back(), gt.back());
  const double flip = distance(pred.back(), gt.front()) + distance(pred.front(), gt.back());
  const Point2 p0 = same <= flip ? pred.front() : pred.back();
  const Point2 p1 = same <= flip ? pred.back() : pred.front();
  if (distance(p0, gt.front()) <= gate) out.push_back({gt.front(), p0});
  if (distance(p1, gt.back()) <= gate) out.push_back({gt.back(), p1});
}

}  // namespace detail

struct ScaleConfig {
  double pair_gate = 1.0;  // max directed distance pred -> gt for an element pairing
  double end_gate = 2.0;   // max distance between paired endpoints
  double step = 0.2;
  baselines::IcpConfig align{};
};

/// Endpoint anchors of every pred element paired with the closest same-class gt element.
inline std::vector<AnchorPair> scale_anchors(const GlobalVectorMap& pred, const GlobalVectorMap& gt,
                                             std::span<const SemanticClass> classes, const ScaleConfig& cfg) {
  std::vector<AnchorPair> anchors;
  for (auto c : classes) {
    for (const auto& pe : pred.elements[c]) {
      const auto ps = resample(pe.geometry, cfg.step);
      const GlobalPolyline* best = nullptr;
      double best_d = cfg.pair_gate;
      for (const auto& ge : gt.elements[c]) {
        const double d = directed_distance(ps, resample(ge.geometry, cfg.step));
        if (d <= best_d) {
          best_d = d;
          best = &ge;
        }
      }
      if (best != nullptr) detail::end_anchors(pe.geometry.vertices(), best->geometry.vertices(), cfg.end_gate, anchors);
    }
  }
  return anchors;
}

/// Rotation-free similarity scale from gt to pred over centered anchor pairs.
inline double umeyama_scale(std::span<const AnchorPair> anchors) {
  if (anchors.size() < 2) throw DegenerateScale("scale_error: fewer than two anchor pairs");
  Point2 gbar{0.0, 0.0};
  Point2 pbar{0.0, 0.0};
  for (const auto& a : anchors) {
    gbar = gbar + a.gt;
    pbar = pbar + a.pred;
  }
  const double n = static_cast<double>(anchors.size());
  gbar = (1.0 / n) * gbar;
  pbar = (1.0 / n) * pbar;
  double d = 0.0;
  double x = 0.0;
  double gg = 0.0;
  for (const auto& a : anchors) {
    const Point2 g = a.gt - gbar;
    const Point2 p = a.pred - pbar;
    d += dot(g, p);
    x += cross(g, p);
    gg += dot(g, g);
  }
  if (gg <= 1e-12) throw DegenerateScale("scale_error: anchors collapse to a point");
  return std::sqrt(d * d + x * x) / gg;
}

inline GlobalVectorMap transform_map(const GlobalVectorMap& map, const Pose2D& pose) {
  GlobalVectorMap out = map;
  for (auto c : kAllClasses) {
    for (auto& e : out.elements[c]) e.geometry = pose_apply(pose, e.geometry);
  }
  return out;
}

/// Rigid pre-alignment of pred onto gt (class-blind trimmed ICP).
inline GlobalVectorMap prealign(const GlobalVectorMap& pred, const GlobalVectorMap& gt, const ScaleConfig& cfg) {
  const auto ps = all_samples(pred, cfg.step);
  const auto gs = all_samples(gt, cfg.step);
  const auto aligned = baselines::icp_trimmed(ps, gs, Pose2D::identity(), cfg.align);
  return transform_map(pred, aligned.pose);
}

/// |1 - s| * 100 with s estimated after rigid pre-alignment.
inline double scale_error(const GlobalVectorMap& pred, const GlobalVectorMap& gt, const ScaleConfig& cfg = {}) {
  const auto aligned = prealign(pred, gt, cfg);
  const auto anchors = scale_anchors(aligned, gt, kAllClasses, cfg);
  return std::abs(1.0 - umeyama_scale(anchors)) * 100.0;
}

/// Per-class scale error; classes without enough anchors yield nullopt.
inline PerClass<std::optional<double>> scale_error_per_class(const GlobalVectorMap& pred, const GlobalVectorMap& gt,
                                                             const ScaleConfig& cfg = {}) {
  PerClass<std::optional<double>> out;
  const auto aligned = prealign(pred, gt, cfg);
  for (auto c : kAllClasses) {
    const std::array<SemanticClass, 1> one{c};
    const auto anchors = scale_anchors(aligned, gt, one, cfg);
    try {
      out[c] = std::abs(1.0 - umeyama_scale(anchors)) * 100.0;
    } catch (const DegenerateScale&) {
    }
  }
  return out;
}

struct PoseError {
  double translation_m = 0.0;
  double heading_deg = 0.0;
};

inline PoseError pose_errors(const Pose2D& estimated, const Pose2D& truth) {
  const Pose2D rel = pose_compose(pose_inverse(estimated), truth);
  return {norm(rel.translation()), std::abs(rad2deg(wrap_angle(rel.phi)))};
}

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double p90 = 0.0;
};

/// Nearest-rank percentile: the ceil(p / 100 * N)-th smallest sample.
inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) throw EmptyAggregate("percentile of an empty sample");
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw EmptyAggregate("mean of an empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline Summary summarize(const std::vector<double>& v) {
  return {v.size(), mean(v), percentile(v, 50.0), percentile(v, 90.0)};
}

/// Mean of group means.
inline double nested_mean(const std::vector<std::vector<double>>& groups) {
  if (groups.empty()) throw EmptyAggregate("nested mean over no groups");
  std::vector<double> means;
  means.reserve(groups.size());
  for (const auto& g : groups) means.push_back(mean(g));
  return mean(means);
}

}  // namespace lgfa::metrics
