#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "lgfa/error.hpp"
#include "lgfa/geom.hpp"
#include "lgfa/json_fields.hpp"
#include "lgfa/map_model.hpp"
#include "lgfa/pose.hpp"

namespace lgfa::localization {

struct LocalizationConfig {
  double resample_step = 0.2;
  PerClass<double> class_weights{{1.0, 1.0, 1.0}};
  PerClass<double> gates{{1.5, 1.5, 1.8}};  // crossing / divider / boundary, fine stage
  double coarse_gate = 4.0;
  int coarse_iters = 8;
  int fine_iters = 15;
  double huber_delta = 0.5;
  double eps_conv = 1e-4;
  double pose_diff_scale = 5.0;  // meters per radian
  std::size_t max_points_global = 40000;
  std::size_t max_points_local = 20000;
  std::size_t min_points = 30;

  void validate() const {
    for (double v : {resample_step, coarse_gate, huber_delta, eps_conv, pose_diff_scale}) {
      if (!(v > 0.0) || !std::isfinite(v)) throw SchemaError("localization config: values must be positive");
    }
    for (auto c : kAllClasses) {
      if (!(gates[c] > 0.0) || !(class_weights[c] > 0.0)) throw SchemaError("localization config: gates and weights must be positive");
    }
    if (coarse_iters < 0 || fine_iters <= 0 || max_points_global == 0 || max_points_local == 0 || min_points == 0) {
      throw SchemaError("localization config: counts must be positive");
    }
  }
};

namespace detail {

inline nlohmann::json per_class_json(const PerClass<double>& v) {
  nlohmann::json j;
  for (auto c : kAllClasses) j[std::string(class_name(c))] = v[c];
  return j;
}

inline void per_class_from_json(const nlohmann::json& j, PerClass<double>& v, const std::string& section) {
  json_fields::Reader r(j, section);
  for (auto c : kAllClasses) r.read(std::string(class_name(c)).c_str(), v[c]);
  r.finish();
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const LocalizationConfig& c) {
  j = {{"resample_step", c.resample_step},
       {"class_weights", detail::per_class_json(c.class_weights)},
       {"gates", detail::per_class_json(c.gates)},
       {"coarse_gate", c.coarse_gate},
       {"coarse_iters", c.coarse_iters},
       {"fine_iters", c.fine_iters},
       {"huber_delta", c.huber_delta},
       {"eps_conv", c.eps_conv},
       {"pose_diff_scale", c.pose_diff_scale},
       {"max_points_global", c.max_points_global},
       {"max_points_local", c.max_points_local},
       {"min_points", c.min_points}};
}

inline void from_json(const nlohmann::json& j, LocalizationConfig& c) {
  json_fields::Reader r(j, "localization");
  r.read("resample_step", c.resample_step);
  if (const auto it = j.find("class_weights"); it != j.end()) detail::per_class_from_json(*it, c.class_weights, "localization.class_weights");
  if (const auto it = j.find("gates"); it != j.end()) detail::per_class_from_json(*it, c.gates, "localization.gates");
  nlohmann::json ignored;
  r.read("class_weights", ignored);
  r.read("gates", ignored);
  r.read("coarse_gate", c.coarse_gate);
  r.read("coarse_iters", c.coarse_iters);
  r.read("fine_iters", c.fine_iters);
  r.read("huber_delta", c.huber_delta);
  r.read("eps_conv", c.eps_conv);
  r.read("pose_diff_scale", c.pose_diff_scale);
  r.read("max_points_global", c.max_points_global);
  r.read("max_points_local", c.max_points_local);
  r.read("min_points", c.min_points);
  r.finish();
  c.validate();
}

/// Sampled points of one class: frame samples in the ego frame, map samples and the segments
/// between adjacent map samples in the global frame.
struct ClassSamples {
  std::vector<Point2> frame_points;
  std::vector<Point2> map_points;
  std::vector<Segment2> map_segments;
};

struct SampledClassSets {
  PerClass<ClassSamples> classes;

  std::size_t frame_total() const {
    std::size_t n = 0;
    for (const auto& c : classes.values) n += c.frame_points.size();
    return n;
  }
};

namespace detail {

// Keeps every stride-th arc-length sample of each polyline, stride = ceil(total / cap).
inline std::vector<std::vector<Point2>> capped_samples(const std::vector<std::vector<Point2>>& per_poly, std::size_t cap) {
  std::size_t total = 0;
  for (const auto& s : per_poly) total += s.size();
  const std::size_t stride = std::max<std::size_t>(1, (total + cap - 1) / cap);
  std::vector<std::vector<Point2>> out;
  out.reserve(per_poly.size());
  for (const auto& s : per_poly) {
    std::vector<Point2> kept;
    for (std::size_t k = 0; k < s.size(); k += stride) kept.push_back(s[k]);
    out.push_back(std::move(kept));
  }
  return out;
}

}  // namespace detail

/// Frame polylines are in the ego frame; the map is global.
inline SampledClassSets sample_sets(std::span<const Polyline> frame_polys, const GlobalVectorMap& map,
                                    const LocalizationConfig& cfg) {
  std::vector<std::vector<Point2>> frame_samples;
  std::vector<SemanticClass> frame_cls;
  for (const auto& p : frame_polys) {
    frame_samples.push_back(resample(p, cfg.resample_step));
    frame_cls.push_back(p.cls());
  }
  std::vector<std::vector<Point2>> map_samples;
  std::vector<SemanticClass> map_cls;
  for (auto c : kAllClasses) {
    for (const auto& e : map.elements[c]) {
      map_samples.push_back(resample(e.geometry, cfg.resample_step));
      map_cls.push_back(c);
    }
  }
  const auto frame_kept = detail::capped_samples(frame_samples, cfg.max_points_local);
  const auto map_kept = detail::capped_samples(map_samples, cfg.max_points_global);

  SampledClassSets sets;
  for (std::size_t i = 0; i < frame_kept.size(); ++i) {
    auto& dst = sets.classes[frame_cls[i]].frame_points;
    dst.insert(dst.end(), frame_kept[i].begin(), frame_kept[i].end());
  }
  for (std::size_t i = 0; i < map_kept.size(); ++i) {
    auto& cs = sets.classes[map_cls[i]];
    cs.map_points.insert(cs.map_points.end(), map_kept[i].begin(), map_kept[i].end());
    append_segments(map_kept[i], map_cls[i], cs.map_segments);
  }
  return sets;
}

inline SampledClassSets sample_sets(const FrameObservation& frame, const GlobalVectorMap& map,
                                    const LocalizationConfig& cfg) {
  std::vector<Polyline> polys;
  for (const auto& p : frame.polylines) polys.push_back(p.geometry);
  return sample_sets(polys, map, cfg);
}

/// Sample sets plus the per-class segment indices, built once per localization.
class PreparedSets {
 public:
  PreparedSets(SampledClassSets sets, double cell) : sets_(std::move(sets)), cell_(cell) {
    for (auto c : kAllClasses) segment_index_[c] = make_segment_index(sets_.classes[c].map_segments, cell_);
  }

  const SampledClassSets& sets() const { return sets_; }
  const ClassSamples& operator[](SemanticClass c) const { return sets_.classes[c]; }
  const GridIndex& segment_index(SemanticClass c) const { return segment_index_[c]; }
  double cell() const { return cell_; }

 private:
  SampledClassSets sets_;
  double cell_;
  PerClass<GridIndex> segment_index_;
};

enum class CorrKind : std::uint8_t { Forward, Backward };

struct Correspondence {
  CorrKind kind = CorrKind::Forward;
  SemanticClass cls = SemanticClass::LaneDivider;
  Point2 source;           // frame sample, ego frame
  Point2 target;           // global frame: foot on the segment (forward) or map sample (backward)
  std::size_t target_index = 0;  // segment index (forward) or map point index (backward)
  std::size_t source_index = 0;  // frame point index within the class
  double residual = 0.0;
  double weight = 1.0;
};

using ClassMask = PerClass<bool>;

inline ClassMask all_classes() { return {{true, true, true}}; }

inline bool class_active(const ClassSamples& cs, std::size_t min_points) {
  return cs.frame_points.size() >= min_points && cs.map_points.size() >= min_points && !cs.map_segments.empty();
}

/// Forward: each transformed frame sample to its nearest map segment. Backward: each map sample
/// to its nearest transformed frame sample. Both kept iff residual <= the class gate.
inline std::vector<Correspondence> build_corr(const PreparedSets& sets, const Pose2D& theta,
                                              const PerClass<double>& gates, std::size_t min_points,
                                              const ClassMask& mask = all_classes()) {
  std::vector<Correspondence> out;
  for (auto c : kAllClasses) {
    const auto& cs = sets[c];
    if (!mask[c] || !class_active(cs, min_points)) continue;
    const double gate = gates[c];
    const auto moved = pose_apply(theta, std::span<const Point2>(cs.frame_points));
    const auto& seg_index = sets.segment_index(c);
    for (std::size_t i = 0; i < moved.size(); ++i) {
      const Point2 p = moved[i];
      const auto hit = seg_index.nearest(
          p, [&](std::size_t j) { return point_to_segment_distance(p, cs.map_segments[j]); }, gate);
      if (!hit) continue;
      const auto& seg = cs.map_segments[hit->index];
      out.push_back({CorrKind::Forward, c, cs.frame_points[i], closest_on_segment(p, seg.a, seg.b), hit->index, i,
                     hit->distance, 1.0});
    }
    const auto moved_index = make_point_index(moved, sets.cell());
    for (std::size_t m = 0; m < cs.map_points.size(); ++m) {
      const Point2 y = cs.map_points[m];
      const auto hit = moved_index.nearest(y, [&](std::size_t j) { return distance(y, moved[j]); }, gate);
      if (!hit) continue;
      out.push_back({CorrKind::Backward, c, cs.frame_points[hit->index], y, m, hit->index, hit->distance, 1.0});
    }
  }
  return out;
}

inline double huber_irls(double r, double delta) { return r <= delta ? 1.0 : delta / r; }

inline double huber_loss(double r, double delta) {
  return r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
}

/// weight = w_c * huber_irls(residual).
inline std::vector<Correspondence> robust_weights(std::vector<Correspondence> corrs, const LocalizationConfig& cfg) {
  for (auto& c : corrs) c.weight = cfg.class_weights[c.cls] * huber_irls(c.residual, cfg.huber_delta);
  return corrs;
}

struct WeightedPair {
  Point2 source;
  Point2 target;
  double weight = 1.0;
};

/// Closed-form minimizer of sum w |R(phi) x + t - y|^2 over (t, phi).
inline Pose2D weighted_procrustes(std::span<const WeightedPair> pairs) {
  double total = 0.0;
  Point2 xs{0.0, 0.0};
  Point2 ys{0.0, 0.0};
  for (const auto& p : pairs) {
    total += p.weight;
    xs = xs + p.weight * p.source;
    ys = ys + p.weight * p.target;
  }
  if (!(total > 0.0)) throw DegenerateGeometry("procrustes: total weight is zero");
  bool spread = false;
  for (const auto& p : pairs) spread = spread || distance(p.source, pairs.front().source) > 1e-12;
  if (!spread) throw DegenerateGeometry("procrustes: all source points coincide");
  const Point2 xbar = (1.0 / total) * xs;
  const Point2 ybar = (1.0 / total) * ys;
  double d = 0.0;
  double x = 0.0;
  for (const auto& p : pairs) {
    const Point2 a = p.source - xbar;
    const Point2 b = p.target - ybar;
    d += p.weight * dot(a, b);
    x += p.weight * cross(a, b);
  }
  const double phi = (d == 0.0 && x == 0.0) ? 0.0 : std::atan2(x, d);
  const Point2 t = ybar - rotate(phi, xbar);
  return {t.x, t.y, wrap_angle(phi)};
}

inline double procrustes_objective(std::span<const WeightedPair> pairs, const Pose2D& pose) {
  double sum = 0.0;
  for (const auto& p : pairs) {
    const Point2 r = pose_apply(pose, p.source) - p.target;
    sum += p.weight * dot(r, r);
  }
  return sum;
}

/// Class-weighted bidirectional objective with the robust loss truncated at the gate.
inline double objective(const PreparedSets& sets, const Pose2D& theta, const PerClass<double>& gates,
                        const LocalizationConfig& cfg, const ClassMask& mask = all_classes()) {
  double total = 0.0;
  for (auto c : kAllClasses) {
    const auto& cs = sets[c];
    if (!mask[c] || !class_active(cs, cfg.min_points)) continue;
    const double gate = gates[c];
    const auto moved = pose_apply(theta, std::span<const Point2>(cs.frame_points));
    double fwd = 0.0;
    for (const auto& p : moved) {
      const auto hit = sets.segment_index(c).nearest(
          p, [&](std::size_t j) { return point_to_segment_distance(p, cs.map_segments[j]); }, gate);
      fwd += huber_loss(hit ? hit->distance : gate, cfg.huber_delta);
    }
    const auto moved_index = make_point_index(moved, sets.cell());
    double bwd = 0.0;
    for (const auto& y : cs.map_points) {
      const auto hit = moved_index.nearest(y, [&](std::size_t j) { return distance(y, moved[j]); }, gate);
      bwd += huber_loss(hit ? hit->distance : gate, cfg.huber_delta);
    }
    total += cfg.class_weights[c] * (fwd / static_cast<double>(cs.frame_points.size()) +
                                     bwd / static_cast<double>(cs.map_points.size()));
  }
  return total;
}

/// Procrustes pairs with the robust weight scaled by the per-class averaging of the objective
/// (1/|X^c| forward, 1/|Y^c| backward).
inline std::vector<WeightedPair> objective_pairs(const PreparedSets& sets, std::span<const Correspondence> corrs) {
  std::vector<WeightedPair> pairs;
  pairs.reserve(corrs.size());
  for (const auto& c : corrs) {
    const auto& cs = sets[c.cls];
    const double n = static_cast<double>(c.kind == CorrKind::Forward ? cs.frame_points.size() : cs.map_points.size());
    pairs.push_back({c.source, c.target, c.weight / n});
  }
  return pairs;
}

struct SolveResult {
  Pose2D pose;
  int iterations = 0;
  bool converged = false;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  PerClass<std::size_t> correspondences_last{};
};

/// Alternates correspondence search, robust weighting and the weighted rigid fit. Stops on a
/// pose update below eps_conv, an empty correspondence set, or the iteration budget.
inline SolveResult icp_solve(const PreparedSets& sets, const Pose2D& theta0, const PerClass<double>& gates, int iters,
                             const LocalizationConfig& cfg, const ClassMask& mask = all_classes()) {
  bool any = false;
  for (auto c : kAllClasses) any = any || (mask[c] && class_active(sets[c], cfg.min_points));
  if (!any) throw InsufficientInput("icp_solve: every class has too few samples");

  SolveResult res;
  res.pose = theta0;
  for (int k = 1; k <= iters; ++k) {
    auto corrs = build_corr(sets, res.pose, gates, cfg.min_points, mask);
    if (corrs.empty()) break;
    corrs = robust_weights(std::move(corrs), cfg);
    res.correspondences_last = {};
    for (const auto& c : corrs) ++res.correspondences_last[c.cls];
    const auto pairs = objective_pairs(sets, corrs);
    Pose2D next;
    try {
      next = weighted_procrustes(pairs);
    } catch (const DegenerateGeometry&) {
      break;
    }
    res.iterations = k;
    const bool small = pose_diff(next, res.pose, cfg.pose_diff_scale) < cfg.eps_conv;
    res.pose = next;
    if (small) {
      res.converged = true;
      break;
    }
  }
  res.initial_objective = objective(sets, theta0, gates, cfg, mask);
  res.final_objective = objective(sets, res.pose, gates, cfg, mask);
  // A worse objective is never reported as converged.
  if (res.final_objective > res.initial_objective) res.converged = false;
  return res;
}

struct LocalizationResult {
  Pose2D pose;
  bool coarse_ran = false;
  int stage1_iters = 0;
  int stage2_iters = 0;
  double final_objective = 0.0;
  bool converged = false;
  PerClass<std::size_t> correspondences_last{};
};

/// Boundary-only stage with the relaxed gate, then an all-class stage with the class gates,
/// started from the first stage's pose. Each stage returns an absolute pose, so the second
/// stage's output already contains the composition of both updates.
inline LocalizationResult localize(std::span<const Polyline> frame_polys, const GlobalVectorMap& map,
                                   const Pose2D& theta0, const LocalizationConfig& cfg) {
  auto sampled = sample_sets(frame_polys, map, cfg);
  if (sampled.frame_total() < cfg.min_points) throw InsufficientInput("localize: frame has fewer than min_points samples");
  const PreparedSets sets(std::move(sampled), std::max(cfg.resample_step, kDefaultCell));

  LocalizationResult out;
  Pose2D start = theta0;
  const auto boundary = SemanticClass::RoadBoundary;
  if (cfg.coarse_iters > 0 && class_active(sets[boundary], cfg.min_points)) {
    ClassMask mask{};
    mask[boundary] = true;
    PerClass<double> coarse{{cfg.coarse_gate, cfg.coarse_gate, cfg.coarse_gate}};
    const auto stage1 = icp_solve(sets, theta0, coarse, cfg.coarse_iters, cfg, mask);
    out.coarse_ran = true;
    out.stage1_iters = stage1.iterations;
    start = stage1.pose;
  }
  const auto stage2 = icp_solve(sets, start, cfg.gates, cfg.fine_iters, cfg);
  out.pose = stage2.pose;
  out.stage2_iters = stage2.iterations;
  out.final_objective = stage2.final_objective;
  out.converged = stage2.converged;
  out.correspondences_last = stage2.correspondences_last;
  return out;
}

inline LocalizationResult localize(const FrameObservation& frame, const GlobalVectorMap& map, const Pose2D& theta0,
                                   const LocalizationConfig& cfg) {
  std::vector<Polyline> polys;
  for (const auto& p : frame.polylines) polys.push_back(p.geometry);
  return localize(polys, map, theta0, cfg);
}

}  // namespace lgfa::localization
