#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "lgfa/error.hpp"
#include "lgfa/geom.hpp"
#include "lgfa/json_fields.hpp"
#include "lgfa/map_model.hpp"
#include "lgfa/pose.hpp"
#include "lgfa/rng.hpp"

namespace lgfa::scenario {

enum class RoadTemplate : std::uint8_t { Straight, Curve, Intersection };

inline std::string road_name(RoadTemplate r) {
  switch (r) {
    case RoadTemplate::Straight: return "straight";
    case RoadTemplate::Curve: return "curve";
    case RoadTemplate::Intersection: return "intersection";
  }
  return "straight";
}

struct ScenarioSpec {
  std::uint64_t seed = 0;
  RoadTemplate road = RoadTemplate::Straight;
  double radius = 50.0;  // curve template only; the road turns left
  double length = 100.0;
  int lane_count = 2;
  double lane_width = 3.5;
  std::vector<double> crossings{30.0, 70.0};
  double crossing_length = 0.0;  // 0: full road width
  int frame_count = 20;
  double frame_spacing = 5.0;
  double fov_range = 30.0;
  double obs_noise = 0.0;
  double dropout_rate = 0.0;
  double fragment_rate = 0.0;
  double sample_step = 0.2;
  double wander = 0.0;  // lateral ego offset amplitude

  double road_width() const { return lane_count * lane_width; }
  double crossing_span() const { return crossing_length > 0.0 ? crossing_length : road_width(); }

  void validate() const {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(length) || !positive(lane_width) || !positive(frame_spacing) || !positive(fov_range) ||
        !positive(sample_step) || !positive(radius)) {
      throw SpecError("scenario: lengths must be positive");
    }
    if (lane_count < 1 || frame_count < 0) throw SpecError("scenario: lane_count >= 1 and frame_count >= 0 required");
    for (double r : {dropout_rate, fragment_rate}) {
      if (!(r >= 0.0 && r <= 1.0)) throw SpecError("scenario: rates must lie in [0, 1]");
    }
    if (!(obs_noise >= 0.0) || !(wander >= 0.0) || !(crossing_length >= 0.0)) {
      throw SpecError("scenario: noise, wander and crossing_length must be non-negative");
    }
    if (road == RoadTemplate::Curve && radius <= 0.5 * road_width()) {
      throw SpecError("scenario: curve radius must exceed half the road width");
    }
    for (double s : crossings) {
      if (!(s >= 0.0 && s <= length)) throw SpecError("scenario: crossing station beyond road length");
    }
  }

  static ScenarioSpec occlusion(std::uint64_t seed = 0) {
    ScenarioSpec s;
    s.seed = seed;
    s.obs_noise = 0.1;
    s.dropout_rate = 0.4;
    s.fragment_rate = 0.5;
    return s;
  }
};

inline void to_json(nlohmann::json& j, const ScenarioSpec& s) {
  j = {{"seed", s.seed},
       {"road", road_name(s.road)},
       {"radius", s.radius},
       {"length", s.length},
       {"lane_count", s.lane_count},
       {"lane_width", s.lane_width},
       {"crossings", s.crossings},
       {"crossing_length", s.crossing_length},
       {"frame_count", s.frame_count},
       {"frame_spacing", s.frame_spacing},
       {"fov_range", s.fov_range},
       {"obs_noise", s.obs_noise},
       {"dropout_rate", s.dropout_rate},
       {"fragment_rate", s.fragment_rate},
       {"sample_step", s.sample_step},
       {"wander", s.wander}};
}

inline void from_json(const nlohmann::json& j, ScenarioSpec& s) {
  json_fields::Reader r(j, "scenario");
  r.read("seed", s.seed);
  std::string road = road_name(s.road);
  r.read("road", road);
  if (road == "straight") {
    s.road = RoadTemplate::Straight;
  } else if (road == "curve") {
    s.road = RoadTemplate::Curve;
  } else if (road == "intersection") {
    s.road = RoadTemplate::Intersection;
  } else {
    throw SchemaError("scenario.road: unknown template '" + road + "'");
  }
  r.read("radius", s.radius);
  r.read("length", s.length);
  r.read("lane_count", s.lane_count);
  r.read("lane_width", s.lane_width);
  r.read("crossings", s.crossings);
  r.read("crossing_length", s.crossing_length);
  r.read("frame_count", s.frame_count);
  r.read("frame_spacing", s.frame_spacing);
  r.read("fov_range", s.fov_range);
  r.read("obs_noise", s.obs_noise);
  r.read("dropout_rate", s.dropout_rate);
  r.read("fragment_rate", s.fragment_rate);
  r.read("sample_step", s.sample_step);
  r.read("wander", s.wander);
  r.finish();
  s.validate();
}

/// Centerline frame at station s: position, unit tangent, unit left normal.
struct Frenet {
  Point2 pos;
  Point2 tangent;
  Point2 normal;
};

inline Frenet centerline(const ScenarioSpec& spec, double s) {
  if (spec.road == RoadTemplate::Curve) {
    const double a = s / spec.radius;
    return {{spec.radius * std::sin(a), spec.radius * (1.0 - std::cos(a))},
            {std::cos(a), std::sin(a)},
            {-std::sin(a), std::cos(a)}};
  }
  return {{s, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
}

namespace detail {

// Offset curve over stations [s0, s1]; straight pieces get two vertices.
inline std::vector<Point2> offset_curve(const ScenarioSpec& spec, double offset, double s0, double s1) {
  std::vector<Point2> pts;
  if (spec.road != RoadTemplate::Curve) {
    for (double s : {s0, s1}) {
      const auto f = centerline(spec, s);
      pts.push_back(f.pos + offset * f.normal);
    }
    return pts;
  }
  const auto n = static_cast<std::size_t>(std::ceil((s1 - s0) / spec.sample_step - 1e-9));
  for (std::size_t k = 0; k <= n; ++k) {
    const double s = k == n ? s1 : s0 + static_cast<double>(k) * (s1 - s0) / static_cast<double>(n);
    const auto f = centerline(spec, s);
    pts.push_back(f.pos + offset * f.normal);
  }
  return pts;
}

inline void add(GlobalVectorMap& map, SemanticClass c, std::vector<Point2> pts) {
  auto& v = map.elements[c];
  const auto gid = static_cast<std::int64_t>(v.size());
  v.push_back({gid, Polyline(c, std::move(pts)), {0}, {gid}});
}

}  // namespace detail

/// Ground-truth map: boundaries at the road edges, dividers between lanes, crossings across the
/// road at the given stations. The intersection template adds a perpendicular road through the
/// middle station, reaching fov_range - road width to either side, and interrupts the lines of
/// both roads inside the junction.
inline GlobalVectorMap generate_gt(const ScenarioSpec& spec) {
  spec.validate();
  GlobalVectorMap map;
  map.scene = "synthetic-" + road_name(spec.road) + "-" + std::to_string(spec.seed);
  map.config = spec;
  const double w = spec.road_width();
  auto line_class = [&](int k) {
    return k == 0 || k == spec.lane_count ? SemanticClass::RoadBoundary : SemanticClass::LaneDivider;
  };
  if (spec.road == RoadTemplate::Intersection) {
    const double mid = 0.5 * spec.length;
    const double arm = std::min(mid, spec.fov_range - w);
    if (mid - 0.5 * w <= 0.0 || arm <= 0.5 * w) throw SpecError("scenario: road too short for an intersection");
    for (int k = 0; k <= spec.lane_count; ++k) {
      const double o = -0.5 * w + k * spec.lane_width;
      detail::add(map, line_class(k), {{0.0, o}, {mid - 0.5 * w, o}});
      detail::add(map, line_class(k), {{mid + 0.5 * w, o}, {spec.length, o}});
      detail::add(map, line_class(k), {{mid + o, -arm}, {mid + o, -0.5 * w}});
      detail::add(map, line_class(k), {{mid + o, 0.5 * w}, {mid + o, arm}});
    }
  } else {
    for (int k = 0; k <= spec.lane_count; ++k) {
      detail::add(map, line_class(k), detail::offset_curve(spec, -0.5 * w + k * spec.lane_width, 0.0, spec.length));
    }
  }
  const double half = 0.5 * spec.crossing_span();
  for (double s : spec.crossings) {
    const auto f = centerline(spec, s);
    detail::add(map, SemanticClass::PedCrossing, {f.pos - half * f.normal, f.pos + half * f.normal});
  }
  return map;
}

/// Station of the first frame; the ego path is centered on the road.
inline double path_start(const ScenarioSpec& spec) {
  return std::max(0.0, 0.5 * (spec.length - std::max(spec.frame_count - 1, 0) * spec.frame_spacing));
}

/// True ego pose of a frame: on the centerline (plus optional wander), heading along it.
inline Pose2D ego_pose(const ScenarioSpec& spec, int frame) {
  const double s = std::min(path_start(spec) + frame * spec.frame_spacing, spec.length);
  const auto f = centerline(spec, s);
  const double lateral = spec.wander * std::sin(s / 10.0);
  const Point2 p = f.pos + lateral * f.normal;
  return make_pose(p.x, p.y, std::atan2(f.tangent.y, f.tangent.x));
}

struct ClippedPolyline {
  std::int64_t global_id = 0;
  Polyline geometry;
};

/// Parts of every GT element within range of center, as contiguous runs of the element's
/// sample_step samples (global frame).
inline std::vector<ClippedPolyline> clip_to_disk(const GlobalVectorMap& gt, Point2 center, double range,
                                                 double step) {
  std::vector<ClippedPolyline> out;
  for (auto c : kAllClasses) {
    for (const auto& e : gt.elements[c]) {
      const auto samples = resample(e.geometry, step);
      std::vector<Point2> run;
      auto flush = [&]() {
        if (auto p = try_polyline(c, run)) out.push_back({e.global_id, std::move(*p)});
        run.clear();
      };
      for (const auto& p : samples) {
        if (distance(p, center) <= range) {
          run.push_back(p);
        } else {
          flush();
        }
      }
      flush();
    }
  }
  return out;
}

/// Observations along the ego path. Every visible polyline consumes the same random draws
/// whatever the rates, so changing one rate leaves the other streams intact.
inline FrameSequence simulate_frames(const GlobalVectorMap& gt, const ScenarioSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  FrameSequence seq;
  seq.scene = gt.scene;
  for (int f = 0; f < spec.frame_count; ++f) {
    FrameObservation obs;
    obs.frame_index = f;
    obs.ego_pose_ref = ego_pose(spec, f);
    const Pose2D to_ego = pose_inverse(obs.ego_pose_ref);
    for (const auto& clip : clip_to_disk(gt, obs.ego_pose_ref.translation(), spec.fov_range, spec.sample_step)) {
      const bool drop = rng.bernoulli(spec.dropout_rate);
      const bool split = rng.bernoulli(spec.fragment_rate);
      const double gap = rng.uniform(1.0, 5.0);
      const double where = rng.uniform();
      auto pts = pose_apply(to_ego, clip.geometry.vertices());
      for (auto& p : pts) {
        const double nx = rng.normal();
        const double ny = rng.normal();
        p = p + spec.obs_noise * Point2{nx, ny};
      }
      if (drop) continue;
      const SemanticClass c = clip.geometry.cls();
      const double total = arc_length(clip.geometry);
      if (split && total > gap + 2.0 * spec.sample_step) {
        const double mid = 0.5 * gap + where * (total - gap);
        const auto cum = cumulative_lengths(clip.geometry.vertices());
        std::vector<Point2> head;
        std::vector<Point2> tail;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (cum[i] < mid - 0.5 * gap) head.push_back(pts[i]);
          if (cum[i] > mid + 0.5 * gap) tail.push_back(pts[i]);
        }
        for (auto* part : {&head, &tail}) {
          if (auto p = try_polyline(c, std::move(*part))) obs.polylines.push_back({std::move(*p), clip.global_id});
        }
        continue;
      }
      if (auto p = try_polyline(c, std::move(pts))) obs.polylines.push_back({std::move(*p), clip.global_id});
    }
    seq.frames.push_back(std::move(obs));
  }
  return seq;
}

/// Eight ego-frame offsets: pure +-x / +-y translations of alpha meters, then the four diagonals
/// normalized to alpha meters with yaw +-2 alpha degrees.
inline std::vector<Pose2D> perturbations(double alpha) {
  if (!(alpha >= 1.0 && alpha <= 3.0)) throw SpecError("perturbations: alpha must lie in [1, 3]");
  const double t = 1.0 * alpha;
  const double d = t / std::numbers::sqrt2;
  const double yaw = deg2rad(2.0 * alpha);
  return {{t, 0.0, 0.0},  {-t, 0.0, 0.0}, {0.0, t, 0.0},  {0.0, -t, 0.0},
          {d, d, yaw},    {d, -d, -yaw},  {-d, d, yaw},   {-d, -d, -yaw}};
}

/// Initial guess for a perturbation: the true pose composed with the ego-frame offset.
inline Pose2D perturbed(const Pose2D& truth, const Pose2D& offset) { return pose_compose(truth, offset); }

}  // namespace lgfa::scenario
