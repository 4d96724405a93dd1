#pragma once

// Exhaustive reference implementations and random instance generators shared by the unit tests
// and the acceptance binary.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "lgfa/lgfa.hpp"

namespace oracle {

using namespace lgfa;

struct Nearest {
  std::size_t index = 0;
  double distance = std::numeric_limits<double>::infinity();
};

/// O(n) scan; ties keep the lower index.
template <class DistFn>
std::optional<Nearest> scan(std::size_t n, DistFn dist, double max_radius = std::numeric_limits<double>::infinity()) {
  Nearest best;
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = dist(i);
    if (!any || d < best.distance) {
      best = {i, d};
      any = true;
    }
  }
  if (!any || !(best.distance <= max_radius)) return std::nullopt;
  return best;
}

inline double directed(const std::vector<Point2>& src, const std::vector<Point2>& dst) {
  double sum = 0.0;
  for (const auto& p : src) sum += scan(dst.size(), [&](std::size_t j) { return distance(p, dst[j]); })->distance;
  return sum / static_cast<double>(src.size());
}

inline double symmetric(const Polyline& a, const Polyline& b, double step) {
  const auto sa = resample(a, step);
  const auto sb = resample(b, step);
  return 0.5 * (directed(sa, sb) + directed(sb, sa));
}

/// Gated nearest-neighbour correspondences by exhaustive search, in the library's output order.
inline std::vector<localization::Correspondence> correspondences(const localization::SampledClassSets& sets,
                                                                 const Pose2D& theta, const PerClass<double>& gates,
                                                                 std::size_t min_points,
                                                                 const localization::ClassMask& mask) {
  using localization::CorrKind;
  std::vector<localization::Correspondence> out;
  for (auto c : kAllClasses) {
    const auto& cs = sets.classes[c];
    if (!mask[c] || !localization::class_active(cs, min_points)) continue;
    std::vector<Point2> moved;
    for (const auto& p : cs.frame_points) moved.push_back(pose_apply(theta, p));
    for (std::size_t i = 0; i < moved.size(); ++i) {
      const Point2 p = moved[i];
      const auto hit = scan(
          cs.map_segments.size(), [&](std::size_t j) { return point_to_segment_distance(p, cs.map_segments[j]); },
          gates[c]);
      if (!hit) continue;
      const auto& s = cs.map_segments[hit->index];
      out.push_back({CorrKind::Forward, c, cs.frame_points[i], closest_on_segment(p, s.a, s.b), hit->index, i,
                     hit->distance, 1.0});
    }
    for (std::size_t m = 0; m < cs.map_points.size(); ++m) {
      const Point2 y = cs.map_points[m];
      const auto hit = scan(moved.size(), [&](std::size_t j) { return distance(y, moved[j]); }, gates[c]);
      if (!hit) continue;
      out.push_back({CorrKind::Backward, c, cs.frame_points[hit->index], y, m, hit->index, hit->distance, 1.0});
    }
  }
  return out;
}

inline bool same(const localization::Correspondence& a, const localization::Correspondence& b) {
  return a.kind == b.kind && a.cls == b.cls && a.source == b.source && a.target == b.target &&
         a.target_index == b.target_index && a.source_index == b.source_index && a.residual == b.residual;
}

inline bool same(const std::vector<localization::Correspondence>& a,
                 const std::vector<localization::Correspondence>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same(a[i], b[i])) return false;
  }
  return true;
}

/// Minimum-cost one-to-one assignment of a 3x3 cost matrix by enumerating permutations;
/// entries at or above threshold are forbidden, rows may stay unassigned.
inline std::array<int, 3> assignment3(const std::array<std::array<double, 3>, 3>& cost, double threshold) {
  std::array<int, 3> best{-1, -1, -1};
  double best_cost = std::numeric_limits<double>::infinity();
  int best_count = -1;
  // Each row picks a column or -1; columns are used at most once.
  for (int a = -1; a < 3; ++a) {
    for (int b = -1; b < 3; ++b) {
      for (int c = -1; c < 3; ++c) {
        const std::array<int, 3> pick{a, b, c};
        bool ok = true;
        double total = 0.0;
        int count = 0;
        for (int r = 0; r < 3 && ok; ++r) {
          if (pick[r] < 0) continue;
          for (int q = 0; q < r; ++q) ok = ok && pick[q] != pick[r];
          ok = ok && cost[r][pick[r]] < threshold;
          total += cost[r][pick[r]];
          ++count;
        }
        if (!ok) continue;
        if (count > best_count || (count == best_count && total < best_cost)) {
          best = pick;
          best_cost = total;
          best_count = count;
        }
      }
    }
  }
  return best;
}

/// Random points on a lattice of pitch 0.25; distance ties are common.
inline std::vector<Point2> lattice_points(Rng& rng, std::size_t n, double extent) {
  std::vector<Point2> pts;
  const auto cells = static_cast<std::uint64_t>(extent / 0.25);
  for (std::size_t i = 0; i < n; ++i) {
    pts.push_back({0.25 * static_cast<double>(rng.next() % cells), 0.25 * static_cast<double>(rng.next() % cells)});
  }
  return pts;
}

inline std::vector<Point2> uniform_points(Rng& rng, std::size_t n, double extent) {
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({rng.uniform(-extent, extent), rng.uniform(-extent, extent)});
  return pts;
}

/// Random walk polyline with turning steps.
inline Polyline random_polyline(Rng& rng, SemanticClass c, std::size_t vertices, double extent) {
  std::vector<Point2> pts{{rng.uniform(-extent, extent), rng.uniform(-extent, extent)}};
  double heading = rng.uniform(-3.14159, 3.14159);
  for (std::size_t i = 1; i < vertices; ++i) {
    heading += rng.uniform(-0.6, 0.6);
    const double len = rng.uniform(0.5, 4.0);
    pts.push_back(pts.back() + Point2{len * std::cos(heading), len * std::sin(heading)});
  }
  return Polyline(c, std::move(pts));
}

inline SemanticClass random_class(Rng& rng) { return kAllClasses[rng.next() % kAllClasses.size()]; }

/// Random multi-class frame (ego) and map (global) whose sample sets stay within 500 points per side.
struct CorrInstance {
  std::vector<Polyline> frame;
  GlobalVectorMap map;
  Pose2D theta;
};

inline CorrInstance random_corr_instance(Rng& rng) {
  CorrInstance inst;
  const std::size_t n_elems = 2 + rng.next() % 4;
  for (std::size_t e = 0; e < n_elems; ++e) {
    const auto c = random_class(rng);
    auto poly = random_polyline(rng, c, 2 + rng.next() % 6, 8.0);
    if (arc_length(poly) > 20.0) poly = Polyline(c, sub_path(poly.vertices(), 0.0, 20.0));
    auto& v = inst.map.elements[c];
    v.push_back({static_cast<std::int64_t>(v.size()), poly, {0}, {}});
    std::vector<Point2> noisy;
    for (const auto& p : poly.vertices()) noisy.push_back(p + Point2{rng.normal(0.0, 0.3), rng.normal(0.0, 0.3)});
    inst.frame.push_back(Polyline(c, std::move(noisy)));
  }
  inst.theta = make_pose(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), deg2rad(rng.uniform(-5.0, 5.0)));
  // The frame is expressed in the ego frame of theta.
  const Pose2D to_ego = pose_inverse(inst.theta);
  for (auto& p : inst.frame) p = pose_apply(to_ego, p);
  inst.theta = pose_compose(inst.theta, make_pose(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), deg2rad(rng.uniform(-3.0, 3.0))));
  return inst;
}

/// One build_corr instance; true when the indexed search equals the exhaustive one.
inline bool check_corr_instance(Rng& rng, std::string* why = nullptr) {
  const auto inst = random_corr_instance(rng);
  localization::LocalizationConfig cfg;
  cfg.min_points = 5;
  auto sets = localization::sample_sets(inst.frame, inst.map, cfg);
  const PerClass<double> gates{{rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0)}};
  localization::ClassMask mask{{rng.bernoulli(0.8), rng.bernoulli(0.8), rng.bernoulli(0.8)}};
  const auto expected = correspondences(sets, inst.theta, gates, cfg.min_points, mask);
  const localization::PreparedSets prepared(std::move(sets), std::max(cfg.resample_step, kDefaultCell));
  const auto got = localization::build_corr(prepared, inst.theta, gates, cfg.min_points, mask);
  const bool ok = same(got, expected);
  if (!ok && why) *why = "build_corr: " + std::to_string(got.size()) + " vs oracle " + std::to_string(expected.size());
  return ok;
}

inline bool check_directed_instance(Rng& rng, std::string* why = nullptr) {
  const std::size_t n = 1 + rng.next() % 500;
  const std::size_t m = 1 + rng.next() % 500;
  const bool lattice = rng.bernoulli(0.5);
  const double extent = rng.uniform(1.0, 60.0);
  const auto src = lattice ? lattice_points(rng, n, extent) : uniform_points(rng, n, extent);
  const auto dst = lattice ? lattice_points(rng, m, extent) : uniform_points(rng, m, extent);
  const double cell = rng.uniform(0.1, 3.0);
  const double got = directed_distance(src, dst, cell);
  const double expected = directed(src, dst);
  if (got != expected && why) *why = "directed_distance: " + std::to_string(got) + " vs " + std::to_string(expected);
  return got == expected;
}

inline bool check_symmetric_instance(Rng& rng, std::string* why = nullptr) {
  const auto c = random_class(rng);
  const auto a = random_polyline(rng, c, 2 + rng.next() % 8, 10.0);
  Polyline b = rng.bernoulli(0.3) ? a : random_polyline(rng, c, 2 + rng.next() % 8, 10.0);
  const double step = rng.uniform(0.15, 0.5);
  // Keep each side within 500 samples.
  if (arc_length(a) / step > 499.0 || arc_length(b) / step > 499.0) return check_symmetric_instance(rng, why);
  const double got = symmetric_discrepancy(a, b, step);
  const double expected = symmetric(a, b, step);
  if (got != expected && why) *why = "symmetric_discrepancy: " + std::to_string(got) + " vs " + std::to_string(expected);
  return got == expected;
}

/// Relative error of the analytic NDT gradient against central differences at one random state.
/// States whose stencil moves any source point across a cell border are redrawn; the returned
/// redraw count reports how often that happened.
struct GradientCheck {
  double rel_error = 0.0;
  std::size_t redraws = 0;
};

inline GradientCheck ndt_gradient_check(Rng& rng, double h = 1e-6) {
  const baselines::NdtConfig cfg;
  GradientCheck out;
  for (;;) {
    std::vector<Point2> dst;
    const int lines = 2 + static_cast<int>(rng.next() % 3);
    for (int l = 0; l < lines; ++l) {
      const double y = rng.uniform(-6.0, 6.0);
      const double slope = rng.uniform(-0.3, 0.3);
      for (double x = -10.0; x <= 10.0; x += 0.1) dst.push_back({x, y + slope * x + rng.normal(0.0, 0.05)});
    }
    const baselines::NdtModel model(dst, cfg);
    std::vector<Point2> src;
    for (std::size_t i = 0; i < 60; ++i) {
      const auto& p = dst[rng.next() % dst.size()];
      src.push_back(p + Point2{rng.normal(0.0, 0.1), rng.normal(0.0, 0.1)});
    }
    const Pose2D pose = make_pose(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.05, 0.05));
    auto cell_of = [&](const Pose2D& t, const Point2& x) {
      const Point2 p = pose_apply(t, x);
      return std::pair{std::floor(p.x / cfg.grid), std::floor(p.y / cfg.grid)};
    };
    std::array<Pose2D, 6> stencil;
    for (int k = 0; k < 3; ++k) {
      std::array<double, 3> plus{pose.tx, pose.ty, pose.phi};
      std::array<double, 3> minus = plus;
      plus[k] += h;
      minus[k] -= h;
      stencil[2 * k] = {plus[0], plus[1], plus[2]};
      stencil[2 * k + 1] = {minus[0], minus[1], minus[2]};
    }
    bool smooth = true;
    for (const auto& x : src) {
      for (const auto& t : stencil) smooth = smooth && cell_of(t, x) == cell_of(pose, x);
    }
    if (!smooth) {
      ++out.redraws;
      continue;
    }
    const auto analytic = model.evaluate(src, pose).gradient;
    Eigen::Vector3d numeric;
    for (int k = 0; k < 3; ++k) {
      numeric[k] = (model.evaluate(src, stencil[2 * k], false).score - model.evaluate(src, stencil[2 * k + 1], false).score) /
                   (2.0 * h);
    }
    out.rel_error = (analytic - numeric).norm() / std::max(numeric.norm(), 1e-12);
    return out;
  }
}

}  // namespace oracle
