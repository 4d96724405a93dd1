#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lgfa/error.hpp"

namespace lgfa {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  friend Point2 operator*(Point2 p, double s) { return {s * p.x, s * p.y}; }
  friend bool operator==(Point2 a, Point2 b) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 p) { return std::sqrt(p.x * p.x + p.y * p.y); }

// The one Euclidean distance used by every nearest-neighbour path (index and oracle alike).
inline double distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

inline bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

inline Point2 lerp(Point2 a, Point2 b, double t) { return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}; }

enum class SemanticClass : std::uint8_t { PedCrossing = 0, LaneDivider = 1, RoadBoundary = 2 };

inline constexpr std::array<SemanticClass, 3> kAllClasses = {
    SemanticClass::PedCrossing, SemanticClass::LaneDivider, SemanticClass::RoadBoundary};
inline constexpr std::size_t kClassCount = kAllClasses.size();

inline constexpr std::size_t class_index(SemanticClass c) { return static_cast<std::size_t>(c); }

inline std::string_view class_name(SemanticClass c) {
  switch (c) {
    case SemanticClass::PedCrossing: return "ped_crossing";
    case SemanticClass::LaneDivider: return "divider";
    case SemanticClass::RoadBoundary: return "boundary";
  }
  return "unknown";
}

inline std::optional<SemanticClass> parse_class(std::string_view name) {
  for (auto c : kAllClasses) {
    if (class_name(c) == name) return c;
  }
  return std::nullopt;
}

/// Per-class storage indexed by SemanticClass.
template <class T>
struct PerClass {
  std::array<T, kClassCount> values{};

  T& operator[](SemanticClass c) { return values[class_index(c)]; }
  const T& operator[](SemanticClass c) const { return values[class_index(c)]; }
  friend bool operator==(const PerClass&, const PerClass&) = default;
};

inline constexpr double kVertexSeparation = 1e-9;

/// Ordered vertex sequence with a semantic class. Consecutive duplicates (closer than
/// kVertexSeparation) are dropped at construction; fewer than two remaining vertices or a
/// non-finite coordinate is a GeometryError.
class Polyline {
 public:
  Polyline(SemanticClass cls, std::vector<Point2> vertices) : cls_(cls) {
    for (const auto& p : vertices) {
      if (!is_finite(p)) throw GeometryError("polyline has a non-finite coordinate");
    }
    vertices_.reserve(vertices.size());
    for (const auto& p : vertices) {
      if (vertices_.empty() || distance(vertices_.back(), p) > kVertexSeparation) vertices_.push_back(p);
    }
    if (vertices_.size() < 2) throw GeometryError("polyline needs at least 2 distinct vertices");
  }

  SemanticClass cls() const { return cls_; }
  const std::vector<Point2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  Point2 front() const { return vertices_.front(); }
  Point2 back() const { return vertices_.back(); }
  bool closed() const { return vertices_.size() > 2 && distance(vertices_.front(), vertices_.back()) <= kVertexSeparation; }

  friend bool operator==(const Polyline&, const Polyline&) = default;

 private:
  SemanticClass cls_;
  std::vector<Point2> vertices_;
};

inline std::optional<Polyline> try_polyline(SemanticClass cls, std::vector<Point2> vertices) {
  try {
    return Polyline(cls, std::move(vertices));
  } catch (const GeometryError&) {
    return std::nullopt;
  }
}

struct Segment2 {
  Point2 a;
  Point2 b;
  SemanticClass cls = SemanticClass::LaneDivider;
};

inline double arc_length(std::span<const Point2> pts) {
  double total = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) total += distance(pts[i - 1], pts[i]);
  return total;
}

inline double arc_length(const Polyline& poly) { return arc_length(poly.vertices()); }

inline std::vector<double> cumulative_lengths(std::span<const Point2> pts) {
  std::vector<double> s(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) s[i] = s[i - 1] + distance(pts[i - 1], pts[i]);
  return s;
}

/// Closest point of the closed segment [a, b] to p, as an interpolation parameter in [0, 1].
inline double segment_param(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 <= 0.0) return 0.0;
  return std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
}

inline Point2 closest_on_segment(Point2 p, Point2 a, Point2 b) { return lerp(a, b, segment_param(p, a, b)); }

inline double point_to_segment_distance(Point2 p, Point2 a, Point2 b) {
  return distance(p, closest_on_segment(p, a, b));
}

inline double point_to_segment_distance(Point2 p, const Segment2& s) { return point_to_segment_distance(p, s.a, s.b); }

/// Point at arc length s (clamped to [0, L]).
inline Point2 point_at(std::span<const Point2> pts, std::span<const double> cum, double s) {
  if (s <= 0.0) return pts.front();
  if (s >= cum.back()) return pts.back();
  const auto it = std::upper_bound(cum.begin(), cum.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - cum.begin());
  const double seg = cum[i] - cum[i - 1];
  const double t = seg > 0.0 ? (s - cum[i - 1]) / seg : 0.0;
  return lerp(pts[i - 1], pts[i], t);
}

/// Samples at arc-length positions 0, step, 2 step, ... strictly inside the polyline, plus the
/// terminal vertex.
inline std::vector<Point2> resample(std::span<const Point2> pts, double step) {
  std::vector<Point2> out;
  if (pts.size() < 2) return {pts.begin(), pts.end()};
  const auto cum = cumulative_lengths(pts);
  const double total = cum.back();
  const double eps = 1e-9 * std::max(1.0, total);
  std::size_t seg = 1;
  for (std::size_t k = 0;; ++k) {
    const double s = static_cast<double>(k) * step;
    if (k > 0 && s >= total - eps) break;
    while (seg + 1 < pts.size() && cum[seg] < s) ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double t = len > 0.0 ? std::clamp((s - cum[seg - 1]) / len, 0.0, 1.0) : 0.0;
    out.push_back(lerp(pts[seg - 1], pts[seg], t));
  }
  out.push_back(pts.back());
  return out;
}

inline std::vector<Point2> resample(const Polyline& poly, double step) { return resample(poly.vertices(), step); }

/// Splits every segment into equal pieces no longer than step; original vertices are kept.
inline std::vector<Point2> densify(std::span<const Point2> pts, double step) {
  std::vector<Point2> out;
  if (pts.empty()) return out;
  out.push_back(pts.front());
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double len = distance(pts[i - 1], pts[i]);
    const auto pieces = static_cast<std::size_t>(std::ceil(len / step - 1e-9));
    for (std::size_t k = 1; k < pieces; ++k) {
      out.push_back(lerp(pts[i - 1], pts[i], static_cast<double>(k) / static_cast<double>(pieces)));
    }
    out.push_back(pts[i]);
  }
  return out;
}

/// Polyline sub-path between arc lengths s0 < s1, keeping interior vertices.
inline std::vector<Point2> sub_path(std::span<const Point2> pts, double s0, double s1) {
  const auto cum = cumulative_lengths(pts);
  s0 = std::clamp(s0, 0.0, cum.back());
  s1 = std::clamp(s1, 0.0, cum.back());
  std::vector<Point2> out{point_at(pts, cum, s0)};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (cum[i] > s0 && cum[i] < s1) out.push_back(pts[i]);
  }
  out.push_back(point_at(pts, cum, s1));
  return out;
}

struct Projection {
  double s = 0.0;         // arc length of the foot point
  double distance = 0.0;  // distance from the query to the foot point
  Point2 foot;
  bool clamped_start = false;
  bool clamped_end = false;
};

/// Closest point of a polyline to p (first minimum in vertex order).
inline Projection project(std::span<const Point2> pts, std::span<const double> cum, Point2 p) {
  Projection best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double t = segment_param(p, pts[i - 1], pts[i]);
    const Point2 foot = lerp(pts[i - 1], pts[i], t);
    const double d = distance(p, foot);
    if (d < best.distance) {
      best.distance = d;
      best.foot = foot;
      best.s = cum[i - 1] + t * (cum[i] - cum[i - 1]);
    }
  }
  best.clamped_start = best.s <= 0.0;
  best.clamped_end = best.s >= cum.back();
  return best;
}

inline constexpr double kTerminalReach = 1.0;

/// Unit direction of the terminal stretch of a polyline, oriented outward from the chosen end.
/// The stretch spans min(reach, L / 2) of arc length.
inline Point2 terminal_tangent(std::span<const Point2> pts, bool at_end, double reach = kTerminalReach) {
  const auto cum = cumulative_lengths(pts);
  const double span = std::min(reach, 0.5 * cum.back());
  Point2 from;
  Point2 to;
  if (at_end) {
    from = point_at(pts, cum, cum.back() - span);
    to = pts.back();
  } else {
    from = point_at(pts, cum, span);
    to = pts.front();
  }
  const Point2 d = to - from;
  const double n = norm(d);
  return n > 0.0 ? (1.0 / n) * d : Point2{1.0, 0.0};
}

/// Angle between two vectors in degrees, in [0, 180].
inline double angle_between_deg(Point2 a, Point2 b) {
  return std::abs(std::atan2(cross(a, b), dot(a, b))) * 180.0 / std::numbers::pi;
}

/// Uniform grid over item bounding boxes. Queries return the exact nearest item under a caller
/// distance, ties broken by lower item index, so results equal an exhaustive scan.
class GridIndex {
 public:
  struct Hit {
    std::size_t index = 0;
    double distance = 0.0;
  };

  GridIndex() = default;

  /// box_of(i) returns {min, max} corners of item i.
  template <class BoxFn>
  GridIndex(std::size_t count, double cell, BoxFn box_of) : count_(count) {
    if (count == 0) return;
    Point2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    Point2 hi{-lo.x, -lo.y};
    std::vector<std::array<Point2, 2>> boxes(count);
    for (std::size_t i = 0; i < count; ++i) {
      boxes[i] = box_of(i);
      lo = {std::min(lo.x, boxes[i][0].x), std::min(lo.y, boxes[i][0].y)};
      hi = {std::max(hi.x, boxes[i][1].x), std::max(hi.y, boxes[i][1].y)};
    }
    // Keep the table proportional to the item count for widely spread inputs.
    const double area = std::max(hi.x - lo.x, cell) * std::max(hi.y - lo.y, cell);
    cell_ = std::max(cell, std::sqrt(area / (4.0 * static_cast<double>(count) + 64.0)));
    origin_ = lo;
    nx_ = static_cast<std::int64_t>(std::floor((hi.x - lo.x) / cell_)) + 1;
    ny_ = static_cast<std::int64_t>(std::floor((hi.y - lo.y) / cell_)) + 1;
    std::vector<std::uint32_t> counts(static_cast<std::size_t>(nx_ * ny_) + 1, 0);
    auto for_cells = [&](std::size_t i, auto&& fn) {
      const auto [x0, y0] = cell_of(boxes[i][0]);
      const auto [x1, y1] = cell_of(boxes[i][1]);
      for (auto cy = y0; cy <= y1; ++cy) {
        for (auto cx = x0; cx <= x1; ++cx) fn(static_cast<std::size_t>(cy * nx_ + cx));
      }
    };
    for (std::size_t i = 0; i < count; ++i) for_cells(i, [&](std::size_t c) { ++counts[c + 1]; });
    for (std::size_t c = 1; c < counts.size(); ++c) counts[c] += counts[c - 1];
    offsets_ = counts;
    items_.resize(counts.back());
    std::vector<std::uint32_t> fill(counts.begin(), counts.end() - 1);
    for (std::size_t i = 0; i < count; ++i) {
      for_cells(i, [&](std::size_t c) { items_[fill[c]++] = static_cast<std::uint32_t>(i); });
    }
  }

  std::size_t size() const { return count_; }

  /// Nearest item whose distance is <= max_radius, if any.
  template <class DistFn>
  std::optional<Hit> nearest(Point2 q, DistFn dist,
                             double max_radius = std::numeric_limits<double>::infinity()) const {
    if (count_ == 0) return std::nullopt;
    const std::int64_t qx = clamp_cell(std::floor((q.x - origin_.x) / cell_));
    const std::int64_t qy = clamp_cell(std::floor((q.y - origin_.y) / cell_));
    const std::int64_t dx = qx < 0 ? -qx : (qx >= nx_ ? qx - nx_ + 1 : 0);
    const std::int64_t dy = qy < 0 ? -qy : (qy >= ny_ ? qy - ny_ + 1 : 0);
    const std::int64_t r_first = std::max(dx, dy);
    const std::int64_t r_last = std::max({std::abs(qx), std::abs(qx - nx_ + 1), std::abs(qy), std::abs(qy - ny_ + 1)});

    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    auto visit = [&](std::int64_t cx, std::int64_t cy) {
      if (cx < 0 || cy < 0 || cx >= nx_ || cy >= ny_) return;
      const auto c = static_cast<std::size_t>(cy * nx_ + cx);
      for (auto k = offsets_[c]; k < offsets_[c + 1]; ++k) {
        const std::size_t i = items_[k];
        const double d = dist(i);
        if (d < best || (d == best && i < best_i)) {
          best = d;
          best_i = i;
        }
      }
    };
    for (std::int64_t r = r_first; r <= r_last; ++r) {
      // Everything outside the visited block lies farther than (r - 1) cells from q.
      if (r > r_first && best < static_cast<double>(r - 1) * cell_) break;
      if (static_cast<double>(r - 1) * cell_ > max_radius) break;
      const std::int64_t x0 = std::max<std::int64_t>(qx - r, 0), x1 = std::min<std::int64_t>(qx + r, nx_ - 1);
      const std::int64_t y0 = std::max<std::int64_t>(qy - r, 0), y1 = std::min<std::int64_t>(qy + r, ny_ - 1);
      if (r == 0) {
        visit(qx, qy);
      } else {
        if (qy - r >= 0) for (auto cx = x0; cx <= x1; ++cx) visit(cx, qy - r);
        if (qy + r < ny_) for (auto cx = x0; cx <= x1; ++cx) visit(cx, qy + r);
        if (qx - r >= 0) for (auto cy = std::max(y0, qy - r + 1); cy <= std::min(y1, qy + r - 1); ++cy) visit(qx - r, cy);
        if (qx + r < nx_) for (auto cy = std::max(y0, qy - r + 1); cy <= std::min(y1, qy + r - 1); ++cy) visit(qx + r, cy);
      }
    }
    if (!(best <= max_radius)) return std::nullopt;
    return Hit{best_i, best};
  }

 private:
  static std::int64_t clamp_cell(double v) {
    constexpr double lim = 1e12;
    return static_cast<std::int64_t>(std::clamp(v, -lim, lim));
  }

  std::array<std::int64_t, 2> cell_of(Point2 p) const {
    const auto cx = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((p.x - origin_.x) / cell_)), 0, nx_ - 1);
    const auto cy = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((p.y - origin_.y) / cell_)), 0, ny_ - 1);
    return {cx, cy};
  }

  std::size_t count_ = 0;
  double cell_ = 1.0;
  Point2 origin_;
  std::int64_t nx_ = 0;
  std::int64_t ny_ = 0;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> items_;
};

inline GridIndex make_point_index(std::span<const Point2> pts, double cell) {
  return GridIndex(pts.size(), cell, [&](std::size_t i) { return std::array<Point2, 2>{pts[i], pts[i]}; });
}

inline GridIndex make_segment_index(std::span<const Segment2> segs, double cell) {
  return GridIndex(segs.size(), cell, [&](std::size_t i) {
    const auto& s = segs[i];
    return std::array<Point2, 2>{Point2{std::min(s.a.x, s.b.x), std::min(s.a.y, s.b.y)},
                                 Point2{std::max(s.a.x, s.b.x), std::max(s.a.y, s.b.y)}};
  });
}

inline constexpr double kDefaultCell = 0.5;

/// Mean over src of the nearest-neighbour distance into dst.
inline double directed_distance(std::span<const Point2> src, std::span<const Point2> dst, double cell = kDefaultCell) {
  if (src.empty() || dst.empty()) throw EmptyInput("directed_distance needs non-empty point sets");
  const auto index = make_point_index(dst, cell);
  double sum = 0.0;
  for (const auto& p : src) {
    sum += index.nearest(p, [&](std::size_t j) { return distance(p, dst[j]); })->distance;
  }
  return sum / static_cast<double>(src.size());
}

inline double symmetric_discrepancy(const Polyline& a, const Polyline& b, double step) {
  if (a.cls() != b.cls()) throw ClassMismatch("symmetric_discrepancy across classes");
  const auto sa = resample(a, step);
  const auto sb = resample(b, step);
  const double cell = std::max(step, kDefaultCell);
  return 0.5 * (directed_distance(sa, sb, cell) + directed_distance(sb, sa, cell));
}

/// Douglas-Peucker. Endpoints are kept exactly; ties pick the first farthest vertex.
inline std::vector<Point2> simplify(std::span<const Point2> pts, double tolerance) {
  if (pts.size() <= 2) return {pts.begin(), pts.end()};
  std::vector<char> keep(pts.size(), 0);
  keep.front() = keep.back() = 1;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, pts.size() - 1}};
  while (!stack.empty()) {
    const auto [lo, hi] = stack.back();
    stack.pop_back();
    double worst = -1.0;
    std::size_t worst_i = lo;
    for (std::size_t i = lo + 1; i < hi; ++i) {
      const double d = point_to_segment_distance(pts[i], pts[lo], pts[hi]);
      if (d > worst) {
        worst = d;
        worst_i = i;
      }
    }
    if (worst > tolerance) {
      keep[worst_i] = 1;
      stack.emplace_back(worst_i, hi);
      stack.emplace_back(lo, worst_i);
    }
  }
  std::vector<Point2> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (keep[i]) out.push_back(pts[i]);
  }
  return out;
}

inline Polyline simplify(const Polyline& poly, double tolerance) {
  return Polyline(poly.cls(), simplify(poly.vertices(), tolerance));
}

/// Segments between adjacent points; degenerate ones are dropped.
inline void append_segments(std::span<const Point2> pts, SemanticClass cls, std::vector<Segment2>& out) {
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (distance(pts[i - 1], pts[i]) > 0.0) out.push_back({pts[i - 1], pts[i], cls});
  }
}

}  // namespace lgfa
