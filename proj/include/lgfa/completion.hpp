#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "lgfa/error.hpp"
#include "lgfa/geom.hpp"
#include "lgfa/json_fields.hpp"
#include "lgfa/map_model.hpp"
#include "lgfa/pose.hpp"

namespace lgfa::completion {

struct CompletionConfig {
  double buffer = 0.75;
  double eta = 2.0;
  double tangent_tol_deg = 20.0;
  double step = 0.2;

  void validate() const {
    for (double v : {buffer, eta, tangent_tol_deg, step}) {
      if (!(v > 0.0) || !std::isfinite(v)) throw SchemaError("completion config: values must be positive");
    }
  }
};

inline void to_json(nlohmann::json& j, const CompletionConfig& c) {
  j = {{"buffer", c.buffer}, {"eta", c.eta}, {"tangent_tol", c.tangent_tol_deg}, {"step", c.step}};
}

inline void from_json(const nlohmann::json& j, CompletionConfig& c) {
  json_fields::Reader r(j, "completion");
  r.read("buffer", c.buffer);
  r.read("eta", c.eta);
  r.read("tangent_tol", c.tangent_tol_deg);
  r.read("step", c.step);
  r.finish();
  c.validate();
}

struct CoverageInterval {
  std::int64_t global_id = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  bool covered = false;

  double length() const { return end_s - start_s; }
  friend bool operator==(const CoverageInterval&, const CoverageInterval&) = default;
};

/// Arc-length stations of the samples produced by resample().
inline std::vector<double> sample_stations(double total, double step) {
  std::vector<double> s;
  const double eps = 1e-9 * std::max(1.0, total);
  for (std::size_t k = 0;; ++k) {
    const double v = static_cast<double>(k) * step;
    if (k > 0 && v >= total - eps) break;
    s.push_back(v);
  }
  s.push_back(total);
  return s;
}

inline std::vector<Segment2> segments_of(std::span<const Polyline> polys, SemanticClass cls) {
  std::vector<Segment2> segs;
  for (const auto& p : polys) {
    if (p.cls() == cls) append_segments(p.vertices(), cls, segs);
  }
  return segs;
}

/// Covered / uncovered intervals partitioning [0, L] of elem. Interval borders sit midway
/// between samples whose flags differ.
inline std::vector<CoverageInterval> coverage(std::int64_t global_id, const Polyline& elem,
                                              std::span<const Segment2> segs, const CompletionConfig& cfg) {
  const auto pts = elem.vertices();
  const auto cum = cumulative_lengths(pts);
  const double total = cum.back();
  const auto stations = sample_stations(total, cfg.step);
  const auto index = make_segment_index(segs, std::max(cfg.step, kDefaultCell));
  std::vector<bool> flags;
  flags.reserve(stations.size());
  for (double s : stations) {
    const Point2 p = point_at(pts, cum, s);
    const auto hit = index.nearest(p, [&](std::size_t j) { return point_to_segment_distance(p, segs[j]); }, cfg.buffer);
    flags.push_back(hit.has_value());
  }
  std::vector<CoverageInterval> out;
  double start = 0.0;
  for (std::size_t k = 1; k <= flags.size(); ++k) {
    if (k == flags.size() || flags[k] != flags[k - 1]) {
      const double end = k == flags.size() ? total : 0.5 * (stations[k - 1] + stations[k]);
      out.push_back({global_id, start, end, flags[k - 1]});
      start = end;
    }
  }
  return out;
}

inline std::vector<CoverageInterval> coverage(const GlobalPolyline& elem, std::span<const Polyline> aligned,
                                              const CompletionConfig& cfg) {
  const auto segs = segments_of(aligned, elem.geometry.cls());
  return coverage(elem.global_id, elem.geometry, segs, cfg);
}

inline double covered_length(std::span<const CoverageInterval> intervals) {
  double sum = 0.0;
  for (const auto& iv : intervals) sum += iv.covered ? iv.length() : 0.0;
  return sum;
}

namespace detail {

struct Piece {
  std::vector<Point2> pts;
  RunSource src = RunSource::Observed;
  double s_start = 0.0;  // station of the first vertex along the element
};

struct Oriented {
  std::vector<Point2> pts;
  double s_start = 0.0;
  double s_end = 0.0;
};

inline std::int64_t owner_of(const Polyline& poly, std::span<const GlobalPolyline> elems, const CompletionConfig& cfg) {
  std::map<std::int64_t, std::size_t> votes;
  const auto samples = resample(poly, cfg.step);
  for (const auto& p : samples) {
    double best = std::numeric_limits<double>::infinity();
    std::int64_t best_gid = -1;
    for (const auto& e : elems) {
      const auto cum = cumulative_lengths(e.geometry.vertices());
      const double d = project(e.geometry.vertices(), cum, p).distance;
      if (d < best || (d == best && e.global_id < best_gid)) {
        best = d;
        best_gid = e.global_id;
      }
    }
    if (best <= cfg.buffer) ++votes[best_gid];
  }
  std::int64_t owner = -1;
  std::size_t most = 0;
  for (const auto& [gid, n] : votes) {
    if (n > most) {
      most = n;
      owner = gid;
    }
  }
  return owner;
}

inline Oriented orient(const Polyline& poly, std::span<const Point2> elem, std::span<const double> cum) {
  Oriented o{{poly.vertices().begin(), poly.vertices().end()}, 0.0, 0.0};
  o.s_start = project(elem, cum, o.pts.front()).s;
  o.s_end = project(elem, cum, o.pts.back()).s;
  if (o.s_start > o.s_end) {
    std::reverse(o.pts.begin(), o.pts.end());
    std::swap(o.s_start, o.s_end);
  }
  return o;
}

// Direction of travel along the element at the end (at_end) or start of a path.
inline Point2 forward_tangent(std::span<const Point2> pts, bool at_end) {
  const Point2 t = terminal_tangent(pts, at_end);
  return at_end ? t : Point2{-t.x, -t.y};
}

inline void append_piece(std::vector<Point2>& chain, std::vector<SourceRun>& runs, const Piece& piece) {
  std::size_t begin = chain.empty() ? 0 : chain.size() - 1;
  std::size_t first = 0;
  if (!chain.empty()) first = 1;  // shared junction vertex
  for (std::size_t i = first; i < piece.pts.size(); ++i) chain.push_back(piece.pts[i]);
  runs.push_back({piece.src, begin, chain.size() - 1});
}

}  // namespace detail

/// Applies pose to frame polylines and fills the uncovered stretches of every map element:
/// short interior gaps get straight bridges, long and terminal gaps get the element's own
/// geometry. Pieces meeting at a common vertex are stitched into one polyline.
inline std::vector<CompletedElement> complete(const GlobalVectorMap& map, std::span<const Polyline> frame_polys,
                                              const Pose2D& pose, const CompletionConfig& cfg) {
  std::vector<Polyline> aligned;
  aligned.reserve(frame_polys.size());
  for (const auto& p : frame_polys) aligned.push_back(pose_apply(pose, p));

  std::vector<CompletedElement> out;
  for (auto c : kAllClasses) {
    const auto& elems = map.elements[c];
    std::map<std::int64_t, std::vector<const Polyline*>> owned;
    for (const auto& p : aligned) {
      if (p.cls() != c) continue;
      const auto gid = detail::owner_of(p, elems, cfg);
      if (gid < 0) {
        out.push_back({-1, p, {{RunSource::Observed, 0, p.size() - 1}}});
      } else {
        owned[gid].push_back(&p);
      }
    }
    const auto segs = segments_of(aligned, c);
    for (const auto& e : elems) {
      const auto ev = e.geometry.vertices();
      const auto cum = cumulative_lengths(ev);
      const auto intervals = coverage(e.global_id, e.geometry, segs, cfg);

      std::vector<detail::Oriented> pieces;
      for (const auto* p : owned[e.global_id]) pieces.push_back(detail::orient(*p, ev, cum));
      std::sort(pieces.begin(), pieces.end(), [](const auto& a, const auto& b) { return a.s_start < b.s_start; });

      std::vector<detail::Piece> items;
      for (const auto& p : pieces) items.push_back({p.pts, RunSource::Observed, p.s_start});

      // Consecutive pieces separated by a short gap that the buffer already covers.
      for (std::size_t j = 1; j < pieces.size(); ++j) {
        const auto& p = pieces[j - 1];
        const auto& q = pieces[j];
        if (q.s_start <= p.s_end || q.s_start - p.s_end >= cfg.eta) continue;
        const bool open = std::any_of(intervals.begin(), intervals.end(), [&](const CoverageInterval& iv) {
          return !iv.covered && iv.end_s > p.s_end && iv.start_s < q.s_start;
        });
        if (!open && distance(p.pts.back(), q.pts.front()) > kVertexSeparation) {
          items.push_back({{p.pts.back(), q.pts.front()}, RunSource::Bridge, p.s_end});
        }
      }

      const double reach = cfg.buffer + cfg.step;
      auto before = [&](double s0) -> std::optional<Point2> {
        std::optional<Point2> best;
        double gap = std::numeric_limits<double>::infinity();
        for (const auto& p : pieces) {
          const double d = std::abs(p.s_end - s0);
          if (d < gap && distance(p.pts.back(), point_at(ev, cum, s0)) <= reach) {
            gap = d;
            best = p.pts.back();
          }
        }
        return best;
      };
      auto after = [&](double s1) -> std::optional<Point2> {
        std::optional<Point2> best;
        double gap = std::numeric_limits<double>::infinity();
        for (const auto& p : pieces) {
          const double d = std::abs(p.s_start - s1);
          if (d < gap && distance(p.pts.front(), point_at(ev, cum, s1)) <= reach) {
            gap = d;
            best = p.pts.front();
          }
        }
        return best;
      };
      auto tangent_at_piece_end = [&](Point2 endpoint, bool piece_end) {
        for (const auto& p : pieces) {
          if (piece_end && p.pts.back() == endpoint) return detail::forward_tangent(p.pts, true);
          if (!piece_end && p.pts.front() == endpoint) return detail::forward_tangent(p.pts, false);
        }
        return Point2{1.0, 0.0};
      };

      for (std::size_t i = 0; i < intervals.size(); ++i) {
        const auto& iv = intervals[i];
        if (iv.covered) continue;
        const bool interior = i > 0 && i + 1 < intervals.size();
        if (interior && iv.length() < cfg.eta) {
          const Point2 a = before(iv.start_s).value_or(point_at(ev, cum, iv.start_s));
          const Point2 b = after(iv.end_s).value_or(point_at(ev, cum, iv.end_s));
          if (distance(a, b) > kVertexSeparation) items.push_back({{a, b}, RunSource::Bridge, iv.start_s});
          continue;
        }
        auto splice = sub_path(ev, iv.start_s, iv.end_s);
        if (i > 0) {
          if (const auto a = before(iv.start_s); a && distance(*a, splice.front()) <= cfg.buffer) {
            const double mismatch =
                angle_between_deg(tangent_at_piece_end(*a, true), detail::forward_tangent(splice, false));
            if (mismatch <= cfg.tangent_tol_deg) splice.front() = *a;
          }
        }
        if (i + 1 < intervals.size()) {
          if (const auto b = after(iv.end_s); b && distance(*b, splice.back()) <= cfg.buffer) {
            const double mismatch =
                angle_between_deg(tangent_at_piece_end(*b, false), detail::forward_tangent(splice, true));
            if (mismatch <= cfg.tangent_tol_deg) splice.back() = *b;
          }
        }
        if (auto poly = try_polyline(c, splice)) items.push_back({poly->vertices(), RunSource::Splice, iv.start_s});
      }

      std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.s_start < b.s_start; });
      std::vector<Point2> chain;
      std::vector<SourceRun> runs;
      auto flush = [&]() {
        if (chain.size() >= 2) out.push_back({e.global_id, Polyline(c, chain), runs});
        chain.clear();
        runs.clear();
      };
      for (const auto& item : items) {
        if (!chain.empty() && distance(chain.back(), item.pts.front()) > kVertexSeparation) flush();
        detail::append_piece(chain, runs, item);
      }
      flush();
    }
  }
  return out;
}

inline std::vector<Polyline> geometries(std::span<const CompletedElement> elems) {
  std::vector<Polyline> out;
  out.reserve(elems.size());
  for (const auto& e : elems) out.push_back(e.geometry);
  return out;
}

/// Percentage of reference arc length lying within buffer of same-class output geometry.
/// Classes without reference geometry yield nullopt.
inline PerClass<std::optional<double>> completion_rate(std::span<const Polyline> output,
                                                       std::span<const Polyline> reference,
                                                       const CompletionConfig& cfg) {
  PerClass<std::optional<double>> rate;
  for (auto c : kAllClasses) {
    const auto segs = segments_of(output, c);
    double covered = 0.0;
    double total = 0.0;
    for (const auto& r : reference) {
      if (r.cls() != c) continue;
      const auto iv = coverage(0, r, segs, cfg);
      covered += covered_length(iv);
      total += arc_length(r);
    }
    if (total > 0.0) rate[c] = 100.0 * covered / total;
  }
  return rate;
}

}  // namespace lgfa::completion
