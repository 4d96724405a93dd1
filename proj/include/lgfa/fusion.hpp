#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "lgfa/error.hpp"
#include "lgfa/geom.hpp"
#include "lgfa/json_fields.hpp"
#include "lgfa/map_model.hpp"
#include "lgfa/pose.hpp"

namespace lgfa::fusion {

struct FusionConfig {
  double resample_step = 0.2;
  double assoc_threshold = 1.0;
  double dup_tolerance = 0.15;
  double snap_dist = 0.5;
  double snap_angle_deg = 15.0;
  double min_fragment_len = 1.0;
  double simplify_tol = 0.05;
  bool local_averaging = false;

  void validate() const {
    for (double v : {resample_step, assoc_threshold, dup_tolerance, snap_dist, min_fragment_len, simplify_tol}) {
      if (!(v > 0.0) || !std::isfinite(v)) throw SchemaError("fusion config: thresholds must be positive");
    }
    if (!(snap_angle_deg > 0.0 && snap_angle_deg < 90.0)) throw SchemaError("fusion config: snap_angle must be in (0, 90)");
  }
};

inline void to_json(nlohmann::json& j, const FusionConfig& c) {
  j = {{"resample_step", c.resample_step},       {"assoc_threshold", c.assoc_threshold},
       {"dup_tolerance", c.dup_tolerance},       {"snap_dist", c.snap_dist},
       {"snap_angle", c.snap_angle_deg},         {"min_fragment_len", c.min_fragment_len},
       {"simplify_tol", c.simplify_tol},         {"local_averaging", c.local_averaging}};
}

inline void from_json(const nlohmann::json& j, FusionConfig& c) {
  json_fields::Reader r(j, "fusion");
  r.read("resample_step", c.resample_step);
  r.read("assoc_threshold", c.assoc_threshold);
  r.read("dup_tolerance", c.dup_tolerance);
  r.read("snap_dist", c.snap_dist);
  r.read("snap_angle", c.snap_angle_deg);
  r.read("min_fragment_len", c.min_fragment_len);
  r.read("simplify_tol", c.simplify_tol);
  r.read("local_averaging", c.local_averaging);
  r.finish();
  c.validate();
}

/// Frame polylines mapped into the global frame by the ego pose reference.
inline std::vector<FramePolyline> transform_frame(const FrameObservation& obs) {
  std::vector<FramePolyline> out;
  out.reserve(obs.polylines.size());
  for (const auto& p : obs.polylines) out.push_back({pose_apply(obs.ego_pose_ref, p.geometry), p.persistent_id});
  return out;
}

struct AssociationResult {
  std::vector<std::optional<std::int64_t>> match;  // global_id per frame polyline
  std::vector<double> match_cost;                  // symmetric discrepancy, NaN when unmatched
  std::vector<bool> by_id;
  // Unmatched polyline that shares an unseen persistent id with an earlier polyline of this
  // frame: index of that earlier polyline, so both end up in one new element.
  std::vector<std::optional<std::size_t>> follows;
};

namespace detail {

inline GlobalPolyline* find_gid(std::vector<GlobalPolyline>& elems, std::int64_t gid) {
  for (auto& e : elems) {
    if (e.global_id == gid) return &e;
  }
  return nullptr;
}

inline double bbox_gap(const Polyline& a, const Polyline& b) {
  auto box = [](const Polyline& p) {
    Point2 lo = p.front(), hi = p.front();
    for (const auto& v : p.vertices()) {
      lo = {std::min(lo.x, v.x), std::min(lo.y, v.y)};
      hi = {std::max(hi.x, v.x), std::max(hi.y, v.y)};
    }
    return std::pair{lo, hi};
  };
  const auto [alo, ahi] = box(a);
  const auto [blo, bhi] = box(b);
  const double dx = std::max({0.0, blo.x - ahi.x, alo.x - bhi.x});
  const double dy = std::max({0.0, blo.y - ahi.y, alo.y - bhi.y});
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace detail

/// Persistent-id matches first, then greedy one-to-one geometric matching per class by
/// ascending symmetric discrepancy (ties: lower global id, then lower row), cost < threshold.
inline AssociationResult associate(std::span<const FramePolyline> polys, const GlobalVectorMap& map,
                                   const FusionConfig& cfg) {
  const std::size_t n = polys.size();
  AssociationResult res;
  res.match.assign(n, std::nullopt);
  res.match_cost.assign(n, std::numeric_limits<double>::quiet_NaN());
  res.by_id.assign(n, false);
  res.follows.assign(n, std::nullopt);

  for (auto c : kAllClasses) {
    const auto& elems = map.elements[c];
    std::map<std::int64_t, std::int64_t> id_owner;
    for (const auto& e : elems) {
      for (auto id : e.source_ids) id_owner.emplace(id, e.global_id);
    }
    std::vector<std::size_t> rows;
    std::map<std::int64_t, std::size_t> first_unseen;
    std::set<std::int64_t> taken_by_id;
    for (std::size_t i = 0; i < n; ++i) {
      if (polys[i].geometry.cls() != c) continue;
      const auto& id = polys[i].persistent_id;
      if (id) {
        if (const auto it = id_owner.find(*id); it != id_owner.end()) {
          res.match[i] = it->second;
          res.by_id[i] = true;
          taken_by_id.insert(it->second);
          continue;
        }
        if (const auto it = first_unseen.find(*id); it != first_unseen.end()) {
          res.follows[i] = it->second;
          continue;
        }
        first_unseen.emplace(*id, i);
      }
      rows.push_back(i);
    }

    struct Candidate {
      double cost;
      std::int64_t gid;
      std::size_t row;
    };
    std::vector<Candidate> cands;
    for (auto i : rows) {
      for (const auto& e : elems) {
        if (taken_by_id.contains(e.global_id)) continue;
        if (detail::bbox_gap(polys[i].geometry, e.geometry) >= cfg.assoc_threshold) continue;
        const double cost = symmetric_discrepancy(polys[i].geometry, e.geometry, cfg.resample_step);
        if (cost < cfg.assoc_threshold) cands.push_back({cost, e.global_id, i});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(a.cost, a.gid, a.row) < std::tie(b.cost, b.gid, b.row);
    });
    std::set<std::int64_t> used_cols;
    std::set<std::size_t> used_rows;
    for (const auto& cand : cands) {
      if (used_rows.contains(cand.row) || used_cols.contains(cand.gid)) continue;
      used_rows.insert(cand.row);
      used_cols.insert(cand.gid);
      res.match[cand.row] = cand.gid;
      res.match_cost[cand.row] = cand.cost;
    }
  }
  // Followers of an unseen id inherit the geometric decision of the first polyline with that id.
  for (std::size_t i = 0; i < n; ++i) {
    if (res.follows[i] && res.match[*res.follows[i]]) {
      res.match[i] = res.match[*res.follows[i]];
      res.follows[i].reset();
    }
  }
  // Costs for id matches, for diagnostics.
  for (std::size_t i = 0; i < n; ++i) {
    if (res.match[i] && std::isnan(res.match_cost[i])) {
      const auto& elems = map.elements[polys[i].geometry.cls()];
      for (const auto& e : elems) {
        if (e.global_id == *res.match[i]) {
          res.match_cost[i] = symmetric_discrepancy(polys[i].geometry, e.geometry, cfg.resample_step);
        }
      }
    }
  }
  return res;
}

/// Adds the non-duplicate samples of new_poly to the element and re-orders everything along the
/// element's arc length; samples overhanging an end extend it by their signed projection.
inline GlobalPolyline merge_into(const GlobalPolyline& elem, const Polyline& new_poly, std::int64_t frame_index,
                                 std::optional<std::int64_t> source_id, const FusionConfig& cfg) {
  if (elem.geometry.cls() != new_poly.cls()) throw ClassMismatch("merge_into across classes");
  const double step = cfg.resample_step;
  const auto& geom = elem.geometry.vertices();
  const auto cum = cumulative_lengths(geom);
  const double length = cum.back();

  const auto existing = resample(geom, step);
  const auto incoming = resample(new_poly, step);
  const double cell = std::max(step, kDefaultCell);
  const auto index = make_point_index(existing, cell);

  struct Sample {
    double s;
    int origin;  // 0 existing, 1 new
    Point2 p;
  };
  std::vector<Sample> samples;
  samples.reserve(existing.size() + incoming.size());
  for (std::size_t k = 0; k < existing.size(); ++k) {
    const double s = k + 1 == existing.size() ? length : std::min(static_cast<double>(k) * step, length);
    samples.push_back({s, 0, existing[k]});
  }

  const Point2 out_start = terminal_tangent(geom, false);
  const Point2 out_end = terminal_tangent(geom, true);
  for (const auto& p : incoming) {
    const auto hit = index.nearest(p, [&](std::size_t j) { return distance(p, existing[j]); });
    if (hit->distance <= cfg.dup_tolerance) continue;
    const auto proj = project(geom, cum, p);
    double s = proj.s;
    // Samples past either end along its terminal tangent count as overhang.
    const double before = dot(p - geom.front(), out_start);
    const double after = dot(p - geom.back(), out_end);
    if (proj.clamped_start || (proj.s <= kTerminalReach && before > 0.0)) s = -std::max(before, 0.0);
    if (proj.clamped_end || (proj.s >= length - kTerminalReach && after > 0.0)) s = length + std::max(after, 0.0);
    samples.push_back({s, 1, p});
  }

  if (cfg.local_averaging) {
    std::vector<Point2> all;
    all.reserve(samples.size());
    for (const auto& smp : samples) all.push_back(smp.p);
    std::vector<Point2> averaged(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      Point2 sum{0.0, 0.0};
      double count = 0.0;
      for (const auto& q : all) {
        if (distance(all[i], q) <= cfg.dup_tolerance) {
          sum = sum + q;
          count += 1.0;
        }
      }
      averaged[i] = (1.0 / count) * sum;
    }
    for (std::size_t i = 0; i < all.size(); ++i) samples[i].p = averaged[i];
  }

  std::stable_sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
    return std::tie(a.s, a.origin) < std::tie(b.s, b.origin);
  });
  std::vector<Point2> pts;
  pts.reserve(samples.size());
  for (const auto& smp : samples) pts.push_back(smp.p);

  auto rebuilt = try_polyline(elem.geometry.cls(), std::move(pts));
  if (!rebuilt) throw DegenerateMerge("merge produced fewer than 2 vertices");
  GlobalPolyline out{elem.global_id, std::move(*rebuilt), elem.support_frames, elem.source_ids};
  out.support_frames.insert(frame_index);
  if (source_id) out.source_ids.insert(*source_id);
  return out;
}

/// Drops elements shorter than min_fragment_len that only one frame supports.
inline GlobalVectorMap suppress_fragments(GlobalVectorMap map, const FusionConfig& cfg) {
  for (auto c : kAllClasses) {
    auto& elems = map.elements[c];
    std::erase_if(elems, [&](const GlobalPolyline& e) {
      return e.support_frames.size() == 1 && arc_length(e.geometry) < cfg.min_fragment_len;
    });
  }
  return map;
}

namespace detail {

inline std::vector<Point2> reversed(const std::vector<Point2>& v) { return {v.rbegin(), v.rend()}; }

}  // namespace detail

/// Joins same-class elements whose endpoints are within snap_dist and whose outward terminal
/// tangents are anti-parallel within snap_angle. Closest pair first, repeated to a fixpoint.
inline GlobalVectorMap snap_endpoints(GlobalVectorMap map, const FusionConfig& cfg) {
  for (auto c : kAllClasses) {
    auto& elems = map.elements[c];
    for (;;) {
      struct Candidate {
        double d;
        std::int64_t gid_lo;
        std::int64_t gid_hi;
        std::size_t i;
        std::size_t j;
        bool i_end;
        bool j_end;
      };
      std::optional<Candidate> best;
      for (std::size_t i = 0; i < elems.size(); ++i) {
        if (elems[i].geometry.closed()) continue;
        for (std::size_t j = i + 1; j < elems.size(); ++j) {
          if (elems[j].geometry.closed()) continue;
          const auto& a = elems[i].geometry.vertices();
          const auto& b = elems[j].geometry.vertices();
          for (bool ia : {false, true}) {
            for (bool jb : {false, true}) {
              const double d = distance(ia ? a.back() : a.front(), jb ? b.back() : b.front());
              if (d > cfg.snap_dist) continue;
              const double angle = angle_between_deg(terminal_tangent(a, ia), terminal_tangent(b, jb));
              if (180.0 - angle > cfg.snap_angle_deg) continue;
              Candidate cand{d,
                             std::min(elems[i].global_id, elems[j].global_id),
                             std::max(elems[i].global_id, elems[j].global_id),
                             i, j, ia, jb};
              if (!best || std::tie(cand.d, cand.gid_lo, cand.gid_hi) < std::tie(best->d, best->gid_lo, best->gid_hi)) {
                best = cand;
              }
            }
          }
        }
      }
      if (!best) break;
      // Survivor keeps its own direction; the other element is attached at the snapped end.
      const bool i_survives = elems[best->i].global_id < elems[best->j].global_id;
      const std::size_t keep = i_survives ? best->i : best->j;
      const std::size_t drop = i_survives ? best->j : best->i;
      const bool keep_end = i_survives ? best->i_end : best->j_end;
      const bool drop_end = i_survives ? best->j_end : best->i_end;
      const auto& kv = elems[keep].geometry.vertices();
      const auto& dv = elems[drop].geometry.vertices();
      std::vector<Point2> joined;
      if (keep_end) {
        joined = kv;
        const auto tail = drop_end ? detail::reversed(dv) : dv;
        joined.insert(joined.end(), tail.begin(), tail.end());
      } else {
        joined = drop_end ? dv : detail::reversed(dv);
        joined.insert(joined.end(), kv.begin(), kv.end());
      }
      GlobalPolyline merged{elems[keep].global_id, Polyline(c, std::move(joined)), elems[keep].support_frames,
                            elems[keep].source_ids};
      merged.support_frames.insert(elems[drop].support_frames.begin(), elems[drop].support_frames.end());
      merged.source_ids.insert(elems[drop].source_ids.begin(), elems[drop].source_ids.end());
      elems[keep] = std::move(merged);
      elems.erase(elems.begin() + static_cast<std::ptrdiff_t>(drop));
    }
  }
  return map;
}

/// Densify at the resample step, then Douglas-Peucker at simplify_tol.
inline GlobalVectorMap finalize(GlobalVectorMap map, const FusionConfig& cfg) {
  for (auto c : kAllClasses) {
    for (auto& e : map.elements[c]) {
      const auto dense = densify(e.geometry.vertices(), cfg.resample_step);
      e.geometry = Polyline(c, simplify(dense, cfg.simplify_tol));
    }
  }
  return map;
}

/// Incremental map construction over frames ordered by frame index.
class MapBuilder {
 public:
  explicit MapBuilder(FusionConfig cfg, std::string scene = {}) : cfg_(cfg) {
    cfg_.validate();
    map_.scene = std::move(scene);
    nlohmann::json j = cfg_;
    map_.config = j;
  }

  const GlobalVectorMap& map() const { return map_; }

  void add_frame(const FrameObservation& obs) {
    const auto polys = transform_frame(obs);
    const auto assoc = associate(polys, map_, cfg_);
    std::map<std::size_t, std::int64_t> created;  // frame polyline -> new gid
    for (std::size_t i = 0; i < polys.size(); ++i) {
      const auto c = polys[i].geometry.cls();
      std::optional<std::int64_t> target = assoc.match[i];
      if (!target && assoc.follows[i]) {
        if (const auto it = created.find(*assoc.follows[i]); it != created.end()) target = it->second;
      }
      if (target) {
        auto* elem = detail::find_gid(map_.elements[c], *target);
        *elem = merge_into(*elem, polys[i].geometry, obs.frame_index, polys[i].persistent_id, cfg_);
        continue;
      }
      GlobalPolyline g{next_gid_[c]++, polys[i].geometry, {obs.frame_index}, {}};
      if (polys[i].persistent_id) g.source_ids.insert(*polys[i].persistent_id);
      created[i] = g.global_id;
      map_.elements[c].push_back(std::move(g));
    }
    map_ = snap_endpoints(suppress_fragments(std::move(map_), cfg_), cfg_);
  }

  GlobalVectorMap finish() const {
    return finalize(snap_endpoints(suppress_fragments(map_, cfg_), cfg_), cfg_);
  }

 private:
  FusionConfig cfg_;
  GlobalVectorMap map_;
  PerClass<std::int64_t> next_gid_{};
};

inline GlobalVectorMap build_map(std::span<const FrameObservation> frames, const FusionConfig& cfg,
                                 std::string scene = {}) {
  MapBuilder builder(cfg, std::move(scene));
  for (const auto& f : frames) builder.add_frame(f);
  return builder.finish();
}

}  // namespace lgfa::fusion
