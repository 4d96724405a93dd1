#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lgfa/error.hpp"
#include "lgfa/map_model.hpp"

namespace lgfa::io {

using nlohmann::json;

namespace detail {

// Location of a value inside a file, used in every error message.
struct Where {
  std::string file;
  std::string path;

  Where at(const std::string& key) const { return {file, path + "." + key}; }
  Where at(std::size_t i) const { return {file, path + "[" + std::to_string(i) + "]"}; }
  std::string str() const { return file + ": " + path; }
};

inline const json& field(const json& obj, const char* key, const Where& w) {
  if (!obj.is_object()) throw SchemaError(w.str() + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(w.str() + ": missing field '" + key + "'");
  return *it;
}

inline double number(const json& v, const Where& w) {
  if (!v.is_number()) throw SchemaError(w.str() + ": expected a number");
  return v.get<double>();
}

inline std::int64_t integer(const json& v, const Where& w) {
  if (!v.is_number_integer()) throw SchemaError(w.str() + ": expected an integer");
  return v.get<std::int64_t>();
}

inline const json& array(const json& v, const Where& w) {
  if (!v.is_array()) throw SchemaError(w.str() + ": expected an array");
  return v;
}

inline std::string string(const json& v, const Where& w) {
  if (!v.is_string()) throw SchemaError(w.str() + ": expected a string");
  return v.get<std::string>();
}

inline SemanticClass semantic_class(const json& v, const Where& w) {
  const auto name = string(v, w);
  const auto c = parse_class(name);
  if (!c) throw SchemaError(w.str() + ": unknown class '" + name + "'");
  return *c;
}

inline std::vector<Point2> points(const json& v, const Where& w) {
  std::vector<Point2> pts;
  const auto& arr = array(v, w);
  pts.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& p = array(arr[i], w.at(i));
    if (p.size() != 2) throw SchemaError(w.at(i).str() + ": expected [x, y]");
    pts.push_back({number(p[0], w.at(i).at(0)), number(p[1], w.at(i).at(1))});
  }
  return pts;
}

inline Polyline polyline(SemanticClass c, const json& v, const Where& w) {
  auto pts = points(v, w);
  try {
    return Polyline(c, std::move(pts));
  } catch (const GeometryError& e) {
    throw GeometryError(w.str() + ": " + e.what());
  }
}

inline Pose2D pose(const json& v, const Where& w) {
  const auto& arr = array(v, w);
  if (arr.size() != 3) throw SchemaError(w.str() + ": expected [tx, ty, phi]");
  Pose2D p{number(arr[0], w.at(0)), number(arr[1], w.at(1)), number(arr[2], w.at(2))};
  if (!std::isfinite(p.tx) || !std::isfinite(p.ty) || !std::isfinite(p.phi)) {
    throw GeometryError(w.str() + ": non-finite pose");
  }
  return p;
}

template <class T>
std::set<T> int_set(const json& v, const Where& w) {
  std::set<T> out;
  const auto& arr = array(v, w);
  for (std::size_t i = 0; i < arr.size(); ++i) out.insert(integer(arr[i], w.at(i)));
  return out;
}

inline json points_json(std::span<const Point2> pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back(json::array({p.x, p.y}));
  return arr;
}

inline json pose_json(const Pose2D& p) { return json::array({p.tx, p.ty, p.phi}); }

inline json parse_text(const std::string& text, const std::string& name) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(name + ": invalid JSON: " + e.what());
  }
}

}  // namespace detail

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path.string() + ": cannot write file");
  out << text;
}

/// Canonical text form: compact JSON, sorted keys, shortest round-trip numbers, trailing newline.
inline std::string canonical(const json& j) { return j.dump() + "\n"; }

// ---- frames ----

inline FrameSequence frames_from_json(const json& j, const std::string& name = "<frames>") {
  using namespace detail;
  const Where root{name, "$"};
  FrameSequence seq;
  seq.scene = string(field(j, "scene", root), root.at("scene"));
  const auto& frames = array(field(j, "frames", root), root.at("frames"));
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const Where wf = root.at("frames").at(f);
    FrameObservation obs;
    obs.frame_index = integer(field(frames[f], "t", wf), wf.at("t"));
    if (obs.frame_index < 0) throw SchemaError(wf.at("t").str() + ": negative frame index");
    if (!seq.frames.empty() && obs.frame_index <= seq.frames.back().frame_index) {
      throw SchemaError(wf.at("t").str() + ": frame indices must strictly increase");
    }
    obs.ego_pose_ref = pose(field(frames[f], "ego_pose", wf), wf.at("ego_pose"));
    const auto& polys = array(field(frames[f], "polylines", wf), wf.at("polylines"));
    for (std::size_t i = 0; i < polys.size(); ++i) {
      const Where wp = wf.at("polylines").at(i);
      const auto cls = semantic_class(field(polys[i], "class", wp), wp.at("class"));
      std::optional<std::int64_t> id;
      if (const auto it = polys[i].find("id"); it != polys[i].end() && !it->is_null()) {
        id = integer(*it, wp.at("id"));
        if (*id < 0) throw SchemaError(wp.at("id").str() + ": negative persistent id");
      }
      obs.polylines.push_back({polyline(cls, field(polys[i], "pts", wp), wp.at("pts")), id});
    }
    seq.frames.push_back(std::move(obs));
  }
  return seq;
}

inline json frames_to_json(const FrameSequence& seq) {
  json frames = json::array();
  for (const auto& f : seq.frames) {
    json polys = json::array();
    for (const auto& p : f.polylines) {
      polys.push_back({{"class", class_name(p.geometry.cls())},
                       {"id", p.persistent_id ? json(*p.persistent_id) : json(nullptr)},
                       {"pts", detail::points_json(p.geometry.vertices())}});
    }
    frames.push_back({{"t", f.frame_index}, {"ego_pose", detail::pose_json(f.ego_pose_ref)}, {"polylines", polys}});
  }
  return {{"scene", seq.scene}, {"frames", frames}};
}

inline FrameSequence read_frames(const std::filesystem::path& path) {
  return frames_from_json(detail::parse_text(read_text(path), path.string()), path.string());
}

inline void write_frames(const std::filesystem::path& path, const FrameSequence& seq) {
  write_text(path, canonical(frames_to_json(seq)));
}

// ---- global map ----

inline GlobalVectorMap map_from_json(const json& j, const std::string& name = "<map>") {
  using namespace detail;
  const Where root{name, "$"};
  GlobalVectorMap map;
  map.scene = string(field(j, "scene", root), root.at("scene"));
  if (const auto it = j.find("config"); it != j.end()) map.config = *it;
  const auto& elems = array(field(j, "elements", root), root.at("elements"));
  for (std::size_t i = 0; i < elems.size(); ++i) {
    const Where we = root.at("elements").at(i);
    const auto cls = semantic_class(field(elems[i], "class", we), we.at("class"));
    GlobalPolyline g{integer(field(elems[i], "gid", we), we.at("gid")),
                     polyline(cls, field(elems[i], "pts", we), we.at("pts")),
                     int_set<std::int64_t>(field(elems[i], "frames", we), we.at("frames")),
                     {}};
    if (const auto it = elems[i].find("ids"); it != elems[i].end()) g.source_ids = int_set<std::int64_t>(*it, we.at("ids"));
    if (g.support_frames.empty()) throw SchemaError(we.at("frames").str() + ": element needs a supporting frame");
    for (const auto& other : map.elements[cls]) {
      if (other.global_id == g.global_id) throw SchemaError(we.at("gid").str() + ": duplicate gid within class");
    }
    map.elements[cls].push_back(std::move(g));
  }
  return map;
}

inline json element_json(SemanticClass c, const GlobalPolyline& g) {
  return {{"class", class_name(c)},
          {"gid", g.global_id},
          {"pts", detail::points_json(g.geometry.vertices())},
          {"frames", g.support_frames},
          {"ids", g.source_ids}};
}

inline json map_to_json(const GlobalVectorMap& map) {
  json elems = json::array();
  for (auto c : kAllClasses) {
    for (const auto& g : map.elements[c]) elems.push_back(element_json(c, g));
  }
  return {{"scene", map.scene}, {"config", map.config}, {"elements", elems}};
}

inline GlobalVectorMap read_map(const std::filesystem::path& path) {
  return map_from_json(detail::parse_text(read_text(path), path.string()), path.string());
}

inline void write_map(const std::filesystem::path& path, const GlobalVectorMap& map) {
  write_text(path, canonical(map_to_json(map)));
}

// ---- objects ----

inline std::vector<FrameObjects> objects_from_json(const json& j, const std::string& name = "<objects>") {
  using namespace detail;
  std::vector<FrameObjects> out;
  const Where root{name, "$"};
  const json list = j.is_array() ? j : json::array({j});
  for (std::size_t f = 0; f < list.size(); ++f) {
    const Where wf = j.is_array() ? root.at(f) : root;
    FrameObjects fo;
    fo.frame_index = integer(field(list[f], "t", wf), wf.at("t"));
    const auto& boxes = array(field(list[f], "boxes", wf), wf.at("boxes"));
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const Where wb = wf.at("boxes").at(i);
      ObjectBox b;
      b.center = {number(field(boxes[i], "cx", wb), wb.at("cx")), number(field(boxes[i], "cy", wb), wb.at("cy"))};
      b.yaw = number(field(boxes[i], "yaw", wb), wb.at("yaw"));
      b.length = number(field(boxes[i], "l", wb), wb.at("l"));
      b.width = number(field(boxes[i], "w", wb), wb.at("w"));
      b.label = string(field(boxes[i], "label", wb), wb.at("label"));
      if (!(b.length > 0.0) || !(b.width > 0.0)) throw GeometryError(wb.str() + ": box extents must be positive");
      if (!is_finite(b.center) || !std::isfinite(b.yaw)) throw GeometryError(wb.str() + ": non-finite box");
      fo.boxes.push_back(std::move(b));
    }
    out.push_back(std::move(fo));
  }
  return out;
}

inline json box_json(const ObjectBox& b) {
  return {{"cx", b.center.x}, {"cy", b.center.y}, {"yaw", b.yaw}, {"l", b.length}, {"w", b.width}, {"label", b.label}};
}

inline json objects_to_json(const std::vector<FrameObjects>& objs) {
  json out = json::array();
  for (const auto& fo : objs) {
    json boxes = json::array();
    for (const auto& b : fo.boxes) boxes.push_back(box_json(b));
    out.push_back({{"t", fo.frame_index}, {"boxes", boxes}});
  }
  return out;
}

inline std::vector<FrameObjects> read_objects(const std::filesystem::path& path) {
  return objects_from_json(detail::parse_text(read_text(path), path.string()), path.string());
}

// ---- completed / augmented output ----

inline json completed_elements_json(std::span<const CompletedElement> elems, std::int64_t frame_index) {
  json out = json::array();
  for (const auto& e : elems) {
    json runs = json::array();
    for (const auto& r : e.runs) runs.push_back({{"src", run_source_name(r.src)}, {"begin", r.begin}, {"end", r.end}});
    out.push_back({{"class", class_name(e.geometry.cls())},
                   {"gid", e.global_id},
                   {"pts", detail::points_json(e.geometry.vertices())},
                   {"frames", json::array({frame_index})},
                   {"runs", runs}});
  }
  return out;
}

inline json completed_to_json(const std::string& scene, const nlohmann::json& config,
                              std::span<const CompletedFrame> frames) {
  json list = json::array();
  for (const auto& f : frames) {
    list.push_back({{"t", f.frame_index},
                    {"pose", detail::pose_json(f.pose)},
                    {"elements", completed_elements_json(f.elements, f.frame_index)}});
  }
  return {{"scene", scene}, {"config", config}, {"completed", list}};
}

inline json augmented_to_json(const std::string& scene, std::span<const AugmentedFrame> frames) {
  json list = json::array();
  for (const auto& f : frames) {
    json objs = json::array();
    for (const auto& b : f.objects_in_map) objs.push_back(box_json(b));
    list.push_back({{"t", f.frame_index},
                    {"refined_pose", detail::pose_json(f.refined_pose)},
                    {"ego_in_map", detail::pose_json(f.ego_in_map)},
                    {"objects_in_map", objs},
                    {"completed_map", {{"elements", completed_elements_json(f.completed_map, f.frame_index)}}}});
  }
  return {{"scene", scene}, {"frames", list}};
}

}  // namespace lgfa::io
