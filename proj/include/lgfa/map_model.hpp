#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lgfa/geom.hpp"
#include "lgfa/pose.hpp"

namespace lgfa {

struct FramePolyline {
  Polyline geometry;
  std::optional<std::int64_t> persistent_id;

  friend bool operator==(const FramePolyline&, const FramePolyline&) = default;
};

/// One frame of per-class polylines in the ego frame, with the ego -> global reference pose.
struct FrameObservation {
  std::int64_t frame_index = 0;
  Pose2D ego_pose_ref;
  std::vector<FramePolyline> polylines;

  std::size_t count(SemanticClass c) const {
    std::size_t n = 0;
    for (const auto& p : polylines) n += p.geometry.cls() == c ? 1 : 0;
    return n;
  }
  friend bool operator==(const FrameObservation&, const FrameObservation&) = default;
};

struct FrameSequence {
  std::string scene;
  std::vector<FrameObservation> frames;

  friend bool operator==(const FrameSequence&, const FrameSequence&) = default;
};

struct GlobalPolyline {
  std::int64_t global_id = 0;
  Polyline geometry;
  std::set<std::int64_t> support_frames;
  std::set<std::int64_t> source_ids;

  friend bool operator==(const GlobalPolyline&, const GlobalPolyline&) = default;
};

struct GlobalVectorMap {
  std::string scene;
  PerClass<std::vector<GlobalPolyline>> elements;
  nlohmann::json config = nlohmann::json::object();

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& v : elements.values) n += v.size();
    return n;
  }
  friend bool operator==(const GlobalVectorMap&, const GlobalVectorMap&) = default;
};

struct ObjectBox {
  Point2 center;
  double yaw = 0.0;
  double length = 1.0;
  double width = 1.0;
  std::string label;

  friend bool operator==(const ObjectBox&, const ObjectBox&) = default;
};

struct FrameObjects {
  std::int64_t frame_index = 0;
  std::vector<ObjectBox> boxes;
};

enum class RunSource : std::uint8_t { Observed, Bridge, Splice };

inline std::string_view run_source_name(RunSource s) {
  switch (s) {
    case RunSource::Observed: return "obs";
    case RunSource::Bridge: return "bridge";
    case RunSource::Splice: return "splice";
  }
  return "obs";
}

/// Vertex index range [begin, end] of one provenance inside a completed polyline.
struct SourceRun {
  RunSource src = RunSource::Observed;
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const SourceRun&, const SourceRun&) = default;
};

struct CompletedElement {
  std::int64_t global_id = -1;  // -1: observed geometry with no matching map element
  Polyline geometry;
  std::vector<SourceRun> runs;

  friend bool operator==(const CompletedElement&, const CompletedElement&) = default;
};

struct CompletedFrame {
  std::int64_t frame_index = 0;
  Pose2D pose;
  std::vector<CompletedElement> elements;
};

struct AugmentedFrame {
  std::int64_t frame_index = 0;
  Pose2D refined_pose;
  std::vector<CompletedElement> completed_map;
  Pose2D ego_in_map;
  std::vector<ObjectBox> objects_in_map;
};

}  // namespace lgfa
