#pragma once

#include <array>
#include <span>
#include <vector>

#include "lgfa/geom.hpp"
#include "lgfa/map_model.hpp"
#include "lgfa/pose.hpp"

namespace lgfa::foreground {

inline ObjectBox transform_box(const Pose2D& pose, const ObjectBox& box) {
  ObjectBox out = box;
  out.center = pose_apply(pose, box.center);
  out.yaw = wrap_angle(box.yaw + pose.phi);
  return out;
}

/// Corners in counter-clockwise order starting at front-left.
inline std::array<Point2, 4> box_corners(const ObjectBox& b) {
  const double hl = 0.5 * b.length;
  const double hw = 0.5 * b.width;
  const std::array<Point2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Point2, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) out[i] = rotate(b.yaw, local[i]) + b.center;
  return out;
}

/// Ego pose and ego-frame objects expressed in the completed-map frame.
inline AugmentedFrame augment(std::int64_t frame_index, std::span<const ObjectBox> objects, const Pose2D& pose,
                              std::vector<CompletedElement> completed) {
  AugmentedFrame out;
  out.frame_index = frame_index;
  out.refined_pose = pose;
  out.ego_in_map = pose;
  out.completed_map = std::move(completed);
  out.objects_in_map.reserve(objects.size());
  for (const auto& b : objects) out.objects_in_map.push_back(transform_box(pose, b));
  return out;
}

}  // namespace lgfa::foreground
