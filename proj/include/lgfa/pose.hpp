#pragma once

#include <cmath>
#include <numbers>

#include "lgfa/geom.hpp"

namespace lgfa {

/// Wraps an angle to (-pi, pi]. The only angle normalization in the library.
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

inline Point2 rotate(double phi, Point2 p) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

/// Planar rigid transform p -> R(phi) p + t.
struct Pose2D {
  double tx = 0.0;
  double ty = 0.0;
  double phi = 0.0;

  static Pose2D identity() { return {}; }
  Point2 translation() const { return {tx, ty}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

inline Pose2D make_pose(double tx, double ty, double phi) { return {tx, ty, wrap_angle(phi)}; }

inline Point2 pose_apply(const Pose2D& T, Point2 p) { return rotate(T.phi, p) + T.translation(); }

/// (A o B)(p) = A(B(p)).
inline Pose2D pose_compose(const Pose2D& A, const Pose2D& B) {
  const Point2 t = rotate(A.phi, B.translation()) + A.translation();
  return {t.x, t.y, wrap_angle(A.phi + B.phi)};
}

inline Pose2D pose_inverse(const Pose2D& T) {
  const Point2 t = rotate(-T.phi, T.translation());
  return {-t.x, -t.y, wrap_angle(-T.phi)};
}

inline std::vector<Point2> pose_apply(const Pose2D& T, std::span<const Point2> pts) {
  std::vector<Point2> out;
  out.reserve(pts.size());
  const double c = std::cos(T.phi);
  const double s = std::sin(T.phi);
  for (const auto& p : pts) out.push_back({c * p.x - s * p.y + T.tx, s * p.x + c * p.y + T.ty});
  return out;
}

inline Polyline pose_apply(const Pose2D& T, const Polyline& poly) {
  return Polyline(poly.cls(), pose_apply(T, std::span<const Point2>(poly.vertices())));
}

/// Scaled parameter-difference norm ||(dtx, dty, lambda * wrap(dphi))||.
inline double pose_diff(const Pose2D& a, const Pose2D& b, double lambda) {
  const double dx = a.tx - b.tx;
  const double dy = a.ty - b.ty;
  const double dp = lambda * wrap_angle(a.phi - b.phi);
  return std::sqrt(dx * dx + dy * dy + dp * dp);
}

}  // namespace lgfa
