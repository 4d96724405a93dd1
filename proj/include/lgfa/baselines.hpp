#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lgfa/error.hpp"
#include "lgfa/geom.hpp"
#include "lgfa/localization.hpp"
#include "lgfa/pose.hpp"

namespace lgfa::baselines {

struct IcpConfig {
  int iters = 20;
  double radius = 2.0;
  double trim = 0.7;
  double eps_conv = 1e-4;
  double pose_diff_scale = 5.0;
};

struct BaselineResult {
  Pose2D pose;
  int iterations = 0;
};

/// Point-to-point ICP keeping the best trim fraction of gated nearest-neighbour pairs.
inline BaselineResult icp_trimmed(std::span<const Point2> src, std::span<const Point2> dst, const Pose2D& theta0,
                                  const IcpConfig& cfg = {}) {
  if (src.size() < 3 || dst.size() < 3) throw InsufficientInput("icp_trimmed: need at least 3 points on each side");
  const auto index = make_point_index(dst, kDefaultCell);
  BaselineResult res{theta0, 0};
  struct Pair {
    double r;
    std::size_t i;
    std::size_t j;
  };
  for (int k = 1; k <= cfg.iters; ++k) {
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < src.size(); ++i) {
      const Point2 p = pose_apply(res.pose, src[i]);
      const auto hit = index.nearest(p, [&](std::size_t j) { return distance(p, dst[j]); }, cfg.radius);
      if (hit) pairs.push_back({hit->distance, i, hit->index});
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.r < b.r || (a.r == b.r && a.i < b.i); });
    const auto keep = static_cast<std::size_t>(std::ceil(cfg.trim * static_cast<double>(pairs.size())));
    if (keep < 3) break;
    std::vector<localization::WeightedPair> wp;
    wp.reserve(keep);
    for (std::size_t n = 0; n < keep; ++n) wp.push_back({src[pairs[n].i], dst[pairs[n].j], 1.0});
    Pose2D next;
    try {
      next = localization::weighted_procrustes(wp);
    } catch (const DegenerateGeometry&) {
      break;
    }
    res.iterations = k;
    const bool small = pose_diff(next, res.pose, cfg.pose_diff_scale) < cfg.eps_conv;
    res.pose = next;
    if (small) break;
  }
  return res;
}

struct NdtConfig {
  int iters = 20;
  double grid = 1.0;
  std::size_t max_source = 8000;
  double regularization = 1e-3;  // m^2 added to the covariance diagonal
  std::size_t min_cell_points = 5;
  double step_eps = 1e-4;
  int max_halvings = 10;
};

struct ScoreEval {
  double score = 0.0;
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  Eigen::Matrix3d hessian = Eigen::Matrix3d::Zero();  // Gauss-Newton approximation, positive semidefinite
};

/// Single-resolution NDT target: one Gaussian per occupied grid cell.
class NdtModel {
 public:
  NdtModel(std::span<const Point2> dst, const NdtConfig& cfg) : grid_(cfg.grid) {
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<Point2>> buckets;
    for (const auto& p : dst) buckets[key(p)].push_back(p);
    for (const auto& [k, pts] : buckets) {
      if (pts.size() < cfg.min_cell_points) continue;
      Eigen::Vector2d mean = Eigen::Vector2d::Zero();
      for (const auto& p : pts) mean += Eigen::Vector2d(p.x, p.y);
      mean /= static_cast<double>(pts.size());
      Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
      for (const auto& p : pts) {
        const Eigen::Vector2d d = Eigen::Vector2d(p.x, p.y) - mean;
        cov += d * d.transpose();
      }
      cov /= static_cast<double>(pts.size());
      cov += cfg.regularization * Eigen::Matrix2d::Identity();
      cells_.emplace(k, Cell{mean, cov.inverse()});
    }
    if (cells_.empty()) throw InsufficientInput("ndt_2d: no grid cell has enough target points");
  }

  std::size_t cell_count() const { return cells_.size(); }

  /// Sum over source points of exp(-q' S^-1 q / 2) in the cell containing the moved point.
  ScoreEval evaluate(std::span<const Point2> src, const Pose2D& pose, bool derivatives = true) const {
    ScoreEval out;
    const double c = std::cos(pose.phi);
    const double s = std::sin(pose.phi);
    for (const auto& x : src) {
      const Point2 p = pose_apply(pose, x);
      const auto it = cells_.find(key(p));
      if (it == cells_.end()) continue;
      const Eigen::Vector2d q = Eigen::Vector2d(p.x, p.y) - it->second.mean;
      const Eigen::Vector2d iq = it->second.inv_cov * q;
      const double e = std::exp(-0.5 * q.dot(iq));
      out.score += e;
      if (!derivatives) continue;
      Eigen::Matrix<double, 2, 3> J;
      J << 1.0, 0.0, -s * x.x - c * x.y, 0.0, 1.0, c * x.x - s * x.y;
      out.gradient -= e * (J.transpose() * iq);
      out.hessian += e * (J.transpose() * it->second.inv_cov * J);
    }
    return out;
  }

 private:
  struct Cell {
    Eigen::Vector2d mean;
    Eigen::Matrix2d inv_cov;
  };

  std::pair<std::int64_t, std::int64_t> key(Point2 p) const {
    return {static_cast<std::int64_t>(std::floor(p.x / grid_)), static_cast<std::int64_t>(std::floor(p.y / grid_))};
  }

  double grid_;
  std::map<std::pair<std::int64_t, std::int64_t>, Cell> cells_;
};

/// Keeps every ceil(n / cap)-th point.
inline std::vector<Point2> decimate(std::span<const Point2> pts, std::size_t cap) {
  const std::size_t stride = std::max<std::size_t>(1, (pts.size() + cap - 1) / cap);
  std::vector<Point2> out;
  for (std::size_t i = 0; i < pts.size(); i += stride) out.push_back(pts[i]);
  return out;
}

/// Gauss-Newton ascent on the NDT score with step halving; a step is accepted only if the
/// score does not decrease.
inline BaselineResult ndt_2d(std::span<const Point2> src_all, std::span<const Point2> dst, const Pose2D& theta0,
                             const NdtConfig& cfg = {}) {
  const NdtModel model(dst, cfg);
  const auto src = decimate(src_all, cfg.max_source);
  BaselineResult res{theta0, 0};
  auto current = model.evaluate(src, res.pose);
  for (int k = 1; k <= cfg.iters; ++k) {
    const Eigen::Matrix3d H = current.hessian + 1e-9 * Eigen::Matrix3d::Identity();
    const Eigen::Vector3d step = H.ldlt().solve(current.gradient);
    if (!step.allFinite()) break;
    double scale = 1.0;
    bool accepted = false;
    Pose2D trial;
    for (int h = 0; h <= cfg.max_halvings; ++h, scale *= 0.5) {
      trial = make_pose(res.pose.tx + scale * step[0], res.pose.ty + scale * step[1], res.pose.phi + scale * step[2]);
      if (model.evaluate(src, trial, false).score >= current.score) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    res.pose = trial;
    res.iterations = k;
    current = model.evaluate(src, res.pose);
    if (scale * step.norm() < cfg.step_eps) break;
  }
  return res;
}

}  // namespace lgfa::baselines
