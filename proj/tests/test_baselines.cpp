#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace lgfa;
using namespace lgfa::baselines;

namespace {

// Dense samples of a curved two-lane road: every pose direction is observable.
std::vector<Point2> curved_scene(double step) {
  scenario::ScenarioSpec spec;
  spec.road = scenario::RoadTemplate::Curve;
  spec.length = 40.0;
  spec.crossings = {20.0};
  return metrics::all_samples(scenario::generate_gt(spec), step);
}

// Jittered 2 m lattice: nearest neighbours stay true correspondences for offsets under 1 m.
std::vector<Point2> jittered_lattice() {
  Rng rng(17);
  std::vector<Point2> pts;
  for (int i = -10; i <= 10; ++i) {
    for (int j = -10; j <= 10; ++j) pts.push_back({2.0 * i + rng.uniform(-0.1, 0.1), 2.0 * j + rng.uniform(-0.1, 0.1)});
  }
  return pts;
}

// Short random-walk polylines in every orientation.
std::vector<Point2> tangle() {
  Rng rng(1);
  std::vector<Point2> pts;
  for (int i = 0; i < 12; ++i) {
    for (const auto& q : resample(oracle::random_polyline(rng, SemanticClass::LaneDivider, 5, 20.0), 0.1)) pts.push_back(q);
  }
  return pts;
}

std::vector<Point2> moved(const std::vector<Point2>& pts, const Pose2D& p) { return pose_apply(p, std::span<const Point2>(pts)); }

}  // namespace

TEST(IcpTrimmed, IdenticalSetsStayAtIdentity) {
  const auto pts = curved_scene(0.2);
  const auto res = icp_trimmed(pts, pts, Pose2D::identity());
  EXPECT_LE(pose_diff(res.pose, Pose2D::identity(), 1.0), 1e-9);
}

TEST(IcpTrimmed, RecoversASmallOffset) {
  const auto dst = jittered_lattice();
  const Pose2D truth = make_pose(0.5, 0.0, deg2rad(1.0));
  const auto src = moved(dst, pose_inverse(truth));
  const auto res = icp_trimmed(src, dst, Pose2D::identity());
  const auto err = metrics::pose_errors(res.pose, truth);
  EXPECT_LE(err.translation_m, 0.02);
  EXPECT_LE(err.heading_deg, 0.05);
}

TEST(IcpTrimmed, NeedsThreePoints) {
  const std::vector<Point2> two{{0, 0}, {1, 0}};
  const auto pts = curved_scene(0.5);
  EXPECT_THROW(icp_trimmed(two, pts, Pose2D::identity()), InsufficientInput);
  EXPECT_THROW(icp_trimmed(pts, two, Pose2D::identity()), InsufficientInput);
}

TEST(Ndt, IdenticalSetsStayAtIdentity) {
  const auto pts = curved_scene(0.1);
  const auto res = ndt_2d(pts, pts, Pose2D::identity());
  EXPECT_LE(pose_diff(res.pose, Pose2D::identity(), 1.0), 1e-6);
}

TEST(IcpTrimmed, StallsAlongTrackOnSampledLines) {
  // A shift of one sample spacing along straight lines is an exact local minimum.
  const auto dst = curved_scene(0.1);
  const auto res = icp_trimmed(moved(dst, make_pose(-0.1, 0.0, 0.0)), dst, Pose2D::identity());
  EXPECT_GT(metrics::pose_errors(res.pose, make_pose(0.1, 0.0, 0.0)).translation_m, 0.05);
}

TEST(Ndt, RecoversAnOffsetOnAMultiOrientationScene) {
  const auto dst = tangle();
  const Pose2D truth = make_pose(0.8, 0.0, 0.0);
  const auto res = ndt_2d(moved(dst, pose_inverse(truth)), dst, Pose2D::identity());
  EXPECT_LE(metrics::pose_errors(res.pose, truth).translation_m, 0.1);
}

TEST(Ndt, GradientMatchesFiniteDifferences) {
  Rng rng(2024);
  std::size_t redraws = 0;
  for (int i = 0; i < 100; ++i) {
    const auto check = oracle::ndt_gradient_check(rng);
    redraws += check.redraws;
    EXPECT_LE(check.rel_error, 1e-4) << "state " << i;
  }
  std::printf("states redrawn for a cell crossing inside the stencil: %zu\n", redraws);
}

TEST(Ndt, ScoreNeverDecreasesAcrossIterations) {
  const auto dst = curved_scene(0.1);
  const auto src = moved(dst, make_pose(-0.4, 0.3, deg2rad(2.0)));
  const NdtModel model(dst, NdtConfig{});
  double last = model.evaluate(src, Pose2D::identity(), false).score;
  for (int k = 1; k <= 20; ++k) {
    NdtConfig cfg;
    cfg.iters = k;
    const auto res = ndt_2d(src, dst, Pose2D::identity(), cfg);
    const double score = model.evaluate(src, res.pose, false).score;
    EXPECT_GE(score, last) << "iteration " << k;
    last = score;
  }
}

TEST(Ndt, NoValidCellIsAnError) {
  const std::vector<Point2> sparse{{0, 0}, {5, 5}, {10, 10}};
  EXPECT_THROW(NdtModel(sparse, NdtConfig{}), InsufficientInput);
}

TEST(Ndt, SourceIsCapped) {
  std::vector<Point2> many;
  for (int i = 0; i < 20001; ++i) many.push_back({0.001 * i, 0.0});
  EXPECT_LE(decimate(many, 8000).size(), 8000u);
  EXPECT_EQ(decimate(many, 8000).front(), many.front());
}

TEST(Baselines, Deterministic) {
  const auto dst = curved_scene(0.2);
  const auto src = moved(dst, make_pose(0.3, -0.2, 0.01));
  EXPECT_EQ(icp_trimmed(src, dst, Pose2D::identity()).pose, icp_trimmed(src, dst, Pose2D::identity()).pose);
  EXPECT_EQ(ndt_2d(src, dst, Pose2D::identity()).pose, ndt_2d(src, dst, Pose2D::identity()).pose);
}
