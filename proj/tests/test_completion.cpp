#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace lgfa;
using namespace lgfa::completion;

namespace {

constexpr auto kDiv = SemanticClass::LaneDivider;
constexpr auto kBnd = SemanticClass::RoadBoundary;

GlobalVectorMap map_from(const std::vector<Polyline>& polys) {
  GlobalVectorMap m;
  for (const auto& p : polys) {
    auto& v = m.elements[p.cls()];
    v.push_back({static_cast<std::int64_t>(v.size()), p, {0}, {}});
  }
  return m;
}

std::vector<Point2> arc(double radius, double a0, double a1, int n) {
  std::vector<Point2> pts;
  for (int k = 0; k <= n; ++k) {
    const double a = a0 + (a1 - a0) * k / n;
    pts.push_back({radius * std::sin(a), radius * (1.0 - std::cos(a))});
  }
  return pts;
}

}  // namespace

TEST(Coverage, FullAndEmpty) {
  const CompletionConfig cfg;
  const GlobalPolyline e{0, Polyline(kDiv, {{0, 0}, {10, 0}}), {0}, {}};
  const std::vector<Polyline> same{e.geometry};
  const auto full = coverage(e, same, cfg);
  ASSERT_EQ(full.size(), 1u);
  EXPECT_TRUE(full[0].covered);
  EXPECT_EQ(full[0].start_s, 0.0);
  EXPECT_EQ(full[0].end_s, 10.0);
  const auto none = coverage(e, std::vector<Polyline>{}, cfg);
  ASSERT_EQ(none.size(), 1u);
  EXPECT_FALSE(none[0].covered);
  EXPECT_EQ(none[0].length(), 10.0);
}

TEST(Coverage, MidGapMatchesAnalyticInterval) {
  const CompletionConfig cfg;
  const GlobalPolyline e{3, Polyline(kDiv, {{0, 0}, {10, 0}}), {0}, {}};
  const double h = 0.3;  // lateral offset of the frame pieces
  const std::vector<Polyline> frame{Polyline(kDiv, {{0, h}, {4, h}}), Polyline(kDiv, {{6, h}, {10, h}})};
  const auto iv = coverage(e, frame, cfg);
  // Uncovered where the distance to both piece ends exceeds the buffer.
  const double reach = std::sqrt(cfg.buffer * cfg.buffer - h * h);
  ASSERT_EQ(iv.size(), 3u);
  EXPECT_FALSE(iv[1].covered);
  EXPECT_EQ(iv[1].global_id, 3);
  EXPECT_NEAR(iv[1].start_s, 4.0 + reach, cfg.step);
  EXPECT_NEAR(iv[1].end_s, 6.0 - reach, cfg.step);
}

TEST(Coverage, IntervalsPartitionTheElement) {
  Rng rng(12);
  const CompletionConfig cfg;
  for (int i = 0; i < 100; ++i) {
    const auto elem = oracle::random_polyline(rng, kDiv, 6, 10.0);
    std::vector<Polyline> frame;
    for (int k = 0; k < 3; ++k) frame.push_back(oracle::random_polyline(rng, kDiv, 3, 10.0));
    const auto iv = coverage(GlobalPolyline{0, elem, {0}, {}}, frame, cfg);
    ASSERT_FALSE(iv.empty());
    EXPECT_EQ(iv.front().start_s, 0.0);
    double sum = 0.0;
    for (std::size_t k = 0; k < iv.size(); ++k) {
      sum += iv[k].length();
      EXPECT_GT(iv[k].length(), 0.0);
      if (k > 0) {
        EXPECT_EQ(iv[k].start_s, iv[k - 1].end_s);
        EXPECT_NE(iv[k].covered, iv[k - 1].covered);
      }
    }
    EXPECT_NEAR(sum, arc_length(elem), 1e-9);
    EXPECT_NEAR(iv.back().end_s, arc_length(elem), 1e-9);
  }
}

TEST(Complete, ShortGapIsBridged) {
  const CompletionConfig cfg;
  const auto map = map_from({Polyline(kDiv, {{0, 0}, {20, 0}})});
  const std::vector<Polyline> frame{Polyline(kDiv, {{0, 0}, {9.25, 0}}), Polyline(kDiv, {{10.75, 0}, {20, 0}})};
  const auto out = complete(map, frame, Pose2D::identity(), cfg);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].global_id, 0);
  EXPECT_EQ(out[0].geometry.front(), (Point2{0, 0}));
  EXPECT_EQ(out[0].geometry.back(), (Point2{20, 0}));
  bool bridged = false;
  for (const auto& r : out[0].runs) bridged = bridged || r.src == RunSource::Bridge;
  EXPECT_TRUE(bridged);
}

TEST(Complete, InteriorGapShorterThanEtaIsBridged) {
  const CompletionConfig cfg;
  const auto map = map_from({Polyline(kDiv, {{0, 0}, {20, 0}})});
  const std::vector<Polyline> frame{Polyline(kDiv, {{0, 0.1}, {8.8, 0.1}}), Polyline(kDiv, {{11.2, 0.1}, {20, 0.1}})};
  const auto out = complete(map, frame, Pose2D::identity(), cfg);
  ASSERT_EQ(out.size(), 1u);
  ASSERT_EQ(out[0].runs.size(), 3u);
  EXPECT_EQ(out[0].runs[1].src, RunSource::Bridge);
  EXPECT_EQ(out[0].geometry.vertices()[out[0].runs[1].begin], (Point2{8.8, 0.1}));
  EXPECT_EQ(out[0].geometry.vertices()[out[0].runs[1].end], (Point2{11.2, 0.1}));
}

TEST(Complete, LongGapOnACurveIsSplicedAlongTheMap) {
  const CompletionConfig cfg;
  const Polyline global(kDiv, arc(40.0, 0.0, 1.0, 200));
  const auto map = map_from({global});
  const auto cum = cumulative_lengths(global.vertices());
  const std::vector<Polyline> frame{Polyline(kDiv, sub_path(global.vertices(), 0.0, 10.0)),
                                    Polyline(kDiv, sub_path(global.vertices(), 30.0, cum.back()))};
  const auto out = complete(map, frame, Pose2D::identity(), cfg);
  ASSERT_EQ(out.size(), 1u);
  bool spliced = false;
  for (const auto& r : out[0].runs) {
    if (r.src != RunSource::Splice) continue;
    spliced = true;
    for (std::size_t k = r.begin; k <= r.end; ++k) {
      EXPECT_LE(project(global.vertices(), cum, out[0].geometry.vertices()[k]).distance, cfg.buffer + cfg.step);
    }
  }
  EXPECT_TRUE(spliced);
  // Resampling at cfg.step shortens an arc of radius 40 by at most L step^2 / (24 R^2).
  EXPECT_NEAR(arc_length(out[0].geometry), cum.back(), cum.back() * cfg.step * cfg.step / (24.0 * 40.0 * 40.0));
}

TEST(Complete, EmptyClassYieldsTheMapSlice) {
  const CompletionConfig cfg;
  const auto map = map_from({Polyline(kDiv, {{0, 0}, {20, 0}}), Polyline(kBnd, {{0, 3}, {20, 3}}),
                             Polyline(kBnd, {{0, -3}, {8, -3}, {20, -4}})});
  const std::vector<Polyline> frame{Polyline(kDiv, {{0, 0}, {20, 0}})};
  const auto out = complete(map, frame, Pose2D::identity(), cfg);
  std::vector<Polyline> boundaries;
  for (const auto& e : out) {
    if (e.geometry.cls() == kBnd) boundaries.push_back(e.geometry);
  }
  ASSERT_EQ(boundaries.size(), 2u);
  EXPECT_EQ(boundaries[0], map.elements[kBnd][0].geometry);
  EXPECT_EQ(boundaries[1], map.elements[kBnd][1].geometry);
}

TEST(Complete, UnmatchedGeometryIsKeptAsObserved) {
  const auto map = map_from({Polyline(kDiv, {{0, 0}, {20, 0}})});
  const std::vector<Polyline> frame{Polyline(kDiv, {{0, 10}, {5, 10}})};
  const auto out = complete(map, frame, Pose2D::identity(), CompletionConfig{});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].global_id, -1);
  EXPECT_EQ(out[0].geometry, frame[0]);
}

TEST(CompletionRate, Examples) {
  const CompletionConfig cfg;
  const std::vector<Polyline> ref{Polyline(kDiv, {{0, 0}, {20, 0}})};
  EXPECT_EQ(*completion_rate(ref, ref, cfg)[kDiv], 100.0);
  EXPECT_FALSE(completion_rate(ref, ref, cfg)[kBnd].has_value());
  // Output ends at 10 m; the buffer reaches 0.75 m beyond it.
  const std::vector<Polyline> half{Polyline(kDiv, {{0, 0}, {10 - cfg.buffer, 0}})};
  EXPECT_NEAR(*completion_rate(half, ref, cfg)[kDiv], 50.0, cfg.step / 20.0 * 100.0);
  EXPECT_EQ(*completion_rate(std::vector<Polyline>{}, ref, cfg)[kDiv], 0.0);
}

TEST(CompletionRate, FullPipelineNeverBelowPoseOnly) {
  const auto spec = scenario::ScenarioSpec::occlusion(1);
  const auto gt = scenario::generate_gt(spec);
  const auto seq = scenario::simulate_frames(gt, spec);
  AppConfig cfg;
  cfg.scenario = spec;
  const auto map = fusion::build_map(seq.frames, cfg.fusion, seq.scene);
  for (std::size_t f = 2; f < seq.frames.size(); f += 6) {
    const auto& frame = seq.frames[f];
    const auto theta0 = scenario::perturbed(frame.ego_pose_ref, scenario::perturbations(1.0)[f % 8]);
    const auto refined = localization::localize(frame, map, theta0, cfg.localization).pose;
    const auto rates = bench::completion_pair(gt, map, frame, frame.ego_pose_ref, theta0, refined, cfg);
    for (auto c : kAllClasses) {
      if (!rates.full[c]) continue;
      EXPECT_GE(*rates.full[c], rates.pose_only[c].value_or(0.0)) << class_name(c) << " frame " << f;
    }
  }
}

TEST(Foreground, Examples) {
  const ObjectBox box{{1, 0}, 0.0, 4.0, 2.0, "car"};
  const std::vector<ObjectBox> boxes{box};
  const auto same = foreground::augment(0, boxes, Pose2D::identity(), {});
  EXPECT_EQ(same.objects_in_map[0], box);
  const auto turned = foreground::augment(0, boxes, make_pose(0, 0, std::numbers::pi / 2), {});
  EXPECT_NEAR(turned.objects_in_map[0].center.x, 0.0, 1e-12);
  EXPECT_NEAR(turned.objects_in_map[0].center.y, 1.0, 1e-12);
  EXPECT_NEAR(turned.objects_in_map[0].yaw, std::numbers::pi / 2, 1e-12);
  EXPECT_EQ(turned.ego_in_map, make_pose(0, 0, std::numbers::pi / 2));
}

TEST(Foreground, CornersAndRoundTrip) {
  Rng rng(13);
  const Pose2D pose = make_pose(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-3, 3));
  std::vector<ObjectBox> boxes;
  for (int i = 0; i < 20; ++i) {
    boxes.push_back({{rng.uniform(-30, 30), rng.uniform(-30, 30)}, rng.uniform(-3, 3), rng.uniform(1, 6),
                     rng.uniform(1, 3), "obj"});
  }
  std::vector<CompletedElement> completed{{0, Polyline(kDiv, {{0, 0}, {1, 0}}), {{RunSource::Observed, 0, 1}}}};
  const auto out = foreground::augment(7, boxes, pose, completed);
  EXPECT_EQ(out.completed_map, completed);
  EXPECT_EQ(out.frame_index, 7);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto moved = foreground::box_corners(out.objects_in_map[i]);
    const auto local = foreground::box_corners(boxes[i]);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_LE(distance(moved[k], pose_apply(pose, local[k])), 1e-12);
    const auto back = foreground::transform_box(pose_inverse(pose), out.objects_in_map[i]);
    EXPECT_LE(distance(back.center, boxes[i].center), 1e-9);
    EXPECT_LE(std::abs(wrap_angle(back.yaw - boxes[i].yaw)), 1e-9);
  }
}
