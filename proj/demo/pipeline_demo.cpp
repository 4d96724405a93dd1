// End-to-end walk through the library on one synthetic scene.
#include <cstdio>
#include <vector>

#include "lgfa/lgfa.hpp"

int main() {
  using namespace lgfa;

  auto spec = scenario::ScenarioSpec::occlusion(3);
  const auto gt = scenario::generate_gt(spec);
  const auto seq = scenario::simulate_frames(gt, spec);
  const auto map = fusion::build_map(seq.frames, fusion::FusionConfig{}, seq.scene);

  std::printf("scene %s: %zu frames, %zu map elements\n", seq.scene.c_str(), seq.frames.size(), map.size());
  const auto chamfer = metrics::chamfer_map(map, gt, 0.2);
  for (auto c : kAllClasses) {
    if (chamfer[c]) std::printf("  %-13s chamfer %.3f m\n", std::string(class_name(c)).c_str(), *chamfer[c]);
  }

  const localization::LocalizationConfig loc_cfg;
  const completion::CompletionConfig comp_cfg;
  const auto& frame = seq.frames[10];
  const Pose2D truth = frame.ego_pose_ref;
  const Pose2D guess = scenario::perturbed(truth, scenario::perturbations(2.0)[4]);
  const auto result = localization::localize(frame, map, guess, loc_cfg);
  const auto before = metrics::pose_errors(guess, truth);
  const auto after = metrics::pose_errors(result.pose, truth);
  std::printf("frame %lld: %.3f m / %.3f deg -> %.3f m / %.3f deg (%d + %d iterations)\n",
              static_cast<long long>(frame.frame_index), before.translation_m, before.heading_deg,
              after.translation_m, after.heading_deg, result.stage1_iters, result.stage2_iters);

  const auto polys = bench::geometries(frame);
  auto completed = completion::complete(map, polys, result.pose, comp_cfg);
  const auto rates = bench::completion_pair(gt, map, frame, truth, guess, result.pose,
                                            AppConfig{spec, {}, loc_cfg, comp_cfg, {}, {}});
  for (auto c : kAllClasses) {
    if (!rates.full[c]) continue;
    std::printf("  %-13s completion %.1f%% (pose only %.1f%%)\n", std::string(class_name(c)).c_str(), *rates.full[c],
                rates.pose_only[c].value_or(0.0));
  }

  const std::vector<ObjectBox> objects{{{8.0, -1.75}, 0.1, 4.5, 1.9, "car"}, {{-6.0, 1.75}, 0.0, 4.2, 1.8, "car"}};
  const auto augmented = foreground::augment(frame.frame_index, objects, result.pose, std::move(completed));
  for (const auto& b : augmented.objects_in_map) {
    std::printf("  %s at (%.2f, %.2f) yaw %.3f\n", b.label.c_str(), b.center.x, b.center.y, b.yaw);
  }
  return 0;
}
