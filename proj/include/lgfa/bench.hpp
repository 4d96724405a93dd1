#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lgfa/baselines.hpp"
#include "lgfa/completion.hpp"
#include "lgfa/config.hpp"
#include "lgfa/error.hpp"
#include "lgfa/fusion.hpp"
#include "lgfa/io.hpp"
#include "lgfa/localization.hpp"
#include "lgfa/metrics.hpp"
#include "lgfa/scenario.hpp"

namespace lgfa::bench {

enum class Method : std::uint8_t { Gnss, Icp, Ndt, Ours };

inline constexpr std::array<Method, 4> kAllMethods = {Method::Gnss, Method::Icp, Method::Ndt, Method::Ours};

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Gnss: return "gnss";
    case Method::Icp: return "icp";
    case Method::Ndt: return "ndt";
    case Method::Ours: return "ours";
  }
  return "gnss";
}

inline Method parse_method(const std::string& name) {
  for (auto m : kAllMethods) {
    if (method_name(m) == name) return m;
  }
  throw SchemaError("unknown method '" + name + "' (expected gnss, icp, ndt or ours)");
}

struct BenchOptions {
  AppConfig config;
  std::vector<double> alphas{1.0, 2.0, 3.0};
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  int seeds = 20;
  bool completion = true;
};

struct LocRow {
  std::uint64_t seed = 0;
  double alpha = 0.0;
  Method method = Method::Gnss;
  std::int64_t frame = 0;
  int perturbation = 0;
  metrics::PoseError error;
  bool converged = true;
};

struct MapRow {
  std::uint64_t seed = 0;
  SemanticClass cls = SemanticClass::LaneDivider;
  std::optional<double> chamfer;
  std::optional<double> scale;
};

struct CompletionRow {
  std::uint64_t seed = 0;
  std::int64_t frame = 0;
  int perturbation = 0;
  SemanticClass cls = SemanticClass::LaneDivider;
  double pose_only = 0.0;
  double full = 0.0;
};

struct SceneResult {
  std::vector<LocRow> loc;
  std::vector<MapRow> map;
  std::vector<CompletionRow> completion;
  std::size_t nonconverged = 0;
};

/// Class-blind samples of a frame (ego frame) for the baselines.
inline std::vector<Point2> frame_points(const FrameObservation& f, double step) {
  std::vector<Point2> out;
  for (const auto& p : f.polylines) {
    const auto s = resample(p.geometry, step);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

inline std::vector<Polyline> geometries(const FrameObservation& f) {
  std::vector<Polyline> out;
  for (const auto& p : f.polylines) out.push_back(p.geometry);
  return out;
}

/// Per-class completion rates of the pose-only baseline and of the full pipeline for one frame.
struct CompletionPair {
  PerClass<std::optional<double>> pose_only;
  PerClass<std::optional<double>> full;
};

inline CompletionPair completion_pair(const GlobalVectorMap& gt, const GlobalVectorMap& map,
                                      const FrameObservation& frame, const Pose2D& truth, const Pose2D& theta0,
                                      const Pose2D& refined, const AppConfig& cfg) {
  std::vector<Polyline> reference;
  for (auto& clip : scenario::clip_to_disk(gt, truth.translation(), cfg.scenario.fov_range, cfg.scenario.sample_step)) {
    reference.push_back(std::move(clip.geometry));
  }
  const auto polys = geometries(frame);
  std::vector<Polyline> raw;
  for (const auto& p : polys) raw.push_back(pose_apply(theta0, p));
  const auto completed = completion::complete(map, polys, refined, cfg.completion);
  const auto full = completion::geometries(completed);
  return {completion::completion_rate(raw, reference, cfg.completion),
          completion::completion_rate(full, reference, cfg.completion)};
}

/// One seed: simulate, fuse with the reference poses, localize every frame from every
/// perturbation with every method, and score completion at the first alpha.
inline SceneResult run_scene(const BenchOptions& opts, std::uint64_t seed) {
  const auto& cfg = opts.config;
  auto spec = cfg.scenario;
  spec.seed = seed;
  const auto gt = scenario::generate_gt(spec);
  const auto seq = scenario::simulate_frames(gt, spec);
  const auto map = fusion::build_map(seq.frames, cfg.fusion, seq.scene);

  SceneResult out;
  const auto chamfer = metrics::chamfer_map(map, gt, cfg.fusion.resample_step);
  const auto scale = metrics::scale_error_per_class(map, gt);
  for (auto c : kAllClasses) out.map.push_back({seed, c, chamfer[c], scale[c]});

  const double step = cfg.localization.resample_step;
  const auto map_points = metrics::all_samples(map, step);
  std::map<std::pair<std::int64_t, int>, Pose2D> refined_first;
  for (std::size_t ai = 0; ai < opts.alphas.size(); ++ai) {
    const double alpha = opts.alphas[ai];
    const auto offsets = scenario::perturbations(alpha);
    for (const auto& frame : seq.frames) {
      const auto pts = frame_points(frame, step);
      if (pts.size() < cfg.localization.min_points) continue;
      const std::string where = seq.scene + " frame " + std::to_string(frame.frame_index);
      for (std::size_t k = 0; k < offsets.size(); ++k) {
        const Pose2D truth = frame.ego_pose_ref;
        const Pose2D theta0 = scenario::perturbed(truth, offsets[k]);
        const bool want_refined = ai == 0 && opts.completion;
        bool ours_done = false;
        for (auto m : opts.methods) {
          LocRow row{seed, alpha, m, frame.frame_index, static_cast<int>(k), {}, true};
          Pose2D est = theta0;
          with_context(where, [&] {
            switch (m) {
              case Method::Gnss: break;
              case Method::Icp: est = baselines::icp_trimmed(pts, map_points, theta0, cfg.icp).pose; break;
              case Method::Ndt: est = baselines::ndt_2d(pts, map_points, theta0, cfg.ndt).pose; break;
              case Method::Ours: {
                const auto r = localization::localize(frame, map, theta0, cfg.localization);
                est = r.pose;
                row.converged = r.converged;
                ours_done = true;
                if (want_refined) refined_first[{frame.frame_index, static_cast<int>(k)}] = est;
                break;
              }
            }
          });
          row.error = metrics::pose_errors(est, truth);
          out.nonconverged += row.converged ? 0 : 1;
          out.loc.push_back(row);
        }
        if (want_refined && !ours_done) {
          refined_first[{frame.frame_index, static_cast<int>(k)}] =
              with_context(where, [&] { return localization::localize(frame, map, theta0, cfg.localization).pose; });
        }
      }
    }
  }

  if (opts.completion && !opts.alphas.empty()) {
    const auto offsets = scenario::perturbations(opts.alphas.front());
    for (const auto& frame : seq.frames) {
      for (std::size_t k = 0; k < offsets.size(); ++k) {
        const auto it = refined_first.find({frame.frame_index, static_cast<int>(k)});
        if (it == refined_first.end()) continue;
        const Pose2D theta0 = scenario::perturbed(frame.ego_pose_ref, offsets[k]);
        const auto rates = completion_pair(gt, map, frame, frame.ego_pose_ref, theta0, it->second, cfg);
        for (auto c : kAllClasses) {
          if (!rates.full[c]) continue;
          out.completion.push_back({seed, frame.frame_index, static_cast<int>(k), c, rates.pose_only[c].value_or(0.0),
                                    *rates.full[c]});
        }
      }
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

inline std::string loc_csv(const std::vector<SceneResult>& scenes) {
  std::string s = "seed,alpha,method,frame,perturbation,trans_err_m,head_err_deg,converged\n";
  for (const auto& sc : scenes) {
    for (const auto& r : sc.loc) {
      s += std::to_string(r.seed) + "," + num(r.alpha) + "," + method_name(r.method) + "," + std::to_string(r.frame) +
           "," + std::to_string(r.perturbation) + "," + num(r.error.translation_m) + "," + num(r.error.heading_deg) +
           "," + (r.converged ? "1" : "0") + "\n";
    }
  }
  return s;
}

inline std::string map_csv(const std::vector<SceneResult>& scenes) {
  std::string s = "seed,class,chamfer_m,scale_err_pct\n";
  for (const auto& sc : scenes) {
    for (const auto& r : sc.map) {
      s += std::to_string(r.seed) + "," + std::string(class_name(r.cls)) + "," + opt_num(r.chamfer) + "," +
           opt_num(r.scale) + "\n";
    }
  }
  return s;
}

inline std::string completion_csv(const std::vector<SceneResult>& scenes) {
  std::string s = "seed,frame,perturbation,class,pose_only_pct,full_pct\n";
  for (const auto& sc : scenes) {
    for (const auto& r : sc.completion) {
      s += std::to_string(r.seed) + "," + std::to_string(r.frame) + "," + std::to_string(r.perturbation) + "," +
           std::string(class_name(r.cls)) + "," + num(r.pose_only) + "," + num(r.full) + "\n";
    }
  }
  return s;
}

/// Worker count: LGFA_THREADS if set and positive, else the hardware concurrency.
inline unsigned thread_budget() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LGFA_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) n = static_cast<unsigned>(v);
  }
  return n;
}

struct BenchOutcome {
  std::vector<SceneResult> scenes;
  std::size_t nonconverged = 0;
};

/// Runs every seed (in parallel up to the thread budget) and writes the raw CSVs into out_dir.
/// Scenes that finished are written even when another scene fails; the first failure by seed
/// order is then rethrown.
inline BenchOutcome run_bench(const BenchOptions& opts, const std::filesystem::path& out_dir) {
  const auto n = static_cast<std::size_t>(std::max(opts.seeds, 0));
  std::vector<std::optional<SceneResult>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = run_scene(opts, opts.config.scenario.seed + i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_budget(), std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  BenchOutcome out;
  for (auto& r : results) {
    if (!r) continue;
    out.nonconverged += r->nonconverged;
    out.scenes.push_back(std::move(*r));
  }
  std::filesystem::create_directories(out_dir);
  io::write_text(out_dir / "raw_loc.csv", loc_csv(out.scenes));
  io::write_text(out_dir / "raw_map.csv", map_csv(out.scenes));
  io::write_text(out_dir / "raw_completion.csv", completion_csv(out.scenes));
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace lgfa::bench
