#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "lgfa/lgfa.hpp"

using namespace lgfa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  bool strict = false;
  std::string log_level = "info";
};

constexpr std::array<const char*, 6> kSections = {"scenario", "fusion", "localization", "completion", "icp", "ndt"};

// A config file is either a full document keyed by section or the bare fields of `section`.
AppConfig load(const Common& common, const char* section) {
  if (common.config_file.empty()) return load_config(nullptr, common.overrides);
  auto doc = io::detail::parse_text(io::read_text(common.config_file), common.config_file);
  bool sectioned = false;
  for (const char* s : kSections) sectioned = sectioned || (doc.is_object() && doc.contains(s));
  if (!sectioned) doc = nlohmann::json{{section, doc}};
  return load_config(&doc, common.overrides);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(report::to_double(item, "list"));
  return out;
}

std::vector<Polyline> frame_geometries(const FrameObservation& f) { return bench::geometries(f); }

std::map<std::int64_t, Pose2D> read_poses(const std::string& path) {
  const auto t = report::parse_csv(io::read_text(path), path);
  const auto cf = t.column("frame"), cx = t.column("tx"), cy = t.column("ty"), cp = t.column("phi_deg");
  std::map<std::int64_t, Pose2D> out;
  for (const auto& r : t.rows) {
    const auto frame = static_cast<std::int64_t>(report::to_double(r[cf], path));
    out[frame] = make_pose(report::to_double(r[cx], path), report::to_double(r[cy], path),
                           deg2rad(report::to_double(r[cp], path)));
  }
  return out;
}

Pose2D pose_for(const std::map<std::int64_t, Pose2D>& poses, const FrameObservation& f) {
  const auto it = poses.find(f.frame_index);
  if (it == poses.end()) throw SchemaError("poses: no row for frame " + std::to_string(f.frame_index));
  return it->second;
}

scenario::ScenarioSpec read_spec(const std::string& arg, const AppConfig& cfg) {
  if (arg == "default") return cfg.scenario;
  const auto doc = io::detail::parse_text(io::read_text(arg), arg);
  try {
    return doc.get<scenario::ScenarioSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(arg + ": " + e.what());
  }
}

int cmd_simulate(const Common& common, const std::string& spec_arg, const std::string& out_frames,
                 const std::string& out_gt) {
  const auto cfg = load(common, "scenario");
  const auto spec = read_spec(spec_arg, cfg);
  const auto gt = scenario::generate_gt(spec);
  const auto seq = scenario::simulate_frames(gt, spec);
  io::write_frames(out_frames, seq);
  io::write_map(out_gt, gt);
  spdlog::info("simulated {} frames, {} ground-truth elements", seq.frames.size(), gt.size());
  return kExitOk;
}

int cmd_build_map(const Common& common, const std::string& frames_path, const std::string& out) {
  const auto cfg = load(common, "fusion");
  const auto seq = io::read_frames(frames_path);
  fusion::MapBuilder builder(cfg.fusion, seq.scene);
  for (const auto& f : seq.frames) {
    with_context(seq.scene + " frame " + std::to_string(f.frame_index), [&] { builder.add_frame(f); });
  }
  const auto map = builder.finish();
  io::write_map(out, map);
  spdlog::info("map with {} elements written to {}", map.size(), out);
  return kExitOk;
}

int cmd_localize(const Common& common, const std::string& frames_path, const std::string& map_path,
                 const std::string& init, double alpha, int perturbation, const std::string& out) {
  const auto cfg = load(common, "localization");
  const auto seq = io::read_frames(frames_path);
  const auto map = io::read_map(map_path);
  Pose2D offset;
  if (init == "gnss") {
    const auto offsets = scenario::perturbations(alpha);
    if (perturbation < 0 || perturbation >= static_cast<int>(offsets.size())) {
      throw SchemaError("--perturbation must lie in [0, 7]");
    }
    offset = offsets[static_cast<std::size_t>(perturbation)];
  } else {
    const auto v = parse_list(init);
    if (v.size() != 3) throw SchemaError("--init expects tx,ty,phi_deg or gnss");
    offset = make_pose(v[0], v[1], deg2rad(v[2]));
  }
  std::string csv = "frame,stage1_iters,stage2_iters,tx,ty,phi_deg,trans_err_m,head_err_deg\n";
  std::size_t nonconverged = 0;
  std::size_t skipped = 0;
  for (const auto& f : seq.frames) {
    const Pose2D theta0 = scenario::perturbed(f.ego_pose_ref, offset);
    localization::LocalizationResult r;
    try {
      r = with_context(seq.scene + " frame " + std::to_string(f.frame_index),
                       [&] { return localization::localize(f, map, theta0, cfg.localization); });
    } catch (const InsufficientInput& e) {
      spdlog::warn("{}", e.what());
      ++skipped;
      continue;
    }
    nonconverged += r.converged ? 0 : 1;
    const auto err = metrics::pose_errors(r.pose, f.ego_pose_ref);
    csv += std::to_string(f.frame_index) + "," + std::to_string(r.stage1_iters) + "," + std::to_string(r.stage2_iters) +
           "," + bench::num(r.pose.tx) + "," + bench::num(r.pose.ty) + "," + bench::num(rad2deg(r.pose.phi)) + "," +
           bench::num(err.translation_m) + "," + bench::num(err.heading_deg) + "\n";
  }
  io::write_text(out, csv);
  if (skipped > 0) spdlog::warn("{} frame(s) skipped for too few samples", skipped);
  if (nonconverged > 0) {
    spdlog::warn("{} frame(s) did not converge", nonconverged);
    if (common.strict) return kExitNumerical;
  }
  return kExitOk;
}

int cmd_complete(const Common& common, const std::string& frames_path, const std::string& map_path,
                 const std::string& poses_path, const std::string& out) {
  const auto cfg = load(common, "completion");
  const auto seq = io::read_frames(frames_path);
  const auto map = io::read_map(map_path);
  const auto poses = read_poses(poses_path);
  std::vector<CompletedFrame> frames;
  for (const auto& f : seq.frames) {
    if (!poses.contains(f.frame_index)) {
      spdlog::warn("frame {} has no refined pose; skipped", f.frame_index);
      continue;
    }
    const Pose2D pose = pose_for(poses, f);
    frames.push_back({f.frame_index, pose, completion::complete(map, frame_geometries(f), pose, cfg.completion)});
  }
  nlohmann::json config = cfg.completion;
  io::write_text(out, io::canonical(io::completed_to_json(seq.scene, config, frames)));
  return kExitOk;
}

int cmd_augment(const Common& common, const std::string& frames_path, const std::string& objects_path,
                const std::string& map_path, const std::string& poses_path, const std::string& out) {
  const auto cfg = load(common, "completion");
  const auto seq = io::read_frames(frames_path);
  const auto map = io::read_map(map_path);
  const auto poses = read_poses(poses_path);
  std::map<std::int64_t, std::vector<ObjectBox>> objects;
  if (!objects_path.empty()) {
    for (auto& fo : io::read_objects(objects_path)) objects[fo.frame_index] = std::move(fo.boxes);
  }
  std::vector<AugmentedFrame> frames;
  for (const auto& f : seq.frames) {
    if (!poses.contains(f.frame_index)) {
      spdlog::warn("frame {} has no refined pose; skipped", f.frame_index);
      continue;
    }
    const Pose2D pose = pose_for(poses, f);
    const auto completed = completion::complete(map, frame_geometries(f), pose, cfg.completion);
    const auto it = objects.find(f.frame_index);
    const std::span<const ObjectBox> boxes =
        it == objects.end() ? std::span<const ObjectBox>() : std::span<const ObjectBox>(it->second);
    frames.push_back(foreground::augment(f.frame_index, boxes, pose, completed));
  }
  io::write_text(out, io::canonical(io::augmented_to_json(seq.scene, frames)));
  return kExitOk;
}

int cmd_bench(const Common& common, const std::string& spec_arg, const std::string& alphas,
              const std::string& methods, int seeds, bool no_completion, const std::string& out) {
  auto cfg = load(common, "scenario");
  cfg.scenario = read_spec(spec_arg, cfg);
  bench::BenchOptions opts;
  opts.config = cfg;
  opts.alphas = parse_list(alphas);
  opts.methods.clear();
  std::stringstream in(methods);
  std::string m;
  while (std::getline(in, m, ',')) opts.methods.push_back(bench::parse_method(m));
  opts.seeds = seeds;
  opts.completion = !no_completion;
  for (double a : opts.alphas) scenario::perturbations(a);
  std::optional<bench::BenchOutcome> outcome;
  try {
    outcome = bench::run_bench(opts, out);
  } catch (...) {
    report::write_report(out, out);
    throw;
  }
  report::write_report(out, out);
  spdlog::info("bench: {} scene(s) written to {}", outcome->scenes.size(), out);
  if (outcome->nonconverged > 0) {
    spdlog::warn("bench: {} localization(s) did not converge", outcome->nonconverged);
    if (common.strict) return kExitNumerical;
  }
  return kExitOk;
}

void write_error_report(const std::string& kind, const std::string& message, int code) {
  const nlohmann::json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
  std::fprintf(stderr, "%s\n", j.dump().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localization-guided map fusion, line completion and foreground augmentation over class-labeled polylines"};
  app.require_subcommand(1);
  app.allow_extras(false);
  Common common;
  app.add_option("--config", common.config_file, "JSON configuration file (full document or one section)")
      ->check(CLI::ExistingFile);
  app.add_option("--cfg", common.overrides, "Dotted override, e.g. fusion.assoc_threshold=1.5 (repeatable)");
  app.add_flag("--strict", common.strict, "Exit with status 3 when any localization fails to converge");
  app.add_option("--log-level", common.log_level, "Log level on stderr")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::string spec_arg = "default", out_frames, out_gt;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic scene and its observations");
  simulate->add_option("--spec", spec_arg, "Scenario JSON file or 'default'");
  simulate->add_option("--out-frames", out_frames, "Output frame file")->required();
  simulate->add_option("--out-gt", out_gt, "Output ground-truth map file")->required();

  std::string frames_path, map_path, out_path, poses_path, objects_path;
  auto* build = app.add_subcommand("build-map", "Fuse frames into a global vector map");
  build->add_option("--frames", frames_path, "Frame file")->required()->check(CLI::ExistingFile);
  build->add_option("--out", out_path, "Output map file")->required();

  std::string init = "gnss";
  double alpha = 1.0;
  int perturbation = 0;
  auto* localize = app.add_subcommand("localize", "Refine every frame's pose against a map");
  localize->add_option("--frames", frames_path, "Frame file")->required()->check(CLI::ExistingFile);
  localize->add_option("--map", map_path, "Map file")->required()->check(CLI::ExistingFile);
  localize->add_option("--init", init, "Ego-frame offset tx,ty,phi_deg applied to the reference pose, or 'gnss'");
  localize->add_option("--alpha", alpha, "Noise scale of the gnss protocol, in [1, 3]");
  localize->add_option("--perturbation", perturbation, "Index of the gnss protocol perturbation, 0..7");
  localize->add_option("--out", out_path, "Output CSV")->required();

  auto* complete = app.add_subcommand("complete", "Complete every frame against the map");
  complete->add_option("--frames", frames_path, "Frame file")->required()->check(CLI::ExistingFile);
  complete->add_option("--map", map_path, "Map file")->required()->check(CLI::ExistingFile);
  complete->add_option("--poses", poses_path, "Pose CSV written by localize")->required()->check(CLI::ExistingFile);
  complete->add_option("--out", out_path, "Output JSON")->required();

  auto* augment = app.add_subcommand("augment", "Reproject ego and objects onto the completed map");
  augment->add_option("--frames", frames_path, "Frame file")->required()->check(CLI::ExistingFile);
  augment->add_option("--objects", objects_path, "Object file (optional)")->check(CLI::ExistingFile);
  augment->add_option("--map", map_path, "Map file")->required()->check(CLI::ExistingFile);
  augment->add_option("--poses", poses_path, "Pose CSV written by localize")->required()->check(CLI::ExistingFile);
  augment->add_option("--out", out_path, "Output JSON")->required();

  std::string alphas = "1,2,3", methods = "gnss,icp,ndt,ours";
  int seeds = 20;
  bool no_completion = false;
  auto* benchcmd = app.add_subcommand("bench", "Run the full synthetic benchmark and write CSV and SVG reports");
  benchcmd->add_option("--spec", spec_arg, "Scenario JSON file or 'default'");
  benchcmd->add_option("--alpha", alphas, "Comma-separated noise scales");
  benchcmd->add_option("--methods", methods, "Comma-separated methods: gnss, icp, ndt, ours");
  benchcmd->add_option("--seeds", seeds, "Number of seeds, starting at the scenario seed")->check(CLI::PositiveNumber);
  benchcmd->add_flag("--no-completion", no_completion, "Skip the completion benchmark");
  benchcmd->add_option("--out", out_path, "Output directory")->required();

  std::string in_dir;
  auto* reportcmd = app.add_subcommand("report", "Aggregate raw bench CSVs into tables and charts");
  reportcmd->add_option("--in", in_dir, "Directory holding raw_*.csv")->required()->check(CLI::ExistingDirectory);
  reportcmd->add_option("--out", out_path, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  auto logger = spdlog::stderr_color_mt("lgfa");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(common.log_level));

  try {
    if (*simulate) return cmd_simulate(common, spec_arg, out_frames, out_gt);
    if (*build) return cmd_build_map(common, frames_path, out_path);
    if (*localize) return cmd_localize(common, frames_path, map_path, init, alpha, perturbation, out_path);
    if (*complete) return cmd_complete(common, frames_path, map_path, poses_path, out_path);
    if (*augment) return cmd_augment(common, frames_path, objects_path, map_path, poses_path, out_path);
    if (*benchcmd) return cmd_bench(common, spec_arg, alphas, methods, seeds, no_completion, out_path);
    if (*reportcmd) {
      report::write_report(in_dir, out_path);
      return kExitOk;
    }
  } catch (const Error& e) {
    const int code = is_input_error(e) ? kExitInput : kExitNumerical;
    spdlog::error("{}", e.what());
    write_error_report(is_input_error(e) ? "input" : "numerical", e.what(), code);
    return code;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    write_error_report("internal", e.what(), kExitNumerical);
    return kExitNumerical;
  }
  return kExitOk;
}
