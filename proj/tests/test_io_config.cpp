#include <filesystem>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace lgfa;
using nlohmann::json;

TEST(Frames, MinimalFileParses) {
  const auto j = json::parse(R"({"scene": "s", "frames": [
      {"t": 0, "ego_pose": [1, 2, 0.1], "polylines": [{"class": "divider", "pts": [[0, 0], [1, 0]]}]}]})");
  const auto seq = io::frames_from_json(j);
  ASSERT_EQ(seq.frames.size(), 1u);
  EXPECT_EQ(seq.frames[0].count(SemanticClass::LaneDivider), 1u);
  EXPECT_EQ(seq.frames[0].count(SemanticClass::RoadBoundary), 0u);
  EXPECT_EQ(seq.frames[0].ego_pose_ref, make_pose(1, 2, 0.1));
  EXPECT_FALSE(seq.frames[0].polylines[0].persistent_id.has_value());
}

TEST(Frames, UnknownClassNamesTheString) {
  const auto j = json::parse(R"({"scene": "s", "frames": [
      {"t": 0, "ego_pose": [0, 0, 0], "polylines": [{"class": "lane_marker", "pts": [[0, 0], [1, 0]]}]}]})");
  try {
    io::frames_from_json(j);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("lane_marker"), std::string::npos);
  }
}

TEST(Frames, StructuralErrors) {
  auto parse = [](const char* text) { return io::frames_from_json(json::parse(text)); };
  EXPECT_THROW(parse(R"({"frames": []})"), SchemaError);
  EXPECT_THROW(parse(R"({"scene": "s", "frames": [{"t": 1, "ego_pose": [0,0,0], "polylines": []},
                                                  {"t": 1, "ego_pose": [0,0,0], "polylines": []}]})"),
               SchemaError);
  EXPECT_THROW(parse(R"({"scene": "s", "frames": [{"t": 0, "ego_pose": [0,0], "polylines": []}]})"), SchemaError);
  EXPECT_THROW(parse(R"({"scene": "s", "frames": [{"t": 0, "ego_pose": [0,0,0],
                         "polylines": [{"class": "divider", "pts": [[0,0]]}]}]})"),
               GeometryError);
  EXPECT_THROW(io::detail::parse_text("{not json", "x"), SchemaError);
}

TEST(Frames, FileRoundTrip) {
  scenario::ScenarioSpec spec;
  spec.frame_count = 3;
  spec.obs_noise = 0.1;
  const auto seq = scenario::simulate_frames(scenario::generate_gt(spec), spec);
  const auto dir = std::filesystem::temp_directory_path() / "lgfa_io_test";
  std::filesystem::create_directories(dir);
  io::write_frames(dir / "frames.json", seq);
  EXPECT_EQ(io::read_frames(dir / "frames.json"), seq);
  const auto map = scenario::generate_gt(spec);
  io::write_map(dir / "map.json", map);
  EXPECT_EQ(io::read_map(dir / "map.json"), map);
  EXPECT_THROW(io::read_map(dir / "missing.json"), SchemaError);
}

TEST(Map, DuplicateGidRejected) {
  const auto j = json::parse(R"({"scene": "s", "elements": [
      {"class": "divider", "gid": 0, "pts": [[0,0],[1,0]], "frames": [0]},
      {"class": "divider", "gid": 0, "pts": [[0,1],[1,1]], "frames": [0]}]})");
  EXPECT_THROW(io::map_from_json(j), SchemaError);
}

TEST(Objects, RoundTrip) {
  std::vector<FrameObjects> objs{{0, {{{1, 2}, 0.3, 4.0, 2.0, "car"}}}, {3, {}}};
  const auto back = io::objects_from_json(json::parse(io::objects_to_json(objs).dump()));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].boxes, objs[0].boxes);
  EXPECT_EQ(back[1].frame_index, 3);
}

TEST(Config, DefaultsMatchDocumentedValues) {
  const auto cfg = load_config(nullptr, {});
  EXPECT_EQ(cfg.localization.coarse_iters, 8);
  EXPECT_EQ(cfg.localization.fine_iters, 15);
  EXPECT_EQ(cfg.localization.coarse_gate, 4.0);
  EXPECT_EQ(cfg.localization.gates[SemanticClass::PedCrossing], 1.5);
  EXPECT_EQ(cfg.localization.gates[SemanticClass::LaneDivider], 1.5);
  EXPECT_EQ(cfg.localization.gates[SemanticClass::RoadBoundary], 1.8);
  EXPECT_EQ(cfg.localization.min_points, 30u);
  EXPECT_EQ(cfg.localization.max_points_global, 40000u);
  EXPECT_EQ(cfg.localization.max_points_local, 20000u);
  EXPECT_EQ(cfg.ndt.grid, 1.0);
  EXPECT_EQ(cfg.ndt.iters, 20);
  EXPECT_EQ(cfg.ndt.max_source, 8000u);
  EXPECT_EQ(cfg.completion.eta, 2.0);
  EXPECT_EQ(cfg.fusion.simplify_tol, 0.05);
}

TEST(Config, FileThenOverrides) {
  const auto file = json::parse(R"({"fusion": {"assoc_threshold": 1.5}, "scenario": {"road": "curve"}})");
  const auto cfg = load_config(&file, {"fusion.assoc_threshold=2.5", "localization.gates.boundary=2.0"});
  EXPECT_EQ(cfg.fusion.assoc_threshold, 2.5);
  EXPECT_EQ(cfg.scenario.road, scenario::RoadTemplate::Curve);
  EXPECT_EQ(cfg.localization.gates[SemanticClass::RoadBoundary], 2.0);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  const auto typo = json::parse(R"({"fusion": {"assoc_treshold": 1.5}})");
  EXPECT_THROW(load_config(&typo, {}), SchemaError);
  EXPECT_THROW(load_config(nullptr, {"fusion.simplify_tol=-1"}), SchemaError);
  EXPECT_THROW(load_config(nullptr, {"noequals"}), SchemaError);
  EXPECT_THROW(load_config(nullptr, {"scenario.road=\"spiral\""}), SchemaError);
  EXPECT_THROW(load_config(nullptr, {"scenario.dropout_rate=1.5"}), Error);
}

TEST(Errors, ContextKeepsTheType) {
  try {
    with_context("frame 3", [] { throw InsufficientInput("too few"); });
    FAIL();
  } catch (const InsufficientInput& e) {
    EXPECT_EQ(std::string(e.what()), "frame 3: too few");
  }
  EXPECT_TRUE(is_input_error(SchemaError("x")));
  EXPECT_FALSE(is_input_error(DegenerateGeometry("x")));
}
