#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "lgfa/baselines.hpp"
#include "lgfa/completion.hpp"
#include "lgfa/error.hpp"
#include "lgfa/fusion.hpp"
#include "lgfa/json_fields.hpp"
#include "lgfa/localization.hpp"
#include "lgfa/scenario.hpp"

namespace lgfa {

namespace baselines {

inline void to_json(nlohmann::json& j, const IcpConfig& c) {
  j = {{"iters", c.iters}, {"radius", c.radius}, {"trim", c.trim}, {"eps_conv", c.eps_conv},
       {"pose_diff_scale", c.pose_diff_scale}};
}

inline void from_json(const nlohmann::json& j, IcpConfig& c) {
  json_fields::Reader r(j, "icp");
  r.read("iters", c.iters);
  r.read("radius", c.radius);
  r.read("trim", c.trim);
  r.read("eps_conv", c.eps_conv);
  r.read("pose_diff_scale", c.pose_diff_scale);
  r.finish();
  if (c.iters <= 0 || !(c.radius > 0.0) || !(c.trim > 0.0 && c.trim <= 1.0)) throw SchemaError("icp: invalid values");
}

inline void to_json(nlohmann::json& j, const NdtConfig& c) {
  j = {{"iters", c.iters},
       {"grid", c.grid},
       {"max_source", c.max_source},
       {"regularization", c.regularization},
       {"min_cell_points", c.min_cell_points},
       {"step_eps", c.step_eps},
       {"max_halvings", c.max_halvings}};
}

inline void from_json(const nlohmann::json& j, NdtConfig& c) {
  json_fields::Reader r(j, "ndt");
  r.read("iters", c.iters);
  r.read("grid", c.grid);
  r.read("max_source", c.max_source);
  r.read("regularization", c.regularization);
  r.read("min_cell_points", c.min_cell_points);
  r.read("step_eps", c.step_eps);
  r.read("max_halvings", c.max_halvings);
  r.finish();
  if (c.iters <= 0 || !(c.grid > 0.0) || c.max_source == 0 || c.min_cell_points == 0) throw SchemaError("ndt: invalid values");
}

}  // namespace baselines

struct AppConfig {
  scenario::ScenarioSpec scenario;
  fusion::FusionConfig fusion;
  localization::LocalizationConfig localization;
  completion::CompletionConfig completion;
  baselines::IcpConfig icp;
  baselines::NdtConfig ndt;
};

inline void to_json(nlohmann::json& j, const AppConfig& c) {
  j = {{"scenario", c.scenario}, {"fusion", c.fusion},   {"localization", c.localization},
       {"completion", c.completion}, {"icp", c.icp}, {"ndt", c.ndt}};
}

inline void from_json(const nlohmann::json& j, AppConfig& c) {
  json_fields::Reader r(j, "config");
  auto section = [&](const char* key, auto& out) {
    nlohmann::json ignored;
    r.read(key, ignored);
    if (const auto it = j.find(key); it != j.end()) it->get_to(out);
  };
  section("scenario", c.scenario);
  section("fusion", c.fusion);
  section("localization", c.localization);
  section("completion", c.completion);
  section("icp", c.icp);
  section("ndt", c.ndt);
  r.finish();
}

/// Value text of an override: JSON if it parses, a plain string otherwise.
inline nlohmann::json override_value(const std::string& text) {
  auto v = nlohmann::json::parse(text, nullptr, false);
  if (v.is_discarded()) return text;
  return v;
}

/// Applies "a.b.c=value" overrides to a config document.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw SchemaError("override '" + assignment + "': expected key=value");
  const std::string path = assignment.substr(0, eq);
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw SchemaError("override '" + assignment + "': empty key");
    if (!node->is_object()) throw SchemaError("override '" + assignment + "': '" + key + "' is not inside an object");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = override_value(assignment.substr(eq + 1));
}

/// Defaults, then the optional JSON file, then the overrides; the result is validated.
inline AppConfig load_config(const nlohmann::json* file, const std::vector<std::string>& overrides) {
  nlohmann::json doc = AppConfig{};
  if (file != nullptr) {
    if (!file->is_object()) throw SchemaError("config: expected an object");
    doc.merge_patch(*file);
  }
  for (const auto& o : overrides) apply_override(doc, o);
  try {
    return doc.get<AppConfig>();
  } catch (const Error&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
}

}  // namespace lgfa
