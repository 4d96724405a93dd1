#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lgfa/bench.hpp"
#include "lgfa/error.hpp"
#include "lgfa/geom.hpp"
#include "lgfa/io.hpp"
#include "lgfa/metrics.hpp"

namespace lgfa::report {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline Table parse_csv(const std::string& text, const std::string& name) {
  Table t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(name + ": empty file");
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split_line(line);
    if (row.size() != t.header.size()) throw SchemaError(name + ": row width differs from header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline double to_double(const std::string& s, const std::string& name) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError(name + ": '" + s + "' is not a number");
  }
}

inline std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct LocAggregate {
  double alpha = 0.0;
  std::string method;
  double trans_mean = 0.0;
  double head_mean = 0.0;
  std::size_t frames = 0;
};

/// Per frame: mean over perturbations; then mean over frames of all seeds.
inline std::vector<LocAggregate> aggregate_loc(const Table& t) {
  const auto ca = t.column("alpha"), cm = t.column("method"), cs = t.column("seed"), cf = t.column("frame");
  const auto ct = t.column("trans_err_m"), ch = t.column("head_err_deg");
  using Key = std::pair<double, int>;
  std::map<Key, std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>>> g;
  for (const auto& r : t.rows) {
    const double alpha = to_double(r[ca], "raw_loc.csv");
    const auto m = static_cast<int>(bench::parse_method(r[cm]));
    auto& cell = g[{alpha, m}][{r[cs], r[cf]}];
    cell.first.push_back(to_double(r[ct], "raw_loc.csv"));
    cell.second.push_back(to_double(r[ch], "raw_loc.csv"));
  }
  std::vector<LocAggregate> out;
  for (const auto& [key, frames] : g) {
    std::vector<std::vector<double>> tr;
    std::vector<std::vector<double>> hd;
    for (const auto& [fk, v] : frames) {
      tr.push_back(v.first);
      hd.push_back(v.second);
    }
    out.push_back({key.first, bench::method_name(static_cast<bench::Method>(key.second)), metrics::nested_mean(tr),
                   metrics::nested_mean(hd), frames.size()});
  }
  return out;
}

inline std::string loc_errors_csv(const std::vector<LocAggregate>& rows) {
  std::string s = "alpha,method,trans_mean_m,head_mean_deg,frames\n";
  for (const auto& r : rows) {
    s += fixed(r.alpha, 2) + "," + r.method + "," + fixed(r.trans_mean) + "," + fixed(r.head_mean) + "," +
         std::to_string(r.frames) + "\n";
  }
  return s;
}

struct MapAggregate {
  SemanticClass cls = SemanticClass::LaneDivider;
  std::optional<metrics::Summary> chamfer;
  std::optional<metrics::Summary> scale;
};

inline std::vector<MapAggregate> aggregate_map(const Table& t) {
  const auto cc = t.column("class"), ch = t.column("chamfer_m"), cs = t.column("scale_err_pct");
  PerClass<std::vector<double>> chamfer;
  PerClass<std::vector<double>> scale;
  for (const auto& r : t.rows) {
    const auto c = parse_class(r[cc]);
    if (!c) throw SchemaError("raw_map.csv: unknown class '" + r[cc] + "'");
    if (!r[ch].empty()) chamfer[*c].push_back(to_double(r[ch], "raw_map.csv"));
    if (!r[cs].empty()) scale[*c].push_back(to_double(r[cs], "raw_map.csv"));
  }
  std::vector<MapAggregate> out;
  for (auto c : kAllClasses) {
    MapAggregate a{c, std::nullopt, std::nullopt};
    if (!chamfer[c].empty()) a.chamfer = metrics::summarize(chamfer[c]);
    if (!scale[c].empty()) a.scale = metrics::summarize(scale[c]);
    out.push_back(a);
  }
  return out;
}

inline std::string map_quality_csv(const std::vector<MapAggregate>& rows) {
  std::string s = "class,N,chamfer_mean_m,chamfer_median_m,chamfer_p90_m,scale_N,scale_mean_pct,scale_median_pct,scale_p90_pct\n";
  auto cells = [](const std::optional<metrics::Summary>& v) {
    if (!v) return std::string("0,,,");
    return std::to_string(v->n) + "," + fixed(v->mean) + "," + fixed(v->median) + "," + fixed(v->p90);
  };
  for (const auto& r : rows) s += std::string(class_name(r.cls)) + "," + cells(r.chamfer) + "," + cells(r.scale) + "\n";
  return s;
}

struct CompletionAggregate {
  SemanticClass cls = SemanticClass::LaneDivider;
  std::size_t seeds = 0;
  double pose_only = 0.0;
  double full = 0.0;
  double min_seed_gain = 0.0;  // smallest per-seed improvement
};

/// Per seed: mean over frames and perturbations; then mean over seeds.
inline std::vector<CompletionAggregate> aggregate_completion(const Table& t) {
  const auto cs = t.column("seed"), cc = t.column("class"), cp = t.column("pose_only_pct"), cf = t.column("full_pct");
  PerClass<std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>> g;
  for (const auto& r : t.rows) {
    const auto c = parse_class(r[cc]);
    if (!c) throw SchemaError("raw_completion.csv: unknown class '" + r[cc] + "'");
    auto& cell = g[*c][r[cs]];
    cell.first.push_back(to_double(r[cp], "raw_completion.csv"));
    cell.second.push_back(to_double(r[cf], "raw_completion.csv"));
  }
  std::vector<CompletionAggregate> out;
  for (auto c : kAllClasses) {
    if (g[c].empty()) continue;
    std::vector<std::vector<double>> po;
    std::vector<std::vector<double>> fu;
    double gain = std::numeric_limits<double>::infinity();
    for (const auto& [seed, v] : g[c]) {
      po.push_back(v.first);
      fu.push_back(v.second);
      gain = std::min(gain, metrics::mean(v.second) - metrics::mean(v.first));
    }
    out.push_back({c, g[c].size(), metrics::nested_mean(po), metrics::nested_mean(fu), gain});
  }
  return out;
}

inline std::string completion_table_csv(const std::vector<CompletionAggregate>& rows) {
  std::string s = "class,seeds,pose_only_pct,full_pct,improvement_pct,min_seed_improvement_pct\n";
  for (const auto& r : rows) {
    s += std::string(class_name(r.cls)) + "," + std::to_string(r.seeds) + "," + fixed(r.pose_only) + "," +
         fixed(r.full) + "," + fixed(r.full - r.pose_only) + "," + fixed(r.min_seed_gain) + "\n";
  }
  return s;
}

namespace svg {

inline constexpr int kWidth = 640;
inline constexpr int kHeight = 400;
inline constexpr int kMargin = 60;

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  return palette[i % 6];
}

inline std::string header(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) + "\" height=\"" +
         std::to_string(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"" +
         std::to_string(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + title + "</text>\n";
}

inline std::string axes(double ymax, const std::string& ylabel) {
  const int x0 = kMargin, y0 = kHeight - kMargin, x1 = kWidth - kMargin / 2, y1 = kMargin;
  std::string s = "<line x1=\"" + std::to_string(x0) + "\" y1=\"" + std::to_string(y0) + "\" x2=\"" + std::to_string(x1) +
                  "\" y2=\"" + std::to_string(y0) + "\" stroke=\"black\"/>\n<line x1=\"" + std::to_string(x0) + "\" y1=\"" +
                  std::to_string(y0) + "\" x2=\"" + std::to_string(x0) + "\" y2=\"" + std::to_string(y1) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0;
    const double y = y0 - (y0 - y1) * k / 4.0;
    s += "<text x=\"" + std::to_string(x0 - 6) + "\" y=\"" + fixed(y + 4, 1) + "\" text-anchor=\"end\">" + fixed(v, 2) + "</text>\n";
  }
  s += "<text x=\"16\" y=\"" + std::to_string((y0 + y1) / 2) + "\" transform=\"rotate(-90 16 " + std::to_string((y0 + y1) / 2) +
       ")\" text-anchor=\"middle\">" + ylabel + "</text>\n";
  return s;
}

/// Error versus alpha, one polyline per method.
inline std::string loc_chart(const std::vector<LocAggregate>& rows, bool heading) {
  std::vector<double> alphas;
  std::vector<std::string> methods;
  double ymax = 0.0;
  for (const auto& r : rows) {
    if (std::find(alphas.begin(), alphas.end(), r.alpha) == alphas.end()) alphas.push_back(r.alpha);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    ymax = std::max(ymax, heading ? r.head_mean : r.trans_mean);
  }
  std::sort(alphas.begin(), alphas.end());
  ymax = ymax > 0.0 ? ymax * 1.1 : 1.0;
  std::string s = header(heading ? "Heading error vs alpha" : "Translation error vs alpha");
  s += axes(ymax, heading ? "mean heading error (deg)" : "mean translation error (m)");
  const int x0 = kMargin, y0 = kHeight - kMargin, x1 = kWidth - kMargin / 2 - 90, y1 = kMargin;
  auto xpos = [&](std::size_t i) {
    return alphas.size() <= 1 ? (x0 + x1) / 2.0 : x0 + 20 + (x1 - x0 - 40) * static_cast<double>(i) / (alphas.size() - 1);
  };
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    s += "<text x=\"" + fixed(xpos(i), 1) + "\" y=\"" + std::to_string(y0 + 18) + "\" text-anchor=\"middle\">alpha=" +
         fixed(alphas[i], 1) + "</text>\n";
  }
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::string pts;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      for (const auto& r : rows) {
        if (r.method != methods[m] || r.alpha != alphas[i]) continue;
        const double v = heading ? r.head_mean : r.trans_mean;
        const double y = y0 - (y0 - y1) * v / ymax;
        pts += fixed(xpos(i), 1) + "," + fixed(y, 1) + " ";
        s += "<circle cx=\"" + fixed(xpos(i), 1) + "\" cy=\"" + fixed(y, 1) + "\" r=\"3\" fill=\"" + color(m) + "\"/>\n";
      }
    }
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color(m)) + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    s += "<text x=\"" + std::to_string(kWidth - 100) + "\" y=\"" + std::to_string(kMargin + 18 * static_cast<int>(m)) +
         "\" fill=\"" + color(m) + "\">" + methods[m] + "</text>\n";
  }
  return s + "</svg>\n";
}

/// Pose-only and full completion rate per class as grouped bars.
inline std::string completion_chart(const std::vector<CompletionAggregate>& rows) {
  std::string s = header("Completion rate per class");
  s += axes(100.0, "completion rate (%)");
  const int x0 = kMargin, y0 = kHeight - kMargin, x1 = kWidth - kMargin / 2, y1 = kMargin;
  const double group = rows.empty() ? 1.0 : static_cast<double>(x1 - x0) / rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double gx = x0 + group * i;
    const double bw = group * 0.3;
    const double vals[2] = {rows[i].pose_only, rows[i].full};
    for (int b = 0; b < 2; ++b) {
      const double h = (y0 - y1) * std::clamp(vals[b], 0.0, 100.0) / 100.0;
      s += "<rect x=\"" + fixed(gx + group * 0.15 + b * bw, 1) + "\" y=\"" + fixed(y0 - h, 1) + "\" width=\"" + fixed(bw, 1) +
           "\" height=\"" + fixed(h, 1) + "\" fill=\"" + color(static_cast<std::size_t>(b)) + "\"/>\n";
    }
    s += "<text x=\"" + fixed(gx + group / 2, 1) + "\" y=\"" + std::to_string(y0 + 18) + "\" text-anchor=\"middle\">" +
         std::string(class_name(rows[i].cls)) + "</text>\n";
  }
  s += "<text x=\"" + std::to_string(kWidth - 120) + "\" y=\"" + std::to_string(kMargin) + "\" fill=\"" + color(0) +
       "\">pose-only</text>\n<text x=\"" + std::to_string(kWidth - 120) + "\" y=\"" + std::to_string(kMargin + 18) +
       "\" fill=\"" + color(1) + "\">full</text>\n";
  return s + "</svg>\n";
}

}  // namespace svg

/// Reads raw_loc.csv, raw_map.csv and raw_completion.csv from in_dir (each optional) and writes
/// the aggregate tables and charts into out_dir. Returns the number of tables written.
inline int write_report(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  int written = 0;
  if (const auto p = in_dir / "raw_loc.csv"; std::filesystem::exists(p)) {
    const auto rows = aggregate_loc(parse_csv(io::read_text(p), p.string()));
    io::write_text(out_dir / "loc_errors.csv", loc_errors_csv(rows));
    io::write_text(out_dir / "loc_translation.svg", svg::loc_chart(rows, false));
    io::write_text(out_dir / "loc_heading.svg", svg::loc_chart(rows, true));
    ++written;
  }
  if (const auto p = in_dir / "raw_map.csv"; std::filesystem::exists(p)) {
    io::write_text(out_dir / "map_quality.csv", map_quality_csv(aggregate_map(parse_csv(io::read_text(p), p.string()))));
    ++written;
  }
  if (const auto p = in_dir / "raw_completion.csv"; std::filesystem::exists(p)) {
    const auto rows = aggregate_completion(parse_csv(io::read_text(p), p.string()));
    io::write_text(out_dir / "completion.csv", completion_table_csv(rows));
    io::write_text(out_dir / "completion.svg", svg::completion_chart(rows));
    ++written;
  }
  if (written == 0) throw SchemaError("report: no raw_*.csv inputs in " + in_dir.string());
  return written;
}

}  // namespace lgfa::report
