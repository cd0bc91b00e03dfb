// Copyright 2026 The rtmarl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "rtmarl/harness.hpp"

namespace rtmarl::harness {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

const char* role_color(sim::Role role) {
  switch (role) {
    case sim::Role::kAv: return "#1f77b4";
    case sim::Role::kRedTeam: return "#d62728";
    case sim::Role::kHv: return "#7f7f7f";
  }
  return "#000000";
}

constexpr double kWidth = 640.0;
constexpr double kHeight = 360.0;
constexpr double kMargin = 48.0;

std::string header(double w, double h, const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
         "\" viewBox=\"0 0 " + fmt(w) + " " + fmt(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + fmt(w / 2) + "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
         escape(title) + "</text>\n";
}

}  // namespace

CurveSeries aggregate_curves(std::string label,
                             std::span<const std::vector<algo::EpisodeRecord>> runs) {
  CurveSeries out;
  out.label = std::move(label);
  if (runs.empty()) return out;
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto& r : runs) n = std::min(n, r.size());
  out.mean.assign(n, 0.0);
  out.std.assign(n, 0.0);
  const double k = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (const auto& r : runs) s += r[i].normalized_reward;
    const double m = s / k;
    double v = 0.0;
    for (const auto& r : runs) v += (r[i].normalized_reward - m) * (r[i].normalized_reward - m);
    out.mean[i] = m;
    out.std[i] = std::sqrt(v / k);
  }
  return out;
}

std::string reward_curve_svg(std::span<const CurveSeries> series, const std::string& title) {
  std::size_t n = 0;
  double lo = 0.0, hi = 1.0;
  for (const auto& s : series) {
    n = std::max(n, s.mean.size());
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      lo = std::min(lo, s.mean[i] - s.std[i]);
      hi = std::max(hi, s.mean[i] + s.std[i]);
    }
  }
  const double pw = kWidth - 2 * kMargin;
  const double ph = kHeight - 2 * kMargin;
  const auto px = [&](std::size_t i) {
    return kMargin + (n > 1 ? pw * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0);
  };
  const auto py = [&](double v) { return kMargin + ph * (hi - v) / (hi - lo); };

  std::string svg = header(kWidth, kHeight, title);
  svg += "<rect x=\"" + fmt(kMargin) + "\" y=\"" + fmt(kMargin) + "\" width=\"" + fmt(pw) +
         "\" height=\"" + fmt(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"" + fmt(kHeight - 12) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">episode</text>\n";
  svg += "<text x=\"14\" y=\"" + fmt(kHeight / 2) + "\" transform=\"rotate(-90 14 " + fmt(kHeight / 2) +
         ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">normalized reward</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (s.mean.empty()) continue;
    std::string band;
    for (std::size_t i = 0; i < s.mean.size(); ++i) band += fmt(px(i)) + "," + fmt(py(s.mean[i] + s.std[i])) + " ";
    for (std::size_t i = s.mean.size(); i-- > 0;) band += fmt(px(i)) + "," + fmt(py(s.mean[i] - s.std[i])) + " ";
    band.pop_back();
    svg += "<polygon points=\"" + band + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    std::string line;
    for (std::size_t i = 0; i < s.mean.size(); ++i) line += fmt(px(i)) + "," + fmt(py(s.mean[i])) + " ";
    line.pop_back();
    svg += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    const double ly = kMargin + 16.0 * static_cast<double>(k + 1);
    svg += "<text x=\"" + fmt(kMargin + 8) + "\" y=\"" + fmt(ly) + "\" fill=\"" + color +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + escape(s.label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::string trajectory_svg(const EpisodeLog& log, const sim::WorldConfig& world,
                           const std::string& title) {
  double y_lo = std::numeric_limits<double>::infinity();
  double y_hi = -std::numeric_limits<double>::infinity();
  for (const auto& r : log.rows) {
    y_lo = std::min(y_lo, r.y);
    y_hi = std::max(y_hi, r.y);
  }
  if (log.rows.empty()) {
    y_lo = 0.0;
    y_hi = world.goal_y;
  }
  y_lo -= world.vehicle_length;
  y_hi = std::max(y_hi + world.vehicle_length, y_lo + 1.0);
  const double road = world.road_width();
  const double pw = kWidth - 2 * kMargin;
  const double scale = pw / (y_hi - y_lo);
  const double ph = road * scale * 3.0;  // lateral axis stretched for legibility
  const double h = ph + 2 * kMargin;
  const auto px = [&](double y) { return kMargin + (y - y_lo) * scale; };
  const auto py = [&](double x) { return kMargin + ph * (1.0 - x / road); };

  std::string svg = header(kWidth, h, title);
  svg += "<rect x=\"" + fmt(kMargin) + "\" y=\"" + fmt(kMargin) + "\" width=\"" + fmt(pw) +
         "\" height=\"" + fmt(ph) + "\" fill=\"#f4f4f4\" stroke=\"black\"/>\n";
  for (int lane = 1; lane < world.lane_count; ++lane) {
    const double yy = py(lane * world.lane_width);
    svg += "<line x1=\"" + fmt(kMargin) + "\" y1=\"" + fmt(yy) + "\" x2=\"" + fmt(kMargin + pw) +
           "\" y2=\"" + fmt(yy) + "\" stroke=\"#999999\" stroke-dasharray=\"6,4\"/>\n";
  }
  if (world.goal_y > y_lo && world.goal_y < y_hi) {
    svg += "<line x1=\"" + fmt(px(world.goal_y)) + "\" y1=\"" + fmt(kMargin) + "\" x2=\"" +
           fmt(px(world.goal_y)) + "\" y2=\"" + fmt(kMargin + ph) + "\" stroke=\"#2ca02c\"/>\n";
  }

  std::map<int, std::vector<const TrajectoryRow*>> by_id;
  for (const auto& r : log.rows) by_id[r.id].push_back(&r);
  for (const auto& [id, rows] : by_id) {
    const char* color = role_color(rows.front()->role);
    std::string pts;
    for (const auto* r : rows) pts += fmt(px(r->y)) + "," + fmt(py(r->x)) + " ";
    pts.pop_back();
    svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"><title>" + std::string(sim::role_name(rows.front()->role)) +
           " " + std::to_string(id) + "</title></polyline>\n";
    for (const auto* r : rows) {
      if (r->collision == CollisionMark::kNone) continue;
      const bool striker = r->collision == CollisionMark::kStriker;
      svg += "<circle cx=\"" + fmt(px(r->y)) + "\" cy=\"" + fmt(py(r->x)) + "\" r=\"" +
             (striker ? "6" : "4") + "\" fill=\"none\" stroke=\"black\" stroke-width=\"" +
             (striker ? "2" : "1") + "\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& run_dir,
                                              const std::filesystem::path& out_dir,
                                              const sim::WorldConfig& world,
                                              int max_trajectories_per_run) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(run_dir)) throw FormatError("not a directory: " + run_dir.string());

  // cell directories are <algo>_<scenario>_seed<k>; anything else is its own group
  std::map<std::string, std::map<std::string, std::vector<std::vector<algo::EpisodeRecord>>>> groups;
  std::vector<fs::path> log_dirs;
  std::vector<fs::path> curve_files;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "curves.csv") {
      curve_files.push_back(entry.path());
    }
    if (entry.is_directory() && entry.path().filename() == "logs") log_dirs.push_back(entry.path());
  }
  std::sort(curve_files.begin(), curve_files.end());
  std::sort(log_dirs.begin(), log_dirs.end());
  for (const auto& f : curve_files) {
    const std::string cell = f.parent_path().filename().string();
    std::string label = cell;
    std::string scenario = "run";
    const auto seed_pos = cell.rfind("_seed");
    if (seed_pos != std::string::npos) {
      const auto sc_pos = cell.rfind('_', seed_pos - 1);
      if (sc_pos != std::string::npos) {
        label = cell.substr(0, sc_pos);
        scenario = cell.substr(sc_pos + 1, seed_pos - sc_pos - 1);
      }
    }
    groups[scenario][label].push_back(read_curves_csv(f));
  }
  if (groups.empty() && log_dirs.empty()) {
    throw FormatError("no curves.csv or logs/ under " + run_dir.string());
  }

  std::vector<fs::path> written;
  for (const auto& [scenario, by_label] : groups) {
    std::vector<CurveSeries> series;
    for (const auto& [label, runs] : by_label) series.push_back(aggregate_curves(label, runs));
    const fs::path p = out_dir / ("reward_" + scenario + ".svg");
    write_text(p, reward_curve_svg(series, "normalized reward, " + scenario));
    written.push_back(p);
  }
  for (const auto& dir : log_dirs) {
    std::vector<fs::path> logs;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") logs.push_back(entry.path());
    }
    std::sort(logs.begin(), logs.end());
    const std::string cell = dir.parent_path().filename().string();
    const std::size_t keep = std::min<std::size_t>(logs.size(), static_cast<std::size_t>(std::max(0, max_trajectories_per_run)));
    for (std::size_t i = 0; i < keep; ++i) {
      const EpisodeLog log = read_trajectory_csv(logs[i]);
      const std::string stem = cell + "_" + logs[i].stem().string();
      const fs::path p = out_dir / ("traj_" + stem + ".svg");
      write_text(p, trajectory_svg(log, world, stem));
      written.push_back(p);
    }
  }
  return written;
}

}  // namespace rtmarl::harness
