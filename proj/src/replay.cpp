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
#include <map>
#include <ostream>

#include "rtmarl/harness.hpp"

namespace rtmarl::harness {

namespace {

constexpr int kColumns = 61;
constexpr double kMetersPerColumn = 2.0;

char glyph(const TrajectoryRow& r) {
  if (r.collision != CollisionMark::kNone) return 'X';
  switch (r.role) {
    case sim::Role::kAv: return 'A';
    case sim::Role::kRedTeam: return 'R';
    case sim::Role::kHv: return 'H';
  }
  return '?';
}

}  // namespace

ReplaySummary replay(const EpisodeLog& log, std::ostream& out, const sim::WorldConfig& world) {
  ReplaySummary summary;
  std::map<int, std::vector<const TrajectoryRow*>> by_step;
  for (const auto& r : log.rows) by_step[r.step].push_back(&r);

  for (const auto& [step, rows] : by_step) {
    // window follows the first AV, or the first vehicle when there is none
    const TrajectoryRow* anchor = rows.front();
    for (const auto* r : rows) {
      if (r->role == sim::Role::kAv) {
        anchor = r;
        break;
      }
    }
    const double y0 = anchor->y - kMetersPerColumn * (kColumns / 2);
    std::vector<std::string> lanes(static_cast<std::size_t>(world.lane_count), std::string(kColumns, '.'));
    for (const auto* r : rows) {
      const int col = static_cast<int>(std::floor((r->y - y0) / kMetersPerColumn + 0.5));
      if (col < 0 || col >= kColumns) continue;
      const int lane = std::clamp(r->lane, 0, world.lane_count - 1);
      char& cell = lanes[static_cast<std::size_t>(lane)][static_cast<std::size_t>(col)];
      cell = (cell == '.' || glyph(*r) == 'X') ? glyph(*r) : '*';
      if (r->collision != CollisionMark::kNone && !summary.collision_step) summary.collision_step = step;
      if (r->collision == CollisionMark::kStriker && summary.striker_id < 0) summary.striker_id = r->id;
      if (r->collision == CollisionMark::kStruck && summary.struck_id < 0) summary.struck_id = r->id;
    }
    char head[64];
    std::snprintf(head, sizeof head, "step %3d  t=%5.1fs  y0=%7.1f\n", step, rows.front()->time, y0);
    out << head;
    // leftmost lane printed last so the picture reads like a top view facing +y
    for (int lane = world.lane_count - 1; lane >= 0; --lane) {
      out << "  |" << lanes[static_cast<std::size_t>(lane)] << "|\n";
    }
    summary.steps = std::max(summary.steps, step);
  }

  const EpisodeLog logs[] = {log};
  summary.metrics = metrics_from_logs(logs);
  out << "steps: " << summary.steps << "\n";
  if (summary.collision_step) {
    out << "collision at step " << *summary.collision_step << ": striker " << summary.striker_id
        << ", struck " << summary.struck_id << "\n";
  } else {
    out << "no collision\n";
  }
  out << "CR " << summary.metrics.collision_rate << "%  ALA " << summary.metrics.avg_lateral_accel
      << "  AS " << summary.metrics.avg_speed;
  if (summary.metrics.travel_time) out << "  TT " << *summary.metrics.travel_time;
  out << "\n";
  return summary;
}

}  // namespace rtmarl::harness
