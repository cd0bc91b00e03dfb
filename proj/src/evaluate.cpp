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

#include <cmath>
#include <map>

#include "rtmarl/harness.hpp"
#include "rtmarl/random.hpp"

namespace rtmarl::harness {

namespace {

// running sums shared by evaluate and the log recomputation so both add in
// the same order
struct MetricSums {
  int episodes = 0;
  int collisions = 0;
  double tt_sum = 0.0;
  int tt_count = 0;
  double lat_sum = 0.0;
  double speed_sum = 0.0;
  long av_steps = 0;

  void add_av_step(double a_lat, double v) {
    lat_sum += std::abs(a_lat);
    speed_sum += v;
    ++av_steps;
  }

  void end_episode(bool collision, const std::vector<double>& arrival_times, int av_count) {
    ++episodes;
    if (collision) {
      ++collisions;
      return;
    }
    if (av_count == 0 || static_cast<int>(arrival_times.size()) != av_count) return;
    double s = 0.0;
    for (double t : arrival_times) s += t;
    tt_sum += s / av_count;
    ++tt_count;
  }

  EvalMetrics finish() const {
    EvalMetrics m;
    m.episodes = episodes;
    m.collision_rate = episodes > 0 ? 100.0 * collisions / episodes : 0.0;
    if (tt_count > 0) m.travel_time = tt_sum / tt_count;
    if (av_steps > 0) {
      m.avg_lateral_accel = lat_sum / static_cast<double>(av_steps);
      m.avg_speed = speed_sum / static_cast<double>(av_steps);
    }
    return m;
  }
};

TrajectoryRow row_of(const sim::VehicleState& v, int step, double dt) {
  TrajectoryRow r;
  r.step = step;
  r.time = step * dt;
  r.id = v.id;
  r.role = v.role;
  r.x = v.x;
  r.y = v.y;
  r.theta = v.theta;
  r.v = v.v;
  r.a_lon = v.a_lon;
  r.a_lat = v.a_lat;
  r.lane = v.lane;
  return r;
}

}  // namespace

EvalResult evaluate(const algo::RedTeamModel* model, const cgmdp::EnvConfig& env_cfg,
                    cgmdp::Scenario scenario, const EvalOptions& opts) {
  if (opts.episodes <= 0) throw std::invalid_argument("evaluate: episodes must be positive");
  env_cfg.validate();
  if (model != nullptr && model->shape().encoder == nn::EncoderKind::kFlat &&
      model->shape().nodes != algo::scenario_vehicle_count(scenario)) {
    throw FormatError("evaluate: checkpoint was built for " +
                      std::to_string(model->shape().nodes) + " vehicles, scenario " +
                      std::string(cgmdp::scenario_name(scenario)) + " has " +
                      std::to_string(algo::scenario_vehicle_count(scenario)));
  }
  const double dt = env_cfg.world.dt;
  cgmdp::Environment env(env_cfg);
  EvalResult result;
  MetricSums sums;
  for (int ep = 0; ep < opts.episodes; ++ep) {
    const auto e = static_cast<std::uint64_t>(ep);
    env.reset(scenario, derive_seed(opts.seed, algo::kEvalStream, e), model != nullptr);
    std::mt19937_64 rng(derive_seed(opts.seed, algo::kEvalStream ^ algo::kActStream, e));
    EpisodeLog log;
    EpisodeSummary summary;
    for (const auto& v : env.vehicles()) log.rows.push_back(row_of(v, 0, dt));
    std::map<int, double> arrivals;
    int av_count = 0;
    for (const auto& v : env.vehicles()) av_count += v.role == sim::Role::kAv ? 1 : 0;
    double cost_sum = 0.0;
    while (!env.done()) {
      std::vector<int> actions;
      if (model != nullptr) {
        actions = model->act(env.observe(), env.agent_rows(), env.legal_masks(), rng, opts.greedy);
      }
      const cgmdp::StepOutcome out = env.step(actions);
      const int step = env.step_count();
      ++summary.steps;
      if (model != nullptr && !out.costs.empty()) {
        double s = 0.0;
        for (double c : out.costs) s += c;
        cost_sum += s / static_cast<double>(out.costs.size());
      }
      for (const auto& [id, t] : out.info.goal_crossings) arrivals[id] = t;
      for (const auto& v : env.vehicles()) {
        TrajectoryRow r = row_of(v, step, dt);
        for (const auto& ev : out.info.collisions) {
          if (ev.striker_id == v.id) r.collision = CollisionMark::kStriker;
          if (ev.struck_id == v.id && r.collision == CollisionMark::kNone) {
            r.collision = CollisionMark::kStruck;
          }
        }
        for (const auto& [id, t] : out.info.goal_crossings) r.goal = r.goal || id == v.id;
        log.rows.push_back(r);
      }
      for (const auto& av : out.info.avs) sums.add_av_step(av.a_lat, av.v);
      for (const auto& ev : out.info.collisions) {
        const auto role = [&](int id) {
          for (const auto& v : env.vehicles()) {
            if (v.id == id) return v.role;
          }
          return sim::Role::kHv;
        };
        const bool involves_av = role(ev.striker_id) == sim::Role::kAv || role(ev.struck_id) == sim::Role::kAv;
        if (role(ev.striker_id) == sim::Role::kRedTeam) summary.red_striker = true;
        if (summary.collision_step < 0 || (involves_av && !summary.av_collision)) {
          summary.collision_step = step;
          summary.striker_id = ev.striker_id;
          summary.struck_id = ev.struck_id;
          summary.time_to_collision = step * dt;
        }
        summary.av_collision = summary.av_collision || involves_av;
      }
    }
    summary.mean_cost = summary.steps > 0 ? cost_sum / summary.steps : 0.0;
    std::vector<double> times;
    for (const auto& [id, t] : arrivals) times.push_back(t);
    sums.end_episode(summary.av_collision, times, av_count);
    result.episodes.push_back(summary);
    result.logs.push_back(std::move(log));
  }
  result.metrics = sums.finish();
  return result;
}

EvalMetrics metrics_from_logs(std::span<const EpisodeLog> logs) {
  MetricSums sums;
  for (const auto& log : logs) {
    bool collision = false;
    std::map<int, double> arrivals;
    std::map<int, bool> avs;
    for (const auto& r : log.rows) {
      if (r.role != sim::Role::kAv) continue;
      avs[r.id] = true;
      if (r.step > 0) sums.add_av_step(r.a_lat, r.v);
      collision = collision || r.collision != CollisionMark::kNone;
      if (r.goal) arrivals[r.id] = r.time;
    }
    std::vector<double> times;
    for (const auto& [id, t] : arrivals) times.push_back(t);
    sums.end_episode(collision, times, static_cast<int>(avs.size()));
  }
  return sums.finish();
}

}  // namespace rtmarl::harness
