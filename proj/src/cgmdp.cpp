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
#include <limits>

#include "rtmarl/cgmdp.hpp"

namespace rtmarl::cgmdp {

ActionTable::ActionTable(const sim::WorldConfig& cfg) {
  int k = 0;
  for (int i = 0; i < 11; ++i) {
    entries_[k++] = {cfg.a_max * (i - 5) / 5.0, 0.0};
  }
  for (int i = 0; i < 13; ++i) {
    if (i == 6) continue;  // (0, 0) is already the hold action
    entries_[k++] = {0.0, cfg.delta_max * (i - 6) / 6.0};
  }
}

int ActionMask::count() const {
  int total = 0;
  for (auto flag : legal) total += flag != 0;
  return total;
}

nn::Tensor2 encode_node_features(std::span<const sim::VehicleState> vehicles,
                                 const sim::WorldConfig& cfg) {
  std::vector<const sim::VehicleState*> order;
  for (const auto& v : vehicles) order.push_back(&v);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });

  auto unit = [](double value) { return std::clamp(value, -1.0, 1.0); };
  nn::Tensor2 features(order.size(), kFeatureCount);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& v = *order[i];
    auto row = features.row(i);
    row[0] = unit(v.x / cfg.road_width());
    row[1] = unit(v.y / cfg.road_length);
    row[2] = unit(v.theta / cfg.theta_max);
    row[3] = unit(v.v / cfg.v_max);
    row[4 + std::clamp(v.lane, 0, 2)] = 1.0;
    row[7 + static_cast<int>(v.role)] = 1.0;
    const auto nb = resolve_neighbors(v, vehicles, cfg);
    for (std::size_t s = 0; s < nb.size(); ++s) {
      row[10 + 2 * s] = unit(nb[s].delta_d / cfg.sensing_range);
      row[11 + 2 * s] = unit(nb[s].delta_v / cfg.v_max);
    }
  }
  return features;
}

nn::Tensor2 build_adjacency(std::span<const sim::VehicleState> vehicles,
                            const sim::WorldConfig& cfg) {
  std::vector<const sim::VehicleState*> order;
  for (const auto& v : vehicles) order.push_back(&v);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });

  const std::size_t n = order.size();
  nn::Tensor2 adjacency(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    adjacency(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool red_i = order[i]->role == sim::Role::kRedTeam;
      const bool red_j = order[j]->role == sim::Role::kRedTeam;
      bool linked = false;
      if (red_i && red_j) {
        linked = true;
      } else if (red_i || red_j) {
        linked = std::hypot(order[i]->x - order[j]->x, order[i]->y - order[j]->y) <=
                 cfg.sensing_range;
      }
      adjacency(i, j) = adjacency(j, i) = linked ? 1.0 : 0.0;
    }
  }
  return adjacency;
}

GraphState encode_graph(std::span<const sim::VehicleState> vehicles,
                        const sim::WorldConfig& cfg) {
  if (vehicles.empty()) throw std::invalid_argument("encode_graph: no vehicles");
  GraphState state;
  state.n = static_cast<int>(vehicles.size());
  state.node_features = encode_node_features(vehicles, cfg);
  state.adjacency = build_adjacency(vehicles, cfg);
  std::vector<const sim::VehicleState*> order;
  for (const auto& v : vehicles) order.push_back(&v);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (const auto* v : order) {
    state.mask.push_back(v->role == sim::Role::kRedTeam ? 1 : 0);
    state.ids.push_back(v->id);
  }
  return state;
}

namespace {

using Trajectory = std::vector<sim::VehicleState>;

// first for one tick, then second_steer for one tick, then first.accel with
// zero steering
Trajectory rollout(const sim::VehicleState& start, sim::Control first, int horizon,
                   const sim::WorldConfig& cfg, double second_steer = 0.0) {
  Trajectory path;
  path.reserve(horizon);
  sim::VehicleState s = start;
  for (int h = 0; h < horizon; ++h) {
    const double steer = h == 0 ? first.steer : (h == 1 ? second_steer : 0.0);
    s = sim::step_kinematics(s, {first.accel, steer}, cfg);
    path.push_back(s);
  }
  return path;
}

bool off_road(const sim::VehicleState& s, const sim::WorldConfig& cfg) {
  const double half = sim::lateral_half_extent(s);
  return s.x - half < 0.0 || s.x + half > cfg.road_width();
}

// Ticks each action stays clean under one margin: -1 when a one-shot rule
// (speed cap, lane-change gap) rejects it, horizon when it passes every check.
std::array<int, kActionCount> survival(const sim::VehicleState& vehicle,
                                       std::span<const PlannedMotion> others,
                                       const ActionTable& table, const sim::WorldConfig& cfg,
                                       const OmegaParams& params,
                                       const av::AvPolicyConfig* av_policy) {
  const int horizon = std::max(1, params.horizon_steps);
  const double span_t = horizon * cfg.dt;

  std::vector<sim::VehicleState> other_states;
  for (const auto& o : others) other_states.push_back(o.state);
  const auto nb = resolve_neighbors(vehicle, other_states, cfg);

  // Candidate paths of nearby vehicles; far ones cannot be reached in the horizon.
  std::vector<const Trajectory*> fixed;
  std::vector<std::vector<Trajectory>> variants;
  std::vector<std::size_t> reactive;
  const double ego_reach = (vehicle.v + cfg.a_max * span_t) * span_t;
  for (std::size_t j = 0; j < others.size(); ++j) {
    const auto& o = others[j];
    const double reach = ego_reach + (o.state.v + cfg.a_max * span_t) * span_t +
                         0.5 * (std::hypot(vehicle.length, vehicle.width) +
                                std::hypot(o.state.length, o.state.width));
    if (std::hypot(o.state.x - vehicle.x, o.state.y - vehicle.y) > reach) continue;
    std::vector<Trajectory> paths;
    if (o.control && o.state.role == sim::Role::kAv) {
      // the AV re-plans its steering every tick
      for (double steer : {-cfg.delta_max, 0.0, cfg.delta_max}) {
        paths.push_back(rollout(o.state, *o.control, horizon, cfg, steer));
      }
      if (av_policy != nullptr && o.memory) reactive.push_back(j);
    } else if (o.control) {
      paths.push_back(rollout(o.state, *o.control, horizon, cfg));
    } else {
      for (const auto& c : table.entries()) paths.push_back(rollout(o.state, c, horizon, cfg));
    }
    variants.push_back(std::move(paths));
  }
  for (const auto& v : variants) {
    for (const auto& p : v) fixed.push_back(&p);
  }

  // What the AV sees around it: planned vehicles hold their command, the
  // other red-team vehicles hold their speed.
  std::vector<Trajectory> background;
  if (!reactive.empty()) {
    for (const auto& o : others) {
      const sim::Control c = o.control ? *o.control : table[ActionTable::kHoldAction];
      background.push_back(rollout(o.state, {c.accel, c.steer}, horizon, cfg, 0.0));
    }
  }

  const double lane_lo = cfg.lane_center(0);
  const double lane_hi = cfg.lane_center(cfg.lane_count - 1);

  std::array<int, kActionCount> ticks{};
  std::vector<sim::VehicleState> scene;
  for (int k = 0; k < kActionCount; ++k) {
    const sim::Control c = table[k];
    bool legal = vehicle.v + c.accel * cfg.dt <= cfg.v_max + 1e-9;

    if (legal && c.steer != 0.0) {
      const std::size_t front = c.steer < 0.0 ? 2 : 4;
      for (std::size_t s : {front, front + 1}) {
        if (!nb[s].present()) continue;
        const auto& o = *std::find_if(other_states.begin(), other_states.end(),
                                      [&](const auto& v) { return v.id == nb[s].vehicle_id; });
        const double clearance = std::abs(nb[s].delta_d) - 0.5 * (vehicle.length + o.length);
        if (clearance < params.lane_change_clearance) legal = false;
      }
    }

    int clean = -1;
    if (legal) {
      const Trajectory path = rollout(vehicle, c, horizon, cfg);

      // the AV driven by its own controller against this candidate
      std::vector<Trajectory> responses;
      for (std::size_t j : reactive) {
        Trajectory av_path;
        sim::VehicleState av = sim::step_kinematics(others[j].state, *others[j].control, cfg);
        av::AvMemory memory = *others[j].memory;
        av_path.push_back(av);
        for (int h = 1; h < horizon; ++h) {
          scene.clear();
          scene.push_back(path[h - 1]);
          for (std::size_t i = 0; i < others.size(); ++i) {
            if (i != j) scene.push_back(background[i][h - 1]);
          }
          const auto decision = av::av_decide(av, scene, *av_policy, cfg, memory);
          memory = decision.memory;
          av = sim::step_kinematics(av, decision.control, cfg);
          av_path.push_back(av);
        }
        responses.push_back(std::move(av_path));
      }
      std::vector<const Trajectory*> paths = fixed;
      for (const auto& r : responses) paths.push_back(&r);

      std::vector<bool> settled(paths.size(), false);
      for (int h = 0; h < horizon && legal; ++h) {
        clean = h;
        const auto& s = path[h];
        if (off_road(s, cfg)) {
          legal = false;
          break;
        }
        sim::VehicleState padded = s;
        padded.length += 2.0 * params.safety_margin;
        padded.width += 2.0 * params.safety_margin;
        for (std::size_t p = 0; p < paths.size(); ++p) {
          if (settled[p]) continue;
          const auto& o = (*paths[p])[h];
          if (!sim::footprints_overlap(padded, o)) continue;
          // background traffic only follows its plan for one tick, so any
          // contact with it counts; elsewhere only striking is forbidden
          if (o.role == sim::Role::kHv || sim::attribute_striker(padded, o) == vehicle.id) {
            legal = false;
            break;
          }
          if (sim::footprints_overlap(s, o)) {
            if (sim::attribute_striker(s, o) == vehicle.id) {
              legal = false;
              break;
            }
            // the other vehicle strikes first
            settled[p] = true;
          }
        }
      }
      if (legal) {
        clean = horizon;
        const double x_end = path.back().x;
        // drifting out past the outer lane centres: clean, but not quite
        if ((x_end < lane_lo && x_end < vehicle.x - 1e-9) ||
            (x_end > lane_hi && x_end > vehicle.x + 1e-9)) {
          clean = horizon - 1;
        }
      }
    }
    ticks[k] = clean;
  }
  return ticks;
}

ActionMask best_of(const std::array<int, kActionCount>& ticks, int at_least) {
  const int top = *std::max_element(ticks.begin(), ticks.end());
  ActionMask mask;
  if (top < at_least) return mask;
  for (int k = 0; k < kActionCount; ++k) mask.legal[k] = ticks[k] == top ? 1 : 0;
  return mask;
}

}  // namespace

ActionMask legal_actions(const sim::VehicleState& vehicle, std::span<const PlannedMotion> others,
                         const ActionTable& table, const sim::WorldConfig& cfg,
                         const OmegaParams& params, const av::AvPolicyConfig* av_policy) {
  if (vehicle.role != sim::Role::kRedTeam) {
    throw std::invalid_argument("legal_actions: vehicle " + std::to_string(vehicle.id) +
                                " is not red-team");
  }
  const int horizon = std::max(1, params.horizon_steps);
  ActionMask mask = best_of(survival(vehicle, others, table, cfg, params, av_policy), horizon);
  if (mask.count() > 0) return mask;
  // Nothing clears the padded rollout. Fall back to the bare footprint and
  // keep whatever stays clean longest, as long as the next tick is safe.
  OmegaParams bare = params;
  bare.safety_margin = 0.0;
  mask = best_of(survival(vehicle, others, table, cfg, bare, av_policy), 1);
  mask.fallback = true;
  if (mask.count() == 0) {
    mask.legal[ActionTable::kMaxBrakeAction] = 1;
    mask.forced = true;
  }
  return mask;
}

double threat_phi1(double ttc, const sim::WorldConfig& cfg) {
  if (!std::isfinite(ttc)) return 0.0;
  return std::clamp(1.0 - ttc / cfg.ttc_threshold, 0.0, 1.0);
}

double threat_phi2(double av_accel, double av_heading, const ThreatParams& p) {
  const bool maneuvering =
      std::abs(av_accel) > p.accel_scale || std::abs(av_heading) > p.heading_scale;
  if (!maneuvering) return 0.0;
  return std::min(1.0, 0.5 * std::abs(av_accel) / p.accel_scale +
                           0.5 * std::abs(av_heading) / p.heading_scale);
}

ThreatReport compute_ptz(std::span<const sim::VehicleState> vehicles, const sim::WorldConfig& cfg,
                         const ThreatParams& params) {
  ThreatReport report;
  for (const auto& av : vehicles) {
    if (av.role != sim::Role::kAv) continue;
    const double phi2 = threat_phi2(av.a_lon, av.theta, params);
    for (const auto& red : vehicles) {
      if (red.role != sim::Role::kRedTeam) continue;
      const double ttc = sim::compute_ttc(av, red, cfg);
      const double phi1 = threat_phi1(ttc, cfg);
      if (phi1 > 0.0 || phi2 > 0.0) {
        report.pairs.push_back({av.id, red.id, phi1, phi2, ttc});
        report.scenario_threat = std::max(report.scenario_threat, std::max(phi1, phi2));
      }
    }
  }
  return report;
}

namespace {

const sim::VehicleState& by_id(std::span<const sim::VehicleState> vehicles, int id) {
  for (const auto& v : vehicles) {
    if (v.id == id) return v;
  }
  throw std::invalid_argument("no vehicle with id " + std::to_string(id));
}

}  // namespace

double compute_reward(std::span<const sim::VehicleState> /*prev*/,
                      std::span<const sim::VehicleState> curr,
                      std::span<const sim::CollisionEvent> events, const ThreatReport& threat,
                      int red_id, const sim::WorldConfig& cfg, const RewardParams& p) {
  const auto& red = by_id(curr, red_id);
  if (red.role != sim::Role::kRedTeam) {
    throw std::invalid_argument("compute_reward: vehicle " + std::to_string(red_id) +
                                " is not red-team");
  }

  double r_col = 0.0;
  for (const auto& e : events) {
    if (by_id(curr, e.striker_id).role == sim::Role::kAv &&
        by_id(curr, e.struck_id).role == sim::Role::kRedTeam) {
      r_col = p.c0;
    }
  }

  double r_dan = 0.0;
  double r_vel = 0.0;
  const sim::VehicleState* follower = nullptr;
  for (const auto& v : curr) {
    if (v.role != sim::Role::kAv || v.lane != red.lane) continue;
    const double d = red.y - v.y;
    if (d < 0.0 || d > cfg.sensing_range) continue;
    if (follower == nullptr || d < red.y - follower->y) follower = &v;
  }
  if (follower != nullptr) {
    const double d = red.y - follower->y;
    r_dan = std::clamp((p.d_safe - d) / p.d_safe, 0.0, 1.0);
    r_vel = std::clamp((follower->v - red.v) / 10.0, -1.0, 1.0);
  }

  const double r_com = -std::min(1.0, (std::abs(red.a_lat) + std::abs(red.a_lon)) / cfg.a_max);

  return p.w_col * r_col + p.w_dan * r_dan + p.w_vel * r_vel + p.w_com * r_com +
         p.w_ptz * threat.scenario_threat;
}

bool inertial_interference(const CostHistory& history, int red_id, const CostParams& p) {
  if (history.size() < 2) return false;
  const std::size_t last = history.size() - 1;
  const std::size_t first = last >= static_cast<std::size_t>(p.k) ? last - p.k + 1 : 1;

  // Earliest lane-change onset by any AV inside the window.
  std::size_t onset = 0;
  for (std::size_t f = first; f <= last && onset == 0; ++f) {
    for (const auto& now : history[f].vehicles) {
      if (now.role != sim::Role::kAv) continue;
      for (const auto& before : history[f - 1].vehicles) {
        if (before.id != now.id) continue;
        const bool lane_changed = before.lane != now.lane;
        const bool heading_crossed = std::abs(before.theta) <= p.lane_change_heading &&
                                     std::abs(now.theta) > p.lane_change_heading;
        if (lane_changed || heading_crossed) onset = f;
      }
      if (onset != 0) break;
    }
  }
  if (onset == 0) return false;

  for (std::size_t f = onset; f <= last; ++f) {
    bool found = false;
    for (const auto& [id, control] : history[f].red_controls) {
      if (id != red_id) continue;
      found = true;
      if (std::abs(control.accel) >= p.response_accel ||
          std::abs(control.steer) >= p.response_steer) {
        return false;
      }
    }
    if (!found) return false;
  }
  return true;
}

double compute_cost(const CostHistory& history, int red_id, const sim::WorldConfig& cfg,
                    const CostParams& p) {
  if (history.empty()) throw std::invalid_argument("compute_cost: empty history");
  const auto& curr = history.back().vehicles;
  const auto& red = by_id(curr, red_id);
  double ttc_min = std::numeric_limits<double>::infinity();
  for (const auto& v : curr) {
    if (v.role == sim::Role::kAv) ttc_min = std::min(ttc_min, sim::compute_ttc(red, v, cfg));
  }
  const double f4 = std::isfinite(ttc_min) ? std::clamp(ttc_min / cfg.ttc_threshold, 0.0, 1.0)
                                           : 1.0;
  const double c_int = inertial_interference(history, red_id, p) ? p.c1 : 0.0;
  return p.w_int * c_int + p.w_ttc * f4;
}

}  // namespace rtmarl::cgmdp
