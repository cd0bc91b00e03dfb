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
#include <random>

#include "rtmarl/cgmdp.hpp"
#include "rtmarl/random.hpp"

namespace rtmarl::cgmdp {

Scenario scenario_from_name(std::string_view name) {
  if (name == "svi" || name == "SVI") return Scenario::kSvi;
  if (name == "mvi" || name == "MVI") return Scenario::kMvi;
  throw std::invalid_argument("unknown scenario tag '" + std::string(name) +
                              "' (expected svi or mvi)");
}

std::string_view scenario_name(Scenario scenario) {
  return scenario == Scenario::kSvi ? "svi" : "mvi";
}

void EnvConfig::validate() const {
  world.validate();
  av.validate(world);
  if (scenario.horizon <= 0) throw std::invalid_argument("scenario.horizon must be positive");
  if (scenario.position_jitter < 0.0 || scenario.speed_jitter < 0.0) {
    throw std::invalid_argument("scenario jitter must be non-negative");
  }
  if (scenario.lead_brake_onset_min < 0.0 ||
      scenario.lead_brake_onset_max < scenario.lead_brake_onset_min) {
    throw std::invalid_argument("scenario lead brake onset range is invalid");
  }
  if (!(scenario.lead_brake_decel > 0.0 && scenario.lead_brake_decel <= world.a_max)) {
    throw std::invalid_argument("scenario.lead_brake_decel must lie in (0, a_max]");
  }
  if (cost.k <= 0) throw std::invalid_argument("constants.k must be positive");
  if (omega.horizon_steps <= 0) throw std::invalid_argument("omega horizon must be positive");
  if (reward.d_safe <= 0.0) throw std::invalid_argument("constants.d_safe must be positive");
}

IllegalActionError::IllegalActionError(int vehicle_id, int action_id, ActionMask mask)
    : std::runtime_error([&] {
        std::string legal;
        for (int k = 0; k < kActionCount; ++k) {
          if (mask[k]) legal += (legal.empty() ? "" : ",") + std::to_string(k);
        }
        return "illegal action " + std::to_string(action_id) + " for red-team vehicle " +
               std::to_string(vehicle_id) + "; legal actions: {" + legal + "}";
      }()),
      vehicle_id_(vehicle_id),
      action_id_(action_id),
      mask_(mask) {}

namespace {

struct Placement {
  sim::Role role;
  int lane;
  double y;
  double v;
};

}  // namespace

Environment::Environment(EnvConfig cfg) : cfg_(std::move(cfg)), table_(cfg_.world) {
  cfg_.validate();
}

GraphState Environment::reset(Scenario scenario, std::uint64_t seed, bool interference) {
  scenario_ = scenario;
  interference_ = interference;
  step_ = 0;
  done_ = false;

  std::vector<Placement> layout = {
      {sim::Role::kAv, 1, 0.0, 14.0},
      {sim::Role::kRedTeam, 1, 30.0, 14.0},
      {sim::Role::kHv, 0, 15.0, 13.0},
      {sim::Role::kHv, 2, 20.0, 13.0},
  };
  if (scenario == Scenario::kMvi) {
    layout.push_back({sim::Role::kAv, 2, -5.0, 14.0});
    layout.push_back({sim::Role::kRedTeam, 0, 35.0, 14.0});
  }

  std::mt19937_64 rng(seed);
  const auto& sc = cfg_.scenario;
  vehicles_.clear();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& p = layout[i];
    sim::VehicleState v;
    v.id = static_cast<int>(i);
    v.role = p.role;
    v.lane = p.lane;
    v.x = cfg_.world.lane_center(p.lane);
    v.length = cfg_.world.vehicle_length;
    v.width = cfg_.world.vehicle_width;
    // The first AV anchors the layout; everyone else is jittered around it.
    const double dy = i == 0 ? 0.0 : uniform(rng, -sc.position_jitter, sc.position_jitter);
    const double dv = uniform(rng, -sc.speed_jitter, sc.speed_jitter);
    v.y = p.y + dy;
    v.v = std::clamp(p.v + dv, 0.0, cfg_.world.v_max);
    vehicles_.push_back(v);
  }
  lead_onset_ = uniform(rng, sc.lead_brake_onset_min, sc.lead_brake_onset_max);
  lead_decel_ = sc.lead_brake_decel;

  red_ids_.clear();
  agent_rows_.clear();
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    if (vehicles_[i].role == sim::Role::kRedTeam) {
      red_ids_.push_back(vehicles_[i].id);
      agent_rows_.push_back(static_cast<int>(i));
    }
  }
  av_memory_.assign(vehicles_.size(), {});
  finished_.assign(vehicles_.size(), false);
  last_controls_.assign(vehicles_.size(), {});
  history_.clear();
  history_.push_back({vehicles_, {}});

  plan_scripted();
  refresh_masks();
  return observe();
}

GraphState Environment::observe() const { return encode_graph(vehicles_, cfg_.world); }

sim::Control Environment::scripted_lead_control(const sim::VehicleState& v) const {
  const double t = step_ * cfg_.world.dt;
  const double steer = sim::lane_keeping_steer(v, cfg_.world.lane_center(v.lane),
                                               cfg_.idm.lateral_gain, cfg_.idm.heading_gain,
                                               cfg_.world);
  if (t < lead_onset_) return {0.0, steer};
  // Brake to a standstill without asking for more than the remaining speed.
  const double accel = -std::min(lead_decel_, v.v / cfg_.world.dt);
  return {accel, steer};
}

void Environment::plan_scripted() {
  planned_.assign(vehicles_.size(), std::nullopt);
  planned_memory_ = av_memory_;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    const auto& v = vehicles_[i];
    switch (v.role) {
      case sim::Role::kAv: {
        const auto decision = av::av_decide(v, vehicles_, cfg_.av, cfg_.world, av_memory_[i]);
        planned_[i] = decision.control;
        planned_memory_[i] = decision.memory;
        break;
      }
      case sim::Role::kHv:
        planned_[i] = sim::hv_policy(v, vehicles_, cfg_.world, cfg_.idm);
        break;
      case sim::Role::kRedTeam:
        if (!interference_) planned_[i] = scripted_lead_control(v);
        break;
    }
  }
}

void Environment::refresh_masks() {
  masks_.clear();
  if (!interference_) return;
  for (int row : agent_rows_) {
    std::vector<PlannedMotion> others;
    for (std::size_t j = 0; j < vehicles_.size(); ++j) {
      if (static_cast<int>(j) == row) continue;
      std::optional<av::AvMemory> memory;
      if (vehicles_[j].role == sim::Role::kAv) memory = planned_memory_[j];
      others.push_back({vehicles_[j], planned_[j], memory});
    }
    masks_.push_back(
        legal_actions(vehicles_[row], others, table_, cfg_.world, cfg_.omega, &cfg_.av));
  }
}

StepOutcome Environment::step(std::span<const int> joint_action) {
  if (done_) throw std::logic_error("Environment::step called on a finished episode");
  const std::size_t expected = interference_ ? red_ids_.size() : 0;
  if (joint_action.size() != expected) {
    throw std::invalid_argument("Environment::step: expected " + std::to_string(expected) +
                                " actions, got " + std::to_string(joint_action.size()));
  }

  std::vector<sim::Control> controls(vehicles_.size());
  HistoryFrame frame;
  std::size_t agent = 0;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    if (vehicles_[i].role == sim::Role::kRedTeam && interference_) {
      const int action = joint_action[agent];
      const auto& mask = masks_[agent];
      if (action < 0 || action >= kActionCount || !mask[action]) {
        throw IllegalActionError(vehicles_[i].id, action, mask);
      }
      controls[i] = table_[action];
      ++agent;
    } else {
      controls[i] = *planned_[i];
    }
    if (vehicles_[i].role == sim::Role::kRedTeam) {
      frame.red_controls.emplace_back(vehicles_[i].id, controls[i]);
    }
  }

  const auto prev = vehicles_;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    vehicles_[i] = sim::step_kinematics(prev[i], controls[i], cfg_.world);
  }
  av_memory_ = planned_memory_;
  last_controls_ = controls;
  ++step_;

  StepOutcome out;
  out.info.step = step_;
  out.info.collisions = sim::detect_collisions(vehicles_, step_);
  out.info.threat = compute_ptz(vehicles_, cfg_.world, cfg_.threat);

  frame.vehicles = vehicles_;
  history_.push_back(std::move(frame));
  while (history_.size() > static_cast<std::size_t>(cfg_.cost.k) + 1) history_.pop_front();

  for (int id : red_ids_) {
    out.rewards.push_back(compute_reward(prev, vehicles_, out.info.collisions, out.info.threat, id,
                                         cfg_.world, cfg_.reward));
    out.costs.push_back(compute_cost(history_, id, cfg_.world, cfg_.cost));
  }

  bool all_finished = true;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    const auto& v = vehicles_[i];
    if (v.role != sim::Role::kAv) continue;
    bool collided = false;
    for (const auto& e : out.info.collisions) collided |= e.striker_id == v.id || e.struck_id == v.id;
    if (!finished_[i] && v.y >= cfg_.world.goal_y) {
      finished_[i] = true;
      out.info.goal_crossings.emplace_back(v.id, step_ * cfg_.world.dt);
    }
    all_finished = all_finished && finished_[i];
    out.info.avs.push_back({v.id, v.y, v.v, v.a_lat, collided, finished_[i]});
  }

  done_ = !out.info.collisions.empty() || all_finished || step_ >= cfg_.scenario.horizon;
  out.done = done_;
  if (!done_) {
    plan_scripted();
    refresh_masks();
  } else {
    masks_.clear();
  }
  out.next_state = observe();
  return out;
}

}  // namespace rtmarl::cgmdp
