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

#include "rtmarl/av.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "rtmarl/neighbors.hpp"

namespace rtmarl::av {

void AvPolicyConfig::validate(const sim::WorldConfig& world) const {
  if (!(ttc_brake > 0.0 && ttc_brake < ttc_evade)) {
    throw std::invalid_argument("av: require 0 < ttc_brake < ttc_evade");
  }
  if (!(gap_required > world.vehicle_length)) {
    throw std::invalid_argument("av: gap_required must exceed the vehicle length");
  }
  if (!(brake_decel > 0.0 && brake_decel <= world.a_max)) {
    throw std::invalid_argument("av: brake_decel must lie in (0, a_max]");
  }
  if (!(cruise_speed > 0.0 && cruise_speed <= world.v_max)) {
    throw std::invalid_argument("av: cruise_speed must lie in (0, v_max]");
  }
  if (!(cruise_gain > 0.0 && cruise_accel_limit > 0.0 && lane_change_tolerance > 0.0)) {
    throw std::invalid_argument("av: gains and tolerances must be positive");
  }
}

namespace {

const sim::VehicleState* find(std::span<const sim::VehicleState> others, int id) {
  for (const auto& v : others) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

bool lane_open(const std::array<cgmdp::NeighborRelation, 6>& nb, std::size_t front_slot,
               std::size_t rear_slot, double gap_required) {
  for (std::size_t s : {front_slot, rear_slot}) {
    if (nb[s].present() && std::abs(nb[s].delta_d) < gap_required) return false;
  }
  return true;
}

}  // namespace

AvDecision av_decide(const sim::VehicleState& self, std::span<const sim::VehicleState> others,
                     const AvPolicyConfig& cfg, const sim::WorldConfig& world,
                     AvMemory memory) {
  if (self.role != sim::Role::kAv) {
    throw std::invalid_argument("av_decide: vehicle " + std::to_string(self.id) +
                                " is not an AV");
  }
  const auto nb = cgmdp::resolve_neighbors(self, others, world);
  const sim::VehicleState* leader = nb[0].present() ? find(others, nb[0].vehicle_id) : nullptr;
  const double front_ttc = leader ? sim::compute_ttc(self, *leader, world)
                                  : std::numeric_limits<double>::infinity();

  auto steer_to = [&](int lane) {
    return sim::lane_keeping_steer(self, world.lane_center(lane), cfg.lateral_gain,
                                   cfg.heading_gain, world);
  };

  AvDecision decision;
  decision.front_ttc = front_ttc;

  if (front_ttc < cfg.ttc_brake) {
    decision.rule = AvRule::kBrake;
    decision.control = {-cfg.brake_decel, steer_to(self.lane)};
    decision.memory = {};
    return decision;
  }

  if (memory.target_lane >= 0 &&
      std::abs(self.x - world.lane_center(memory.target_lane)) <= cfg.lane_change_tolerance) {
    memory = {};
  }
  if (memory.target_lane < 0 && front_ttc < cfg.ttc_evade) {
    if (self.lane > 0 && lane_open(nb, 2, 3, cfg.gap_required)) {
      memory.target_lane = self.lane - 1;
    } else if (self.lane < world.lane_count - 1 && lane_open(nb, 4, 5, cfg.gap_required)) {
      memory.target_lane = self.lane + 1;
    }
  }
  if (memory.target_lane >= 0) {
    decision.rule = AvRule::kEvade;
    decision.control = {0.0, steer_to(memory.target_lane)};
    decision.memory = memory;
    return decision;
  }

  double target_speed = cfg.cruise_speed;
  if (leader != nullptr) target_speed = std::min(target_speed, leader->v);
  const double accel = std::clamp(cfg.cruise_gain * (target_speed - self.v),
                                  -cfg.cruise_accel_limit, cfg.cruise_accel_limit);
  decision.rule = AvRule::kCruise;
  decision.control = {std::clamp(accel, -cfg.brake_decel, world.a_max), steer_to(self.lane)};
  decision.memory = memory;
  return decision;
}

}  // namespace rtmarl::av
