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

#ifndef RTMARL_AV_HPP_
#define RTMARL_AV_HPP_

#include <span>

#include "rtmarl/sim.hpp"

namespace rtmarl::av {

/// Thresholds of the scripted evasive driver.
struct AvPolicyConfig {
  double ttc_brake = 1.2;
  double ttc_evade = 1.5;
  double gap_required = 8.0;
  double brake_decel = 4.6;
  double cruise_speed = 14.0;
  double cruise_gain = 0.5;
  double cruise_accel_limit = 2.0;
  double lateral_gain = 0.2;
  double heading_gain = 0.5;
  double lane_change_tolerance = 0.2;

  void validate(const sim::WorldConfig& world) const;

  bool operator==(const AvPolicyConfig&) const = default;
};

/// Lane-change commitment carried between ticks. target_lane < 0 means none.
struct AvMemory {
  int target_lane = -1;

  bool operator==(const AvMemory&) const = default;
};

enum class AvRule { kBrake, kEvade, kCruise };

struct AvDecision {
  sim::Control control;
  AvMemory memory;
  AvRule rule = AvRule::kCruise;
  double front_ttc = 0.0;
};

/// Rule cascade: emergency brake, then lane-change evasion, then cruise.
AvDecision av_decide(const sim::VehicleState& self, std::span<const sim::VehicleState> others,
                     const AvPolicyConfig& cfg, const sim::WorldConfig& world,
                     AvMemory memory = {});

}  // namespace rtmarl::av

#endif  // RTMARL_AV_HPP_
