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

#ifndef RTMARL_NEIGHBORS_HPP_
#define RTMARL_NEIGHBORS_HPP_

#include <array>
#include <span>

#include "rtmarl/sim.hpp"

namespace rtmarl::cgmdp {

enum class Slot { kFront, kRear, kLeftFront, kLeftRear, kRightFront, kRightRear };

inline constexpr std::array<Slot, 6> kSlots = {Slot::kFront,     Slot::kRear,
                                               Slot::kLeftFront, Slot::kLeftRear,
                                               Slot::kRightFront, Slot::kRightRear};

/// Relation of one neighbor slot. An empty slot reads (sensing_range, 0).
struct NeighborRelation {
  Slot slot = Slot::kFront;
  double delta_d = 0.0;  // other.y - ego.y
  double delta_v = 0.0;  // other.v - ego.v
  int vehicle_id = -1;   // -1 when the slot is empty

  bool present() const { return vehicle_id >= 0; }
};

/// Nearest vehicle per slot. Left means lane - 1. A vehicle level with the ego
/// (delta_d == 0) counts as front.
std::array<NeighborRelation, 6> resolve_neighbors(const sim::VehicleState& ego,
                                                  std::span<const sim::VehicleState> others,
                                                  const sim::WorldConfig& cfg);

}  // namespace rtmarl::cgmdp

#endif  // RTMARL_NEIGHBORS_HPP_
