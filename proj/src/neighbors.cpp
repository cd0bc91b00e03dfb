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

#include "rtmarl/neighbors.hpp"

#include <cmath>

namespace rtmarl::cgmdp {

std::array<NeighborRelation, 6> resolve_neighbors(const sim::VehicleState& ego,
                                                  std::span<const sim::VehicleState> others,
                                                  const sim::WorldConfig& cfg) {
  std::array<NeighborRelation, 6> result;
  for (std::size_t s = 0; s < kSlots.size(); ++s) {
    result[s] = {kSlots[s], cfg.sensing_range, 0.0, -1};
  }
  for (const auto& other : others) {
    if (other.id == ego.id) continue;
    const double dy = other.y - ego.y;
    if (std::abs(dy) > cfg.sensing_range) continue;
    const int lane_offset = other.lane - ego.lane;
    const bool front = dy >= 0.0;
    std::size_t index;
    if (lane_offset == 0) {
      index = front ? 0 : 1;
    } else if (lane_offset == -1) {
      index = front ? 2 : 3;
    } else if (lane_offset == 1) {
      index = front ? 4 : 5;
    } else {
      continue;
    }
    auto& slot = result[index];
    const bool closer = !slot.present() || std::abs(dy) < std::abs(slot.delta_d) ||
                        (std::abs(dy) == std::abs(slot.delta_d) && other.id < slot.vehicle_id);
    if (closer) {
      slot.delta_d = dy;
      slot.delta_v = other.v - ego.v;
      slot.vehicle_id = other.id;
    }
  }
  return result;
}

}  // namespace rtmarl::cgmdp
