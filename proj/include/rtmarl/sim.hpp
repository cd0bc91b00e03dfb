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

#ifndef RTMARL_SIM_HPP_
#define RTMARL_SIM_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rtmarl::sim {

enum class Role { kAv, kRedTeam, kHv };

std::string_view role_name(Role role);
Role role_from_name(std::string_view name);

/// One vehicle on the straight road. x runs across the lanes (lane 0 at the
/// low-x edge), y runs along the road, theta = 0 points down the road and a
/// positive heading drifts toward larger x.
struct VehicleState {
  int id = 0;
  Role role = Role::kHv;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
  int lane = 0;
  double length = 4.5;
  double width = 1.8;
  double a_lon = 0.0;
  double a_lat = 0.0;

  bool operator==(const VehicleState&) const = default;
};

struct WorldConfig {
  int lane_count = 3;
  double lane_width = 3.2;
  double road_length = 500.0;
  double goal_y = 150.0;
  double dt = 0.1;
  double v_max = 20.0;
  double a_max = 5.0;
  double delta_max = 0.3;
  double theta_max = 0.5;
  double wheelbase = 2.5;
  double vehicle_length = 4.5;
  double vehicle_width = 1.8;
  double sensing_range = 100.0;
  double ttc_threshold = 2.0;

  /// Throws std::invalid_argument when a length or limit is not positive.
  void validate() const;

  double road_width() const { return lane_count * lane_width; }
  double lane_center(int lane) const { return (lane + 0.5) * lane_width; }
  /// Lane whose center is nearest to x, clamped to the road.
  int lane_of(double x) const;

  bool operator==(const WorldConfig&) const = default;
};

struct Control {
  double accel = 0.0;
  double steer = 0.0;

  bool operator==(const Control&) const = default;
};

/// One explicit-Euler step of the kinematic bicycle model.
VehicleState step_kinematics(const VehicleState& state, Control control,
                             const WorldConfig& cfg);

struct IdmParams {
  double time_headway = 1.5;
  double min_gap = 2.0;
  double accel = 2.0;
  double comfortable_decel = 3.0;
  double exponent = 4.0;
  double lateral_gain = 0.2;
  double heading_gain = 0.5;
};

/// Steering command that pulls the vehicle toward target_x and zero heading.
double lane_keeping_steer(const VehicleState& self, double target_x,
                          double lateral_gain, double heading_gain,
                          const WorldConfig& cfg);

/// IDM acceleration for a follower with the given bumper gap and closing speed.
/// A non-positive gap yields -a_max.
double idm_accel(double v, double gap, double closing_speed, double desired_speed,
                 const IdmParams& params, const WorldConfig& cfg);

/// Scripted human driver: IDM toward the nearest same-lane leader and
/// proportional lane keeping. Never changes lane.
Control hv_policy(const VehicleState& self, std::span<const VehicleState> others,
                  const WorldConfig& cfg, const IdmParams& params = {});

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct CollisionEvent {
  int step = 0;
  int striker_id = 0;
  int struck_id = 0;
  Point point;

  bool operator==(const CollisionEvent&) const = default;
};

/// Footprint corners in (x, y), counter-clockwise.
std::vector<Point> footprint(const VehicleState& v);
/// Half of the footprint's extent along x.
double lateral_half_extent(const VehicleState& v);
/// Separating-axis overlap test on the two oriented rectangles.
bool footprints_overlap(const VehicleState& a, const VehicleState& b);
/// Centroid of the footprint intersection; only meaningful when they overlap.
Point contact_point(const VehicleState& a, const VehicleState& b);
/// Striker of an overlapping pair: the vehicle whose center-to-contact vector
/// is most aligned with its own heading, lower id on ties.
int attribute_striker(const VehicleState& a, const VehicleState& b);

/// Every overlapping pair, reported once, ordered by (lower id, higher id).
std::vector<CollisionEvent> detect_collisions(std::span<const VehicleState> vehicles,
                                              int step = 0);

/// Disc radius used by the time-to-collision estimate.
double ttc_radius(const VehicleState& v);
/// Constant-velocity time until the two discs touch; +inf when they never do.
double compute_ttc(const VehicleState& a, const VehicleState& b,
                   const WorldConfig& cfg);

}  // namespace rtmarl::sim

#endif  // RTMARL_SIM_HPP_
