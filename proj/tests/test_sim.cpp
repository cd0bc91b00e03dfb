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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "rtmarl/av.hpp"
#include "rtmarl/neighbors.hpp"
#include "rtmarl/random.hpp"
#include "rtmarl/sim.hpp"

using namespace rtmarl;
using sim::Role;
using sim::VehicleState;

namespace {

const sim::WorldConfig kWorld;

VehicleState car(int id, Role role, double x, double y, double v, double theta = 0.0) {
  VehicleState s;
  s.id = id;
  s.role = role;
  s.x = x;
  s.y = y;
  s.v = v;
  s.theta = theta;
  s.lane = kWorld.lane_of(x);
  return s;
}

// point in the oriented rectangle, by projection onto its own axes
bool inside(const VehicleState& v, double px, double py, double grow = 0.0) {
  const double dx = px - v.x, dy = py - v.y;
  const double along = dx * std::sin(v.theta) + dy * std::cos(v.theta);
  const double across = dx * std::cos(v.theta) - dy * std::sin(v.theta);
  return std::abs(along) <= 0.5 * v.length + grow && std::abs(across) <= 0.5 * v.width + grow;
}

// samples a grid over a's body (optionally grown) and tests each point in b
int sampled_hits(const VehicleState& a, const VehicleState& b, double grow, double* cx = nullptr,
                 double* cy = nullptr) {
  constexpr int kAlong = 120, kAcross = 50;
  int hits = 0;
  double sx = 0.0, sy = 0.0;
  for (int i = 0; i <= kAlong; ++i) {
    for (int j = 0; j <= kAcross; ++j) {
      const double u = (static_cast<double>(i) / kAlong - 0.5) * (a.length + 2 * grow);
      const double w = (static_cast<double>(j) / kAcross - 0.5) * (a.width + 2 * grow);
      const double px = a.x + u * std::sin(a.theta) + w * std::cos(a.theta);
      const double py = a.y + u * std::cos(a.theta) - w * std::sin(a.theta);
      if (inside(b, px, py, grow)) {
        ++hits;
        sx += px;
        sy += py;
      }
    }
  }
  if (hits > 0 && cx != nullptr) {
    *cx = sx / hits;
    *cy = sy / hits;
  }
  return hits;
}

bool sampled_overlap(const VehicleState& a, const VehicleState& b, double grow) {
  return sampled_hits(a, b, grow) > 0;
}

}  // namespace

TEST(Kinematics, OneStepMatchesHandComputation) {
  const VehicleState s = car(0, Role::kAv, 4.8, 10.0, 10.0, 0.1);
  const sim::Control u{2.0, 0.05};
  const VehicleState n = sim::step_kinematics(s, u, kWorld);
  EXPECT_DOUBLE_EQ(n.y, 10.0 + 10.0 * std::cos(0.1) * 0.1);
  EXPECT_DOUBLE_EQ(n.x, 4.8 + 10.0 * std::sin(0.1) * 0.1);
  const double theta = 0.1 + (10.0 / 2.5) * std::tan(0.05) * 0.1;
  EXPECT_DOUBLE_EQ(n.theta, theta);
  EXPECT_DOUBLE_EQ(n.v, 10.2);
  EXPECT_DOUBLE_EQ(n.a_lon, 2.0);
  EXPECT_DOUBLE_EQ(n.a_lat, 10.0 * (theta - 0.1) / 0.1);
}

TEST(Kinematics, SpeedAndHeadingStayInBounds) {
  VehicleState s = car(0, Role::kHv, 4.8, 0.0, 0.2);
  s = sim::step_kinematics(s, {-5.0, 0.0}, kWorld);
  EXPECT_EQ(s.v, 0.0);
  VehicleState fast = car(1, Role::kHv, 4.8, 0.0, 19.9, 0.49);
  for (int i = 0; i < 20; ++i) fast = sim::step_kinematics(fast, {5.0, 0.3}, kWorld);
  EXPECT_LE(fast.v, kWorld.v_max);
  EXPECT_LE(std::abs(fast.theta), kWorld.theta_max);
}

TEST(Kinematics, RejectsBadControls) {
  const VehicleState s = car(0, Role::kHv, 4.8, 0.0, 10.0);
  EXPECT_THROW(sim::step_kinematics(s, {5.5, 0.0}, kWorld), std::invalid_argument);
  EXPECT_THROW(sim::step_kinematics(s, {0.0, 0.31}, kWorld), std::invalid_argument);
  EXPECT_THROW(sim::step_kinematics(s, {std::nan(""), 0.0}, kWorld), std::invalid_argument);
}

TEST(World, LaneOfNearestCenterClamped) {
  EXPECT_EQ(kWorld.lane_of(1.6), 0);
  EXPECT_EQ(kWorld.lane_of(4.8), 1);
  EXPECT_EQ(kWorld.lane_of(8.0), 2);
  EXPECT_EQ(kWorld.lane_of(-3.0), 0);
  EXPECT_EQ(kWorld.lane_of(40.0), 2);
  EXPECT_EQ(kWorld.lane_of(3.19), 0);
  EXPECT_EQ(kWorld.lane_of(3.21), 1);
}

TEST(Idm, FreeRoadAndStoppedGap) {
  const sim::IdmParams p;
  EXPECT_NEAR(sim::idm_accel(10.0, std::numeric_limits<double>::infinity(), 0.0, 20.0, p, kWorld),
              2.0 * (1.0 - std::pow(0.5, 4)), 1e-12);
  EXPECT_EQ(sim::idm_accel(10.0, 0.0, 0.0, 20.0, p, kWorld), -kWorld.a_max);
  // gap 30 m closing 2 m/s: s* = 2 + 15 + 10*2/(2*sqrt(6))
  const double s_star = 2.0 + 15.0 + 20.0 / (2.0 * std::sqrt(6.0));
  const double want = 2.0 * (1.0 - std::pow(0.5, 4) - (s_star / 30.0) * (s_star / 30.0));
  EXPECT_NEAR(sim::idm_accel(10.0, 30.0, 2.0, 20.0, p, kWorld), want, 1e-12);
}

TEST(Idm, LeaderStraddlingTheLaneIsFollowed) {
  const VehicleState hv = car(0, Role::kHv, kWorld.lane_center(1), 0.0, 15.0);
  // centered in lane 0 but its body crosses into lane 1
  VehicleState other = car(1, Role::kRedTeam, 2.9, 12.0, 0.0);
  const std::vector<VehicleState> others = {other};
  const auto u = sim::hv_policy(hv, others, kWorld);
  EXPECT_LT(u.accel, -1.0);
  other.x = 1.0;  // fully in lane 0
  const std::vector<VehicleState> clear = {other};
  EXPECT_GT(sim::hv_policy(hv, clear, kWorld).accel, 0.0);
  EXPECT_THROW(sim::hv_policy(other, clear, kWorld), std::invalid_argument);
}

TEST(Geometry, FootprintAreaAndCorners) {
  const VehicleState a = car(0, Role::kAv, 4.8, 10.0, 0.0);
  const auto fp = sim::footprint(a);
  ASSERT_EQ(fp.size(), 4u);
  double area = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& p = fp[i];
    const auto& q = fp[(i + 1) % 4];
    area += p.x * q.y - q.x * p.y;
  }
  EXPECT_NEAR(0.5 * area, a.length * a.width, 1e-12);  // positive: counter-clockwise
  const VehicleState r = car(0, Role::kAv, 4.8, 10.0, 0.0, 0.4);
  for (const auto& p : sim::footprint(r)) EXPECT_TRUE(inside(r, p.x, p.y, 1e-9));
  EXPECT_NEAR(sim::lateral_half_extent(r), 0.5 * (r.length * std::sin(0.4) + r.width * std::cos(0.4)),
              1e-12);
}

TEST(Geometry, SeparatingAxisAgreesWithPointSampling) {
  std::mt19937_64 rng(2024);
  int compared = 0, overlapping = 0;
  for (int t = 0; t < 3000; ++t) {
    VehicleState a = car(0, Role::kAv, uniform(rng, 0, 9.6), uniform(rng, 0, 10), 5.0,
                         uniform(rng, -0.5, 0.5));
    VehicleState b = car(1, Role::kHv, a.x + uniform(rng, -3, 3), a.y + uniform(rng, -6, 6), 5.0,
                         uniform(rng, -0.5, 0.5));
    // only pairs whose answer is stable under a 2 cm grow / shrink
    const bool grown = sampled_overlap(a, b, 0.02);
    const bool shrunk = sampled_overlap(a, b, -0.02);
    if (grown != shrunk) continue;
    ++compared;
    overlapping += shrunk ? 1 : 0;
    ASSERT_EQ(sim::footprints_overlap(a, b), shrunk) << "pair " << t;
    ASSERT_EQ(sim::footprints_overlap(b, a), shrunk) << "pair " << t;
  }
  EXPECT_GT(compared, 2000);
  EXPECT_GT(overlapping, 300);
}

TEST(Geometry, ContactPointIsTheSampledOverlapCentroid) {
  std::mt19937_64 rng(77);
  int checked = 0;
  for (int t = 0; t < 400; ++t) {
    VehicleState a = car(0, Role::kAv, 4.8, 20.0, 5.0, uniform(rng, -0.4, 0.4));
    VehicleState b = car(1, Role::kHv, 4.8 + uniform(rng, -2, 2), 20.0 + uniform(rng, -4.5, 4.5), 5.0,
                         uniform(rng, -0.4, 0.4));
    if (!sim::footprints_overlap(a, b)) continue;
    double cx = 0.0, cy = 0.0;
    // thin slivers hold too few grid points for a meaningful centroid
    if (sampled_hits(a, b, 0.0, &cx, &cy) < 300) continue;
    const auto p = sim::contact_point(a, b);
    const auto q = sim::contact_point(b, a);
    EXPECT_NEAR(p.x, q.x, 1e-9);
    EXPECT_NEAR(p.y, q.y, 1e-9);
    EXPECT_NEAR(p.x, cx, 0.06);
    EXPECT_NEAR(p.y, cy, 0.06);
    EXPECT_TRUE(inside(a, p.x, p.y, 1e-6) && inside(b, p.x, p.y, 1e-6));
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(Collision, RearEnderIsTheStrikerInEitherOrder) {
  const VehicleState lead = car(3, Role::kRedTeam, 4.8, 20.0, 2.0);
  const VehicleState follow = car(1, Role::kAv, 4.8, 15.7, 12.0);
  ASSERT_TRUE(sim::footprints_overlap(lead, follow));
  EXPECT_EQ(sim::attribute_striker(lead, follow), 1);
  EXPECT_EQ(sim::attribute_striker(follow, lead), 1);
  const std::vector<VehicleState> both = {lead, follow};
  const auto events = sim::detect_collisions(both, 42);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].striker_id, 1);
  EXPECT_EQ(events[0].struck_id, 3);
  EXPECT_EQ(events[0].step, 42);
}

TEST(Collision, SideSwipeBlamesTheVehicleSteeringIn) {
  const VehicleState straight = car(0, Role::kHv, 4.8, 20.0, 10.0);
  const VehicleState merging = car(5, Role::kRedTeam, 3.2, 19.5, 10.0, 0.4);
  ASSERT_TRUE(sim::footprints_overlap(straight, merging));
  EXPECT_EQ(sim::attribute_striker(straight, merging), 5);
}

TEST(Collision, SeparatedVehiclesReportNothing) {
  const std::vector<VehicleState> v = {car(0, Role::kAv, 1.6, 0, 10), car(1, Role::kHv, 4.8, 0, 10),
                                       car(2, Role::kHv, 1.6, 10, 10)};
  EXPECT_TRUE(sim::detect_collisions(v).empty());
}

TEST(Ttc, ClosedFormCases) {
  // same lane, 20 m center gap, closing at 5 m/s: contact when gap = 2 r
  const VehicleState a = car(0, Role::kAv, 4.8, 0.0, 15.0);
  const VehicleState b = car(1, Role::kRedTeam, 4.8, 20.0, 10.0);
  const double r = 2.0 * sim::ttc_radius(a);
  EXPECT_NEAR(sim::compute_ttc(a, b, kWorld), (20.0 - r) / 5.0, 1e-12);
  EXPECT_TRUE(std::isinf(sim::compute_ttc(b, car(2, Role::kHv, 4.8, 40.0, 12.0), kWorld)));
  EXPECT_EQ(sim::compute_ttc(a, car(3, Role::kHv, 4.8, 2.0, 0.0), kWorld), 0.0);
}

TEST(Ttc, ClosedFormMatchesMillisecondSimulation) {
  const auto check = oracles::ttc_oracle(1000, 11, 0.01);
  EXPECT_TRUE(check.pass) << check.detail;
}

TEST(Neighbors, SlotsAndEmptyReadings) {
  const VehicleState ego = car(0, Role::kAv, kWorld.lane_center(1), 50.0, 10.0);
  const std::vector<VehicleState> others = {
      ego,
      car(1, Role::kHv, kWorld.lane_center(1), 70.0, 12.0),
      car(2, Role::kHv, kWorld.lane_center(1), 40.0, 9.0),
      car(3, Role::kHv, kWorld.lane_center(0), 55.0, 8.0),
      car(4, Role::kHv, kWorld.lane_center(2), 30.0, 11.0)};
  const auto nb = cgmdp::resolve_neighbors(ego, others, kWorld);
  EXPECT_EQ(nb[0].vehicle_id, 1);
  EXPECT_DOUBLE_EQ(nb[0].delta_d, 20.0);
  EXPECT_DOUBLE_EQ(nb[0].delta_v, 2.0);
  EXPECT_EQ(nb[1].vehicle_id, 2);
  EXPECT_EQ(nb[2].vehicle_id, 3);
  EXPECT_FALSE(nb[3].present());
  EXPECT_DOUBLE_EQ(nb[3].delta_d, kWorld.sensing_range);
  EXPECT_FALSE(nb[4].present());
  EXPECT_EQ(nb[5].vehicle_id, 4);
}

TEST(AvPolicy, RuleCascade) {
  const av::AvPolicyConfig cfg;
  const VehicleState ego = car(0, Role::kAv, kWorld.lane_center(1), 0.0, 14.0);
  // close stopped leader: brake
  std::vector<VehicleState> scene = {ego, car(1, Role::kRedTeam, kWorld.lane_center(1), 20.0, 0.0)};
  auto d = av::av_decide(ego, scene, cfg, kWorld);
  EXPECT_EQ(d.rule, av::AvRule::kBrake);
  EXPECT_DOUBLE_EQ(d.control.accel, -cfg.brake_decel);
  // leader at TTC between the thresholds with an open left lane: evade left
  const double gap = 2.0 * sim::ttc_radius(ego) + 14.0 * 1.35;
  scene[1].y = gap;
  d = av::av_decide(ego, scene, cfg, kWorld);
  EXPECT_EQ(d.rule, av::AvRule::kEvade);
  EXPECT_EQ(d.memory.target_lane, 0);
  EXPECT_LT(d.control.steer, 0.0);
  // far leader: cruise toward min(cruise speed, leader speed)
  scene[1].y = 90.0;
  scene[1].v = 10.0;
  d = av::av_decide(ego, scene, cfg, kWorld);
  EXPECT_EQ(d.rule, av::AvRule::kCruise);
  EXPECT_DOUBLE_EQ(d.control.accel, std::max(-cfg.cruise_accel_limit, cfg.cruise_gain * (10.0 - 14.0)));
}
