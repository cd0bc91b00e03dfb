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
#include <random>

#include "oracles.hpp"
#include "rtmarl/cgmdp.hpp"
#include "rtmarl/random.hpp"

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

std::vector<cgmdp::PlannedMotion> known(const std::vector<VehicleState>& vs) {
  std::vector<cgmdp::PlannedMotion> out;
  for (const auto& v : vs) out.push_back({v, sim::Control{}});
  return out;
}

}  // namespace

TEST(ActionTable, TwentyThreeEntriesWithOneHold) {
  const auto check = oracles::action_table_oracle();
  EXPECT_TRUE(check.pass) << check.detail;
  const cgmdp::ActionTable table(kWorld);
  EXPECT_EQ(table[cgmdp::ActionTable::kHoldAction], (sim::Control{0.0, 0.0}));
  EXPECT_EQ(table[cgmdp::ActionTable::kMaxBrakeAction].accel, -kWorld.a_max);
  int steering = 0;
  for (const auto& c : table.entries()) steering += (c.steer != 0.0 && c.accel == 0.0) ? 1 : 0;
  EXPECT_EQ(steering, 12);
}

TEST(GraphEncoding, FeatureRowLayout) {
  const std::vector<VehicleState> vs = {car(4, Role::kRedTeam, kWorld.lane_center(2), 60.0, 8.0, 0.1),
                                        car(1, Role::kAv, kWorld.lane_center(2), 40.0, 12.0)};
  const auto g = cgmdp::encode_graph(vs, kWorld);
  ASSERT_EQ(g.node_features.rows(), 2u);
  ASSERT_EQ(g.node_features.cols(), 22u);
  EXPECT_EQ(g.ids, (std::vector<int>{1, 4}));
  EXPECT_EQ(g.mask, (std::vector<int>{0, 1}));
  const auto red = g.node_features.row(1);
  EXPECT_DOUBLE_EQ(red[0], kWorld.lane_center(2) / kWorld.road_width());
  EXPECT_DOUBLE_EQ(red[1], 60.0 / kWorld.road_length);
  EXPECT_DOUBLE_EQ(red[2], 0.1 / kWorld.theta_max);
  EXPECT_DOUBLE_EQ(red[3], 8.0 / kWorld.v_max);
  EXPECT_EQ(red[6], 1.0);  // lane 2
  EXPECT_EQ(red[8], 1.0);  // red team
  EXPECT_DOUBLE_EQ(red[12], -20.0 / kWorld.sensing_range);  // rear slot
  EXPECT_DOUBLE_EQ(red[13], 4.0 / kWorld.v_max);
  EXPECT_DOUBLE_EQ(red[10], 1.0);  // empty front slot
}

TEST(GraphEncoding, AdjacencyFollowsCommunicationRules) {
  const std::vector<VehicleState> vs = {car(0, Role::kAv, 4.8, 0.0, 10.0), car(1, Role::kRedTeam, 4.8, 50.0, 10.0),
                                        car(2, Role::kRedTeam, 1.6, 400.0, 10.0), car(3, Role::kHv, 8.0, 10.0, 10.0)};
  const auto a = cgmdp::build_adjacency(vs, kWorld);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a(i, i), 1.0);
  EXPECT_EQ(a(1, 2), 1.0);  // red pair, any distance
  EXPECT_EQ(a(0, 1), 1.0);  // red within range
  EXPECT_EQ(a(0, 2), 0.0);  // red out of range
  EXPECT_EQ(a(0, 3), 0.0);  // no red in the pair
  EXPECT_EQ(a(1, 3), 1.0);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(a(i, j), a(j, i));
  }
}

TEST(Omega, FreeRoadInMiddleLaneAllowsEverything) {
  const VehicleState red = car(1, Role::kRedTeam, kWorld.lane_center(1), 50.0, 10.0);
  const cgmdp::ActionTable table(kWorld);
  const auto mask = cgmdp::legal_actions(red, {}, table, kWorld);
  EXPECT_EQ(mask.count(), 23);
  EXPECT_FALSE(mask.forced);
}

TEST(Omega, EdgeLaneForbidsSteeringOffTheRoad) {
  const VehicleState red = car(1, Role::kRedTeam, kWorld.lane_center(0), 50.0, 10.0);
  const cgmdp::ActionTable table(kWorld);
  const auto mask = cgmdp::legal_actions(red, {}, table, kWorld);
  for (int k = 0; k < 23; ++k) {
    if (table[k].steer < 0.0) EXPECT_FALSE(mask[k]) << k;
    if (table[k].steer == 0.0) EXPECT_TRUE(mask[k]) << k;
  }
}

TEST(Omega, NoRearEndIntoSlowLeader) {
  const VehicleState red = car(1, Role::kRedTeam, kWorld.lane_center(1), 50.0, 15.0);
  const std::vector<VehicleState> others = {car(2, Role::kHv, kWorld.lane_center(1), 60.0, 5.0)};
  const cgmdp::ActionTable table(kWorld);
  const auto mask = cgmdp::legal_actions(red, known(others), table, kWorld);
  EXPECT_FALSE(mask[10]);  // +5 m/s^2
  EXPECT_FALSE(mask[cgmdp::ActionTable::kHoldAction]);
}

TEST(Omega, ForcedBrakeWhenBoxedIn) {
  // stopped HV a metre ahead and neighbours on both sides: even the next
  // tick is a hit
  const VehicleState red = car(1, Role::kRedTeam, kWorld.lane_center(1), 50.0, 18.0);
  const std::vector<VehicleState> others = {car(2, Role::kHv, kWorld.lane_center(1), 55.5, 0.0),
                                            car(3, Role::kHv, kWorld.lane_center(0), 50.0, 18.0),
                                            car(4, Role::kHv, kWorld.lane_center(2), 50.0, 18.0)};
  const cgmdp::ActionTable table(kWorld);
  const auto mask = cgmdp::legal_actions(red, known(others), table, kWorld);
  EXPECT_TRUE(mask.forced);
  EXPECT_EQ(mask.count(), 1);
  EXPECT_TRUE(mask[cgmdp::ActionTable::kMaxBrakeAction]);
}

TEST(Omega, UnavoidableContactKeepsLongestSurvivors) {
  // contact within the rollout is certain, but the hardest brakes put it off
  // by one more tick than the rest
  const VehicleState red = car(1, Role::kRedTeam, kWorld.lane_center(1), 50.0, 15.0);
  const std::vector<VehicleState> others = {car(2, Role::kHv, kWorld.lane_center(1), 60.0, 5.0),
                                            car(3, Role::kHv, kWorld.lane_center(0), 50.0, 15.0),
                                            car(4, Role::kHv, kWorld.lane_center(2), 50.0, 15.0)};
  const cgmdp::ActionTable table(kWorld);
  const auto mask = cgmdp::legal_actions(red, known(others), table, kWorld);
  EXPECT_FALSE(mask.forced);
  EXPECT_TRUE(mask[cgmdp::ActionTable::kMaxBrakeAction]);
  EXPECT_TRUE(mask[1]);
  for (int k = 2; k < 23; ++k) EXPECT_FALSE(mask[k]) << k;
}

TEST(Omega, LegalActionsNeverStrikeWithinOneTick) {
  std::mt19937_64 rng(5);
  const cgmdp::ActionTable table(kWorld);
  int checked = 0;
  for (int t = 0; t < 300; ++t) {
    const VehicleState red = car(1, Role::kRedTeam, uniform(rng, 1.6, 8.0), 50.0, uniform(rng, 0, 20));
    std::vector<VehicleState> others;
    std::vector<sim::Control> controls;
    for (int i = 0; i < 3; ++i) {
      const Role role = i == 0 ? Role::kAv : Role::kHv;
      others.push_back(car(2 + i, role, uniform(rng, 1.6, 8.0), 50.0 + uniform(rng, -12, 12), uniform(rng, 0, 20)));
      controls.push_back({uniform(rng, -5, 5), uniform(rng, -0.3, 0.3)});
    }
    bool clear = true;
    for (const auto& o : others) clear = clear && !sim::footprints_overlap(o, red);
    if (!clear) continue;
    std::vector<cgmdp::PlannedMotion> planned;
    for (std::size_t i = 0; i < others.size(); ++i) planned.push_back({others[i], controls[i]});
    const auto mask = cgmdp::legal_actions(red, planned, table, kWorld);
    if (mask.forced) continue;
    for (int k = 0; k < 23; ++k) {
      if (!mask[k]) continue;
      const auto next = sim::step_kinematics(red, table[k], kWorld);
      for (std::size_t i = 0; i < others.size(); ++i) {
        const auto o = sim::step_kinematics(others[i], controls[i], kWorld);
        if (!sim::footprints_overlap(next, o)) continue;
        EXPECT_NE(o.role, Role::kHv) << "scene " << t << " action " << k;
        EXPECT_NE(sim::attribute_striker(next, o), red.id) << "scene " << t << " action " << k;
      }
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(Omega, LegalPlansNeverStrikeTheReactingAv) {
  // hold each legal plan for the whole horizon while the AV runs its own
  // controller: the red-team vehicle never hits it first
  std::mt19937_64 rng(17);
  const cgmdp::ActionTable table(kWorld);
  const av::AvPolicyConfig policy;
  const cgmdp::OmegaParams params;
  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    const VehicleState red = car(1, Role::kRedTeam, uniform(rng, 1.6, 8.0), 50.0,
                                 uniform(rng, 2, 16), uniform(rng, -0.2, 0.2));
    std::vector<VehicleState> scene = {
        car(0, Role::kAv, uniform(rng, 1.6, 8.0), 50.0 + uniform(rng, -15, 15), uniform(rng, 8, 16)),
        car(2, Role::kHv, uniform(rng, 1.6, 8.0), 50.0 + uniform(rng, -30, 30), uniform(rng, 0, 18))};
    bool clear = true;
    for (std::size_t i = 0; i < scene.size(); ++i) {
      clear = clear && !sim::footprints_overlap(scene[i], red);
      for (std::size_t j = i + 1; j < scene.size(); ++j) {
        clear = clear && !sim::footprints_overlap(scene[i], scene[j]);
      }
    }
    if (!clear) continue;
    std::vector<VehicleState> all = scene;
    all.push_back(red);
    const auto first = av::av_decide(scene[0], all, policy, kWorld);
    const auto hv_control = sim::hv_policy(scene[1], all, kWorld, sim::IdmParams{});
    const std::vector<cgmdp::PlannedMotion> planned = {{scene[0], first.control, first.memory},
                                                       {scene[1], hv_control, std::nullopt}};
    const auto mask = cgmdp::legal_actions(red, planned, table, kWorld, params, &policy);
    if (mask.fallback || mask.forced) continue;
    for (int k = 0; k < 23; ++k) {
      if (!mask[k]) continue;
      VehicleState r = red, a = scene[0], h = scene[1];
      av::AvMemory memory = first.memory;
      sim::Control av_control = first.control;
      for (int tick = 0; tick < params.horizon_steps; ++tick) {
        const std::vector<VehicleState> around = {r, h};
        if (tick > 0) {
          const auto d = av::av_decide(a, around, policy, kWorld, memory);
          av_control = d.control;
          memory = d.memory;
        }
        r = sim::step_kinematics(r, {table[k].accel, tick == 0 ? table[k].steer : 0.0}, kWorld);
        a = sim::step_kinematics(a, av_control, kWorld);
        h = sim::step_kinematics(h, {hv_control.accel, tick == 0 ? hv_control.steer : 0.0}, kWorld);
        EXPECT_FALSE(sim::footprints_overlap(r, h)) << "scene " << t << " action " << k;
        if (sim::footprints_overlap(r, a)) {
          EXPECT_NE(sim::attribute_striker(r, a), red.id) << "scene " << t << " action " << k;
          break;
        }
      }
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(Omega, RandomLegalPlayNeverMakesTheRedTeamStrike) {
  std::mt19937_64 rng(99);
  cgmdp::Environment env(cgmdp::EnvConfig{});
  int collisions = 0;
  for (int ep = 0; ep < 60; ++ep) {
    const auto scenario = ep % 2 ? cgmdp::Scenario::kMvi : cgmdp::Scenario::kSvi;
    env.reset(scenario, 1000 + ep);
    while (!env.done()) {
      std::vector<int> joint;
      for (const auto& mask : env.legal_masks()) {
        std::vector<int> legal;
        for (int k = 0; k < 23; ++k) {
          if (mask[k]) legal.push_back(k);
        }
        joint.push_back(legal[rng() % legal.size()]);
      }
      const auto out = env.step(joint);
      for (const auto& e : out.info.collisions) {
        ++collisions;
        for (const auto& v : env.vehicles()) {
          if (v.id == e.striker_id) EXPECT_NE(v.role, Role::kRedTeam) << "episode " << ep;
        }
      }
    }
  }
  SUCCEED() << collisions << " collisions observed";
}

TEST(Threat, PhiTermsAndPairs) {
  EXPECT_DOUBLE_EQ(cgmdp::threat_phi1(0.5, kWorld), 0.75);
  EXPECT_DOUBLE_EQ(cgmdp::threat_phi1(3.0, kWorld), 0.0);
  EXPECT_DOUBLE_EQ(cgmdp::threat_phi1(std::numeric_limits<double>::infinity(), kWorld), 0.0);
  const cgmdp::ThreatParams p;
  EXPECT_DOUBLE_EQ(cgmdp::threat_phi2(1.0, 0.01, p), 0.0);
  EXPECT_DOUBLE_EQ(cgmdp::threat_phi2(-3.0, 0.0, p), 0.75);
  EXPECT_DOUBLE_EQ(cgmdp::threat_phi2(-5.0, 0.1, p), 1.0);

  VehicleState av = car(0, Role::kAv, 4.8, 0.0, 15.0);
  const VehicleState red = car(1, Role::kRedTeam, 4.8, 15.0, 5.0);
  const VehicleState hv = car(2, Role::kHv, 4.8, 10.0, 5.0);
  const std::vector<VehicleState> vs = {av, red, hv};
  const auto report = cgmdp::compute_ptz(vs, kWorld);
  ASSERT_EQ(report.pairs.size(), 1u);
  const double ttc = sim::compute_ttc(av, red, kWorld);
  EXPECT_DOUBLE_EQ(report.pairs[0].phi1, std::clamp(1.0 - ttc / 2.0, 0.0, 1.0));
  EXPECT_DOUBLE_EQ(report.scenario_threat, report.pairs[0].phi1);
}

TEST(Reward, ComponentsCombine) {
  const cgmdp::RewardParams p;
  VehicleState red = car(1, Role::kRedTeam, 4.8, 30.0, 8.0);
  red.a_lon = -2.0;
  red.a_lat = 0.5;
  const VehicleState av = car(0, Role::kAv, 4.8, 20.0, 12.0);
  const std::vector<VehicleState> vs = {av, red};
  cgmdp::ThreatReport threat;
  threat.scenario_threat = 0.4;
  const double r = cgmdp::compute_reward(vs, vs, {}, threat, 1, kWorld, p);
  const double want = p.w_dan * 0.5 + p.w_vel * 0.4 - p.w_com * (2.5 / 5.0) + p.w_ptz * 0.4;
  EXPECT_NEAR(r, want, 1e-12);

  const sim::CollisionEvent hit{3, 0, 1, {}};
  const std::vector<sim::CollisionEvent> events = {hit};
  EXPECT_NEAR(cgmdp::compute_reward(vs, vs, events, threat, 1, kWorld, p), want + p.w_col * p.c0, 1e-12);
  EXPECT_LE(std::abs(r), p.bound());
  EXPECT_THROW(cgmdp::compute_reward(vs, vs, {}, threat, 0, kWorld, p), std::invalid_argument);
}

TEST(Cost, TtcTermAndInertialInterference) {
  const cgmdp::CostParams p;
  const VehicleState av = car(0, Role::kAv, 4.8, 20.0, 12.0);
  const VehicleState red = car(1, Role::kRedTeam, 4.8, 30.0, 10.0);
  cgmdp::CostHistory h;
  h.push_back({{av, red}, {{1, {}}}});
  const double ttc = sim::compute_ttc(red, av, kWorld);
  EXPECT_NEAR(cgmdp::compute_cost(h, 1, kWorld, p), p.w_ttc * std::clamp(ttc / 2.0, 0.0, 1.0), 1e-12);

  // AV starts a lane change and the red vehicle does nothing for k ticks
  cgmdp::CostHistory inert;
  VehicleState a = av;
  inert.push_back({{a, red}, {{1, {}}}});
  a.theta = 0.08;
  for (int i = 0; i < p.k; ++i) inert.push_back({{a, red}, {{1, {}}}});
  EXPECT_TRUE(cgmdp::inertial_interference(inert, 1, p));
  EXPECT_GE(cgmdp::compute_cost(inert, 1, kWorld, p), p.w_int * p.c1);
  // any response clears it
  inert.back().red_controls[0].second.accel = -1.0;
  EXPECT_FALSE(cgmdp::inertial_interference(inert, 1, p));
}

TEST(Environment, ResetIsSeededAndStepValidates) {
  cgmdp::Environment env(cgmdp::EnvConfig{});
  const auto a = env.reset(cgmdp::Scenario::kSvi, 17);
  const auto b = env.reset(cgmdp::Scenario::kSvi, 17);
  const auto c = env.reset(cgmdp::Scenario::kSvi, 18);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(env.red_team_ids().size(), 1u);
  EXPECT_THROW(env.step(std::vector<int>{}), std::invalid_argument);
  const auto& mask = env.legal_masks()[0];
  for (int k = 0; k < 23; ++k) {
    if (!mask[k]) {
      EXPECT_THROW(env.step(std::vector<int>{k}), cgmdp::IllegalActionError);
      break;
    }
  }
  env.reset(cgmdp::Scenario::kMvi, 17);
  EXPECT_GE(env.red_team_ids().size(), 2u);
  EXPECT_EQ(static_cast<int>(env.vehicles().size()), 6);
}

TEST(Environment, BaselineRunsWithoutActions) {
  cgmdp::Environment env(cgmdp::EnvConfig{});
  env.reset(cgmdp::Scenario::kSvi, 3, false);
  int steps = 0;
  while (!env.done()) {
    const auto out = env.step(std::vector<int>{});
    EXPECT_TRUE(out.rewards.empty() || out.rewards.size() == env.red_team_ids().size());
    ++steps;
  }
  EXPECT_GT(steps, 0);
  EXPECT_LE(steps, cgmdp::EnvConfig{}.scenario.horizon);
  EXPECT_THROW(env.step(std::vector<int>{}), std::logic_error);
}

TEST(Environment, ConfigValidation) {
  cgmdp::EnvConfig cfg;
  cfg.scenario.horizon = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.world.dt = -0.1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
