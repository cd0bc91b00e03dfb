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

#ifndef RTMARL_CGMDP_HPP_
#define RTMARL_CGMDP_HPP_

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rtmarl/av.hpp"
#include "rtmarl/neighbors.hpp"
#include "rtmarl/sim.hpp"
#include "rtmarl/tensor.hpp"

namespace rtmarl::cgmdp {

inline constexpr int kActionCount = 23;
inline constexpr int kFeatureCount = 22;

/// 11 acceleration levels with zero steering, then the 12 non-zero steering
/// levels with zero acceleration. Index kHoldAction is (0, 0).
class ActionTable {
 public:
  static constexpr int kHoldAction = 5;
  static constexpr int kMaxBrakeAction = 0;

  explicit ActionTable(const sim::WorldConfig& cfg);

  const sim::Control& operator[](int index) const { return entries_.at(index); }
  const std::array<sim::Control, kActionCount>& entries() const { return entries_; }
  static constexpr int size() { return kActionCount; }

 private:
  std::array<sim::Control, kActionCount> entries_;
};

struct ActionMask {
  std::array<std::uint8_t, kActionCount> legal{};
  /// Set when nothing cleared the padded rollout and the mask holds the
  /// actions that stay clean longest on the bare footprint instead.
  bool fallback = false;
  /// Set when every action failed and maximal braking was re-enabled.
  bool forced = false;

  int count() const;
  bool operator[](int index) const { return legal.at(index) != 0; }
  bool operator==(const ActionMask&) const = default;
};

/// Observation triple: node features, adjacency and red-team mask, rows in
/// ascending vehicle id.
struct GraphState {
  int n = 0;
  nn::Tensor2 node_features;
  nn::Tensor2 adjacency;
  std::vector<int> mask;
  std::vector<int> ids;

  bool operator==(const GraphState&) const = default;
};

nn::Tensor2 encode_node_features(std::span<const sim::VehicleState> vehicles,
                                 const sim::WorldConfig& cfg);
nn::Tensor2 build_adjacency(std::span<const sim::VehicleState> vehicles,
                            const sim::WorldConfig& cfg);
GraphState encode_graph(std::span<const sim::VehicleState> vehicles,
                        const sim::WorldConfig& cfg);

/// Legality rules evaluated over a short rollout: the candidate action is
/// applied for one tick, then its acceleration is held with zero steering.
struct OmegaParams {
  int horizon_steps = 15;
  double lane_change_clearance = 2.0;
  /// Padding added to every side of the red-team footprint in the
  /// collision checks.
  double safety_margin = 0.3;

  bool operator==(const OmegaParams&) const = default;
};

/// Another vehicle as seen by the legality check. A known control is its
/// exact next-tick command; an unknown one (another red-team agent) is
/// bounded by every table action. For an AV the second tick is also tried
/// with full left, zero and full right steering.
struct PlannedMotion {
  sim::VehicleState state;
  std::optional<sim::Control> control;
  /// AV memory after the planned tick. With an AV policy passed to
  /// legal_actions the AV is also rolled out under its own controller,
  /// reacting to each candidate.
  std::optional<av::AvMemory> memory;
};

ActionMask legal_actions(const sim::VehicleState& vehicle, std::span<const PlannedMotion> others,
                         const ActionTable& table, const sim::WorldConfig& cfg,
                         const OmegaParams& params = {},
                         const av::AvPolicyConfig* av_policy = nullptr);

struct ThreatParams {
  double accel_scale = 2.0;
  double heading_scale = 0.05;

  bool operator==(const ThreatParams&) const = default;
};

struct ThreatPair {
  int av_id = 0;
  int red_id = 0;
  double phi1 = 0.0;
  double phi2 = 0.0;
  double ttc = 0.0;
};

struct ThreatReport {
  std::vector<ThreatPair> pairs;
  double scenario_threat = 0.0;
};

double threat_phi1(double ttc, const sim::WorldConfig& cfg);
double threat_phi2(double av_accel, double av_heading, const ThreatParams& params);
ThreatReport compute_ptz(std::span<const sim::VehicleState> vehicles, const sim::WorldConfig& cfg,
                         const ThreatParams& params = {});

struct RewardParams {
  double w_col = 1.0;
  double w_dan = 0.3;
  double w_vel = 0.2;
  double w_com = 0.1;
  double w_ptz = 0.2;
  double c0 = 10.0;
  double d_safe = 20.0;

  double bound() const { return w_col * c0 + w_dan + w_vel + w_com + w_ptz; }
  bool operator==(const RewardParams&) const = default;
};

double compute_reward(std::span<const sim::VehicleState> prev,
                      std::span<const sim::VehicleState> curr,
                      std::span<const sim::CollisionEvent> events, const ThreatReport& threat,
                      int red_id, const sim::WorldConfig& cfg, const RewardParams& params);

struct CostParams {
  double c1 = 1.0;
  double w_int = 1.0;
  double w_ttc = 0.5;
  int k = 5;
  double response_accel = 0.5;
  double response_steer = 0.02;
  double lane_change_heading = 0.05;

  double bound() const { return w_int * c1 + w_ttc; }
  bool operator==(const CostParams&) const = default;
};

/// World after one tick together with the red-team controls that produced it.
struct HistoryFrame {
  std::vector<sim::VehicleState> vehicles;
  std::vector<std::pair<int, sim::Control>> red_controls;
};

/// Oldest first; back() is the current frame.
using CostHistory = std::deque<HistoryFrame>;

bool inertial_interference(const CostHistory& history, int red_id, const CostParams& params);
double compute_cost(const CostHistory& history, int red_id, const sim::WorldConfig& cfg,
                    const CostParams& params);

enum class Scenario { kSvi, kMvi };

Scenario scenario_from_name(std::string_view name);
std::string_view scenario_name(Scenario scenario);

struct ScenarioConfig {
  int horizon = 150;
  double position_jitter = 1.0;
  double speed_jitter = 0.5;
  /// Scripted lead used when interference is off: holds speed, then performs
  /// one emergency stop at a random onset.
  double lead_brake_onset_min = 0.5;
  double lead_brake_onset_max = 4.0;
  double lead_brake_decel = 5.0;

  bool operator==(const ScenarioConfig&) const = default;
};

struct EnvConfig {
  sim::WorldConfig world;
  ScenarioConfig scenario;
  RewardParams reward;
  CostParams cost;
  ThreatParams threat;
  OmegaParams omega;
  av::AvPolicyConfig av;
  sim::IdmParams idm;

  void validate() const;
};

struct AvSnapshot {
  int id = 0;
  double y = 0.0;
  double v = 0.0;
  double a_lat = 0.0;
  bool collided = false;
  bool finished = false;
};

struct StepInfo {
  int step = 0;
  std::vector<sim::CollisionEvent> collisions;
  std::vector<AvSnapshot> avs;
  ThreatReport threat;
  /// (av id, seconds since reset) for AVs that crossed the goal this tick.
  std::vector<std::pair<int, double>> goal_crossings;
};

struct StepOutcome {
  GraphState next_state;
  std::vector<double> rewards;
  std::vector<double> costs;
  bool done = false;
  StepInfo info;
};

class IllegalActionError : public std::runtime_error {
 public:
  IllegalActionError(int vehicle_id, int action_id, ActionMask mask);

  int vehicle_id() const { return vehicle_id_; }
  int action_id() const { return action_id_; }
  const ActionMask& mask() const { return mask_; }

 private:
  int vehicle_id_;
  int action_id_;
  ActionMask mask_;
};

/// The red-team interference environment. Single owner, not thread-safe;
/// run one instance per thread.
class Environment {
 public:
  explicit Environment(EnvConfig cfg);

  /// Builds the scenario layout with seeded jitter. With interference off the
  /// red-team vehicles follow the scripted emergency-stop lead program and
  /// step() expects an empty joint action.
  GraphState reset(Scenario scenario, std::uint64_t seed, bool interference = true);

  /// Joint action: one action id per red-team vehicle, ascending id order.
  StepOutcome step(std::span<const int> joint_action);

  GraphState observe() const;
  const std::vector<sim::VehicleState>& vehicles() const { return vehicles_; }
  const std::vector<int>& red_team_ids() const { return red_ids_; }
  /// Row of each red-team vehicle in the graph state.
  const std::vector<int>& agent_rows() const { return agent_rows_; }
  const std::vector<ActionMask>& legal_masks() const { return masks_; }
  const ActionTable& actions() const { return table_; }
  const EnvConfig& config() const { return cfg_; }
  int step_count() const { return step_; }
  bool done() const { return done_; }
  bool interference() const { return interference_; }
  Scenario scenario() const { return scenario_; }
  /// Last control applied to each vehicle, in vehicle order.
  const std::vector<sim::Control>& last_controls() const { return last_controls_; }

 private:
  void plan_scripted();
  void refresh_masks();
  sim::Control scripted_lead_control(const sim::VehicleState& v) const;

  EnvConfig cfg_;
  ActionTable table_;
  Scenario scenario_ = Scenario::kSvi;
  bool interference_ = true;
  bool done_ = true;
  int step_ = 0;
  std::vector<sim::VehicleState> vehicles_;
  std::vector<int> red_ids_;
  std::vector<int> agent_rows_;
  std::vector<av::AvMemory> av_memory_;
  std::vector<std::optional<sim::Control>> planned_;
  std::vector<av::AvMemory> planned_memory_;
  std::vector<ActionMask> masks_;
  std::vector<sim::Control> last_controls_;
  std::vector<bool> finished_;
  CostHistory history_;
  double lead_onset_ = 0.0;
  double lead_decel_ = 0.0;
};

}  // namespace rtmarl::cgmdp

#endif  // RTMARL_CGMDP_HPP_
