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

#ifndef RTMARL_ALGO_HPP_
#define RTMARL_ALGO_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rtmarl/cgmdp.hpp"
#include "rtmarl/nn.hpp"

namespace rtmarl::algo {

enum class Algo { kPpo, kGd3qn, kGppo, kDcGppo };

Algo algo_from_name(std::string_view name);
std::string_view algo_name(Algo algo);

struct TrainConfig {
  int episodes = 500;
  int batch_size = 32;
  double gamma = 0.9;
  double lr = 7.5e-4;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  int epochs_per_update = 4;
  /// Environment steps per gradient step.
  int minibatch_size = 256;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 5.0;
  int hidden = 64;

  double cost_limit = 0.2;
  double lambda_lr = 0.05;
  double lambda_init = 0.0;

  double eps_greedy_start = 0.8;
  double eps_greedy_end = 0.05;
  int replay_capacity = 10000;
  int target_sync = 200;
  int dqn_batch = 64;
  int dqn_update_every = 4;

  std::uint64_t seed = 0;
  /// Rollout threads; 0 reads RTMARL_THREADS and falls back to the core count.
  int threads = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// A_t = delta_t + gamma * lam * (1 - done_t) * A_{t+1}, with
/// delta_t = r_t + gamma * (1 - done_t) * V_{t+1} - V_t. The value after the
/// last entry is bootstrap unless that entry is terminal.
std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        std::span<const std::uint8_t> dones, double bootstrap, double gamma,
                        double lam);

/// One environment step of the joint red-team policy.
struct StepSample {
  nn::Tensor2 features;
  nn::Tensor2 adjacency;
  std::vector<int> agent_rows;
  nn::Tensor2 legal;  // agents x actions, 0/1 as seen by the policy
  std::vector<int> actions;
  std::vector<double> logp;
  std::vector<double> rewards;
  std::vector<double> costs;
  std::vector<double> v_reward;
  std::vector<double> v_cost;
  bool done = false;
};

/// Whole episodes, concatenated in episode order.
struct RolloutBuffer {
  std::vector<StepSample> steps;

  std::size_t agent_samples() const;
  /// Throws std::logic_error when lengths disagree, a log-probability is not
  /// finite, or the buffer does not end on an episode boundary.
  void validate() const;
};

/// Indexed [step][agent].
struct AdvantageSet {
  std::vector<std::vector<double>> a_reward;
  std::vector<std::vector<double>> a_cost;
  std::vector<std::vector<double>> a_dc;
  std::vector<std::vector<double>> ret_reward;
  std::vector<std::vector<double>> ret_cost;
};

AdvantageSet dual_advantages(const RolloutBuffer& buffer, double gamma, double lam,
                             double lambda_lag);

/// Rescales to mean 0, std 1 over every entry; left alone if std is ~0.
void standardize(std::vector<std::vector<double>>& values);

/// -mean(min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)).
double ppo_surrogate(std::span<const double> new_logp, std::span<const double> old_logp,
                     std::span<const double> advantages, double clip_eps);
/// d surrogate / d new_logp per sample.
std::vector<double> ppo_surrogate_grad(std::span<const double> new_logp,
                                       std::span<const double> old_logp,
                                       std::span<const double> advantages, double clip_eps);

struct LossTerms {
  double surrogate = 0.0;
  double entropy = 0.0;
  double value_reward = 0.0;
  double value_cost = 0.0;
  double total = 0.0;
};

/// Full clipped-surrogate loss of the model over buffer steps `indices`:
/// surrogate - entropy_coef * entropy + value_coef * (mse_R + mse_C), each a
/// mean over agent samples. mse_C is dropped when train_cost is false. With
/// accumulate set, gradients are added into the model.
LossTerms ppo_loss(nn::ActorCritic& model, const RolloutBuffer& buffer,
                   std::span<const std::size_t> indices,
                   const std::vector<std::vector<double>>& advantages, const AdvantageSet& targets,
                   const TrainConfig& cfg, bool train_cost, bool accumulate);

struct LagrangeState {
  double lambda_lag = 0.0;
  double cost_limit = 0.2;
  double eta_lambda = 0.05;
};

/// lambda <- max(0, lambda + eta * (mean_cost - limit)).
LagrangeState lagrange_update(LagrangeState state, double mean_cost);

/// Row-wise Q over legal actions; double-Q target r + gamma * (1 - done) *
/// Q_target(s', argmax_a Q_online(s', a)).
double double_q_target(double reward, bool done, std::span<const double> q_online_next,
                       std::span<const double> q_target_next,
                       std::span<const std::uint8_t> legal_next, double gamma);

/// Linear in episode index from start (first episode) to end (last episode).
double epsilon_schedule(int episode, int episodes, double start, double end);

/// Index of the sampled category; probabilities need not sum exactly to 1.
int sample_categorical(std::span<const double> probs, std::mt19937_64& rng);

/// Trained red-team policy of any of the four algorithms.
class RedTeamModel {
 public:
  RedTeamModel(Algo algo, const nn::ModelShape& shape, std::uint64_t seed);

  Algo algo() const { return algo_; }
  const nn::ModelShape& shape() const { return shape_; }
  double lambda_lag() const { return lambda_lag_; }
  void set_lambda_lag(double value) { lambda_lag_ = value; }

  nn::ActorCritic& actor_critic();
  const nn::ActorCritic& actor_critic() const;
  nn::DuelingQNetwork& q_network();
  const nn::DuelingQNetwork& q_network() const;

  std::vector<const nn::LayerParams*> layers() const;
  std::vector<nn::LayerParams*> layers();

  /// Joint action for the current state. Greedy takes the most probable
  /// (highest Q) legal action; otherwise actions are sampled.
  std::vector<int> act(const cgmdp::GraphState& state, std::span<const int> agent_rows,
                       std::span<const cgmdp::ActionMask> masks, std::mt19937_64& rng,
                       bool greedy) const;

  /// FNV-1a over every weight's bit pattern.
  std::uint64_t checksum() const;

 private:
  Algo algo_;
  nn::ModelShape shape_;
  double lambda_lag_ = 0.0;
  std::unique_ptr<nn::ActorCritic> actor_critic_;
  std::unique_ptr<nn::DuelingQNetwork> q_network_;
};

/// Policy legality mask seen by the model: the action mask for the graph
/// trainers, all ones for the flat baseline.
nn::Tensor2 policy_legal(Algo algo, std::span<const cgmdp::ActionMask> masks);

/// The executed action when the flat baseline samples an illegal one: the
/// legal action with the highest policy probability.
int enforce_legal(int action, std::span<const double> probs, const cgmdp::ActionMask& mask);

struct EpisodeRecord {
  int episode = 0;
  double reward = 0.0;
  double normalized_reward = 0.0;
  /// Mean per-step cost.
  double cost = 0.0;
  bool collision = false;
  double lambda = 0.0;
};

/// Min-max over the run's own rewards, then a trailing mean over `window`.
std::vector<double> normalize_rewards(std::span<const double> rewards, int window = 20);

struct TrainResult {
  std::unique_ptr<RedTeamModel> model;
  std::vector<EpisodeRecord> curves;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ProgressFn = std::function<void(const EpisodeRecord&)>;

struct TrainOptions {
  /// DC-GPPO only: keep lambda at its initial value.
  bool freeze_lambda = false;
  ProgressFn progress;
};

TrainResult train(Algo algo, const cgmdp::EnvConfig& env_cfg, cgmdp::Scenario scenario,
                  const TrainConfig& cfg, const TrainOptions& options = {});

TrainResult train_dc_gppo(const cgmdp::EnvConfig& env_cfg, cgmdp::Scenario scenario,
                          const TrainConfig& cfg, const TrainOptions& options = {});
TrainResult train_gppo(const cgmdp::EnvConfig& env_cfg, cgmdp::Scenario scenario,
                       const TrainConfig& cfg, const TrainOptions& options = {});
TrainResult train_ppo_flat(const cgmdp::EnvConfig& env_cfg, cgmdp::Scenario scenario,
                           const TrainConfig& cfg, const TrainOptions& options = {});
TrainResult train_gd3qn(const cgmdp::EnvConfig& env_cfg, cgmdp::Scenario scenario,
                        const TrainConfig& cfg, const TrainOptions& options = {});

/// Collects whole episodes with the given policy model; episode e uses
/// environment seed derive_seed(seed, env stream, first_episode + e).
/// Results are independent of the thread count.
RolloutBuffer collect_episodes(const RedTeamModel& model, const cgmdp::EnvConfig& env_cfg,
                               cgmdp::Scenario scenario, std::uint64_t seed, int first_episode,
                               int count, int threads,
                               std::vector<EpisodeRecord>* records = nullptr);

int resolve_threads(int requested);

/// Number of vehicles in a scenario layout.
int scenario_vehicle_count(cgmdp::Scenario scenario);
nn::ModelShape model_shape(Algo algo, cgmdp::Scenario scenario, int hidden);

inline constexpr std::uint64_t kEnvStream = 0x656e76ULL;
inline constexpr std::uint64_t kActStream = 0x616374ULL;
inline constexpr std::uint64_t kEvalStream = 0x6576616cULL;

}  // namespace rtmarl::algo

#endif  // RTMARL_ALGO_HPP_
