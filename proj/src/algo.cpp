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

#include "rtmarl/algo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

#include "rtmarl/random.hpp"

namespace rtmarl::algo {

Algo algo_from_name(std::string_view name) {
  if (name == "ppo") return Algo::kPpo;
  if (name == "gd3qn") return Algo::kGd3qn;
  if (name == "gppo") return Algo::kGppo;
  if (name == "dc-gppo") return Algo::kDcGppo;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) +
                              "' (expected ppo, gd3qn, gppo or dc-gppo)");
}

std::string_view algo_name(Algo algo) {
  switch (algo) {
    case Algo::kPpo:
      return "ppo";
    case Algo::kGd3qn:
      return "gd3qn";
    case Algo::kGppo:
      return "gppo";
    case Algo::kDcGppo:
      return "dc-gppo";
  }
  return "?";
}

void TrainConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("train.") + what);
  };
  require(episodes >= 0, "episodes must be non-negative");
  require(batch_size > 0, "batch_size must be positive");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(lr > 0.0, "lr must be positive");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]");
  require(clip_eps >= 0.0 && clip_eps < 1.0, "clip_eps must lie in [0, 1)");
  require(epochs_per_update > 0, "epochs_per_update must be positive");
  require(minibatch_size > 0, "minibatch_size must be positive");
  require(entropy_coef >= 0.0, "entropy_coef must be non-negative");
  require(value_coef >= 0.0, "value_coef must be non-negative");
  require(max_grad_norm > 0.0, "max_grad_norm must be positive");
  require(hidden > 0, "hidden must be positive");
  require(cost_limit >= 0.0, "cost_limit must be non-negative");
  require(lambda_lr >= 0.0, "lambda_lr must be non-negative");
  require(lambda_init >= 0.0, "lambda_init must be non-negative");
  require(eps_greedy_start >= 0.0 && eps_greedy_start <= 1.0, "eps_greedy_start must lie in [0, 1]");
  require(eps_greedy_end >= 0.0 && eps_greedy_end <= 1.0, "eps_greedy_end must lie in [0, 1]");
  require(replay_capacity > 0, "replay_capacity must be positive");
  require(target_sync > 0, "target_sync must be positive");
  require(dqn_batch > 0, "dqn_batch must be positive");
  require(dqn_update_every > 0, "dqn_update_every must be positive");
  require(threads >= 0, "threads must be non-negative");
}

std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        std::span<const std::uint8_t> dones, double bootstrap, double gamma,
                        double lam) {
  if (rewards.size() != values.size() || rewards.size() != dones.size()) {
    throw std::invalid_argument("gae: rewards, values and dones must have equal length");
  }
  const std::size_t n = rewards.size();
  std::vector<double> adv(n, 0.0);
  double next_adv = 0.0;
  double next_value = bootstrap;
  for (std::size_t i = n; i-- > 0;) {
    const double live = dones[i] != 0 ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * live * next_value - values[i];
    adv[i] = delta + gamma * lam * live * next_adv;
    next_adv = adv[i];
    next_value = values[i];
  }
  return adv;
}

std::size_t RolloutBuffer::agent_samples() const {
  std::size_t total = 0;
  for (const auto& s : steps) total += s.actions.size();
  return total;
}

void RolloutBuffer::validate() const {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const StepSample& s = steps[i];
    const std::size_t k = s.agent_rows.size();
    if (s.actions.size() != k || s.logp.size() != k || s.rewards.size() != k ||
        s.costs.size() != k || s.v_reward.size() != k || s.v_cost.size() != k ||
        s.legal.rows() != k) {
      throw std::logic_error("rollout buffer: step " + std::to_string(i) +
                             " has inconsistent per-agent lengths");
    }
    for (double lp : s.logp) {
      if (!std::isfinite(lp)) {
        throw std::logic_error("rollout buffer: non-finite log-probability at step " +
                               std::to_string(i));
      }
    }
  }
  if (!steps.empty() && !steps.back().done) {
    throw std::logic_error("rollout buffer: last step is not an episode boundary");
  }
}

AdvantageSet dual_advantages(const RolloutBuffer& buffer, double gamma, double lam,
                             double lambda_lag) {
  AdvantageSet out;
  const std::size_t n = buffer.steps.size();
  for (auto* v : {&out.a_reward, &out.a_cost, &out.a_dc, &out.ret_reward, &out.ret_cost}) {
    v->resize(n);
  }
  std::size_t begin = 0;
  while (begin < n) {
    std::size_t end = begin;
    while (end < n && !buffer.steps[end].done) ++end;
    end = std::min(end + 1, n);
    const std::size_t agents = buffer.steps[begin].actions.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (auto* v : {&out.a_reward, &out.a_cost, &out.a_dc, &out.ret_reward, &out.ret_cost}) {
        (*v)[i].assign(agents, 0.0);
      }
    }
    const std::size_t len = end - begin;
    std::vector<double> r(len), c(len), vr(len), vc(len);
    std::vector<std::uint8_t> d(len);
    for (std::size_t k = 0; k < agents; ++k) {
      for (std::size_t t = 0; t < len; ++t) {
        const StepSample& s = buffer.steps[begin + t];
        r[t] = s.rewards[k];
        c[t] = s.costs[k];
        vr[t] = s.v_reward[k];
        vc[t] = s.v_cost[k];
        d[t] = s.done ? 1 : 0;
      }
      const std::vector<double> ar = gae(r, vr, d, 0.0, gamma, lam);
      const std::vector<double> ac = gae(c, vc, d, 0.0, gamma, lam);
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t i = begin + t;
        out.a_reward[i][k] = ar[t];
        out.a_cost[i][k] = ac[t];
        out.a_dc[i][k] = ar[t] - lambda_lag * ac[t];
        out.ret_reward[i][k] = ar[t] + vr[t];
        out.ret_cost[i][k] = ac[t] + vc[t];
      }
    }
    begin = end;
  }
  return out;
}

void standardize(std::vector<std::vector<double>>& values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& row : values) {
    for (double v : row) {
      sum += v;
      ++count;
    }
  }
  if (count == 0) return;
  const double mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (const auto& row : values) {
    for (double v : row) var += (v - mean) * (v - mean);
  }
  const double sd = std::sqrt(var / static_cast<double>(count));
  if (sd < 1e-12) {
    for (auto& row : values) {
      for (double& v : row) v -= mean;
    }
    return;
  }
  for (auto& row : values) {
    for (double& v : row) v = (v - mean) / sd;
  }
}

namespace {

void check_lengths(std::size_t a, std::size_t b, std::size_t c) {
  if (a != b || a != c) throw std::invalid_argument("ppo: input lengths differ");
}

// true when the unclipped branch attains the min
bool unclipped_active(double ratio, double adv, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return ratio * adv <= clipped * adv;
}

}  // namespace

double ppo_surrogate(std::span<const double> new_logp, std::span<const double> old_logp,
                     std::span<const double> advantages, double clip_eps) {
  check_lengths(new_logp.size(), old_logp.size(), advantages.size());
  if (new_logp.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < new_logp.size(); ++i) {
    const double ratio = std::exp(new_logp[i] - old_logp[i]);
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    total += std::min(ratio * advantages[i], clipped * advantages[i]);
  }
  return -total / static_cast<double>(new_logp.size());
}

std::vector<double> ppo_surrogate_grad(std::span<const double> new_logp,
                                       std::span<const double> old_logp,
                                       std::span<const double> advantages, double clip_eps) {
  check_lengths(new_logp.size(), old_logp.size(), advantages.size());
  std::vector<double> grad(new_logp.size(), 0.0);
  const double n = static_cast<double>(new_logp.size());
  for (std::size_t i = 0; i < new_logp.size(); ++i) {
    const double ratio = std::exp(new_logp[i] - old_logp[i]);
    if (unclipped_active(ratio, advantages[i], clip_eps)) grad[i] = -ratio * advantages[i] / n;
  }
  return grad;
}

LossTerms ppo_loss(nn::ActorCritic& model, const RolloutBuffer& buffer,
                   std::span<const std::size_t> indices,
                   const std::vector<std::vector<double>>& advantages, const AdvantageSet& targets,
                   const TrainConfig& cfg, bool train_cost, bool accumulate) {
  LossTerms terms;
  std::size_t n_samples = 0;
  for (std::size_t idx : indices) n_samples += buffer.steps.at(idx).actions.size();
  if (n_samples == 0) return terms;
  const double n = static_cast<double>(n_samples);
  const double beta = cfg.entropy_coef;

  for (std::size_t idx : indices) {
    const StepSample& s = buffer.steps[idx];
    const nn::ActorCritic::Pass pass = model.forward(s.features, s.adjacency, s.agent_rows, s.legal);
    const std::size_t agents = s.actions.size();
    const std::size_t actions = pass.probs.cols();
    nn::Tensor2 d_logits(agents, actions);
    std::vector<double> d_vr(agents, 0.0);
    std::vector<double> d_vc(agents, 0.0);
    for (std::size_t k = 0; k < agents; ++k) {
      const auto a = static_cast<std::size_t>(s.actions[k]);
      const double p_a = pass.probs(k, a);
      const double logp = std::log(p_a);
      const double ratio = std::exp(logp - s.logp[k]);
      const double adv = advantages[idx][k];
      const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
      terms.surrogate -= std::min(ratio * adv, clipped * adv) / n;
      const double g_logp = unclipped_active(ratio, adv, cfg.clip_eps) ? -ratio * adv / n : 0.0;

      double entropy = 0.0;
      for (std::size_t j = 0; j < actions; ++j) {
        const double p = pass.probs(k, j);
        if (p > 0.0) entropy -= p * std::log(p);
      }
      terms.entropy += entropy / n;

      for (std::size_t j = 0; j < actions; ++j) {
        if (s.legal(k, j) == 0.0) continue;
        const double p = pass.probs(k, j);
        double g = g_logp * ((j == a ? 1.0 : 0.0) - p);
        if (p > 0.0) g += beta / n * p * (std::log(p) + entropy);
        d_logits(k, j) = g;
      }

      const double er = pass.v_reward[k] - targets.ret_reward[idx][k];
      terms.value_reward += er * er / n;
      d_vr[k] = 2.0 * cfg.value_coef * er / n;
      const double ec = pass.v_cost[k] - targets.ret_cost[idx][k];
      terms.value_cost += ec * ec / n;
      if (train_cost) d_vc[k] = 2.0 * cfg.value_coef * ec / n;
    }
    if (accumulate) model.backward(pass, d_logits, d_vr, d_vc);
  }
  terms.total = terms.surrogate - beta * terms.entropy +
                cfg.value_coef * (terms.value_reward + (train_cost ? terms.value_cost : 0.0));
  return terms;
}

LagrangeState lagrange_update(LagrangeState state, double mean_cost) {
  if (!(mean_cost >= 0.0)) throw std::invalid_argument("lagrange_update: cost must be >= 0");
  state.lambda_lag =
      std::max(0.0, state.lambda_lag + state.eta_lambda * (mean_cost - state.cost_limit));
  return state;
}

double double_q_target(double reward, bool done, std::span<const double> q_online_next,
                       std::span<const double> q_target_next,
                       std::span<const std::uint8_t> legal_next, double gamma) {
  if (done) return reward;
  int best = -1;
  for (std::size_t j = 0; j < q_online_next.size(); ++j) {
    if (legal_next[j] == 0) continue;
    if (best < 0 || q_online_next[j] > q_online_next[static_cast<std::size_t>(best)]) {
      best = static_cast<int>(j);
    }
  }
  if (best < 0) throw std::invalid_argument("double_q_target: no legal next action");
  return reward + gamma * q_target_next[static_cast<std::size_t>(best)];
}

double epsilon_schedule(int episode, int episodes, double start, double end) {
  if (episodes <= 1) return start;
  const double frac =
      std::clamp(static_cast<double>(episode) / static_cast<double>(episodes - 1), 0.0, 1.0);
  return start + (end - start) * frac;
}

int sample_categorical(std::span<const double> probs, std::mt19937_64& rng) {
  double total = 0.0;
  for (double p : probs) total += p;
  const double u = unit_uniform(rng) * total;
  double acc = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = static_cast<int>(i);
    if (u < acc) return last;
  }
  if (last < 0) throw std::invalid_argument("sample_categorical: no positive probability");
  return last;
}

// ---------------------------------------------------------------------------

int scenario_vehicle_count(cgmdp::Scenario scenario) {
  return scenario == cgmdp::Scenario::kSvi ? 4 : 6;
}

nn::ModelShape model_shape(Algo algo, cgmdp::Scenario scenario, int hidden) {
  nn::ModelShape shape;
  shape.encoder = algo == Algo::kPpo ? nn::EncoderKind::kFlat : nn::EncoderKind::kGraph;
  shape.features = cgmdp::kFeatureCount;
  shape.hidden = hidden;
  shape.actions = cgmdp::kActionCount;
  shape.nodes = algo == Algo::kPpo ? scenario_vehicle_count(scenario) : 0;
  return shape;
}

RedTeamModel::RedTeamModel(Algo algo, const nn::ModelShape& shape, std::uint64_t seed)
    : algo_(algo), shape_(shape) {
  if (algo == Algo::kGd3qn) {
    q_network_ = std::make_unique<nn::DuelingQNetwork>(shape, seed);
  } else {
    actor_critic_ = std::make_unique<nn::ActorCritic>(shape, seed);
  }
}

nn::ActorCritic& RedTeamModel::actor_critic() {
  if (!actor_critic_) throw std::logic_error("model has no actor-critic network");
  return *actor_critic_;
}
const nn::ActorCritic& RedTeamModel::actor_critic() const {
  if (!actor_critic_) throw std::logic_error("model has no actor-critic network");
  return *actor_critic_;
}
nn::DuelingQNetwork& RedTeamModel::q_network() {
  if (!q_network_) throw std::logic_error("model has no Q network");
  return *q_network_;
}
const nn::DuelingQNetwork& RedTeamModel::q_network() const {
  if (!q_network_) throw std::logic_error("model has no Q network");
  return *q_network_;
}

std::vector<const nn::LayerParams*> RedTeamModel::layers() const {
  if (q_network_) return static_cast<const nn::DuelingQNetwork&>(*q_network_).layers();
  return static_cast<const nn::ActorCritic&>(*actor_critic_).layers();
}

std::vector<nn::LayerParams*> RedTeamModel::layers() {
  if (q_network_) return q_network_->layers();
  return actor_critic_->layers();
}

nn::Tensor2 policy_legal(Algo algo, std::span<const cgmdp::ActionMask> masks) {
  nn::Tensor2 legal(masks.size(), cgmdp::kActionCount, 1.0);
  if (algo == Algo::kPpo) return legal;
  for (std::size_t k = 0; k < masks.size(); ++k) {
    for (int j = 0; j < cgmdp::kActionCount; ++j) {
      legal(k, static_cast<std::size_t>(j)) = masks[k][j] ? 1.0 : 0.0;
    }
  }
  return legal;
}

int enforce_legal(int action, std::span<const double> probs, const cgmdp::ActionMask& mask) {
  if (mask[action]) return action;
  int best = -1;
  for (int j = 0; j < cgmdp::kActionCount; ++j) {
    if (!mask[j]) continue;
    if (best < 0 || probs[static_cast<std::size_t>(j)] > probs[static_cast<std::size_t>(best)]) {
      best = j;
    }
  }
  if (best < 0) throw std::logic_error("enforce_legal: mask has no legal action");
  return best;
}

namespace {

int argmax_legal(std::span<const double> values, const cgmdp::ActionMask& mask) {
  int best = -1;
  for (int j = 0; j < cgmdp::kActionCount; ++j) {
    if (!mask[j]) continue;
    if (best < 0 || values[static_cast<std::size_t>(j)] > values[static_cast<std::size_t>(best)]) {
      best = j;
    }
  }
  if (best < 0) throw std::logic_error("no legal action");
  return best;
}

}  // namespace

std::vector<int> RedTeamModel::act(const cgmdp::GraphState& state,
                                   std::span<const int> agent_rows,
                                   std::span<const cgmdp::ActionMask> masks, std::mt19937_64& rng,
                                   bool greedy) const {
  std::vector<int> actions(agent_rows.size());
  if (q_network_) {
    const auto pass = q_network_->forward(state.node_features, state.adjacency, agent_rows);
    for (std::size_t k = 0; k < actions.size(); ++k) actions[k] = argmax_legal(pass.q.row(k), masks[k]);
    return actions;
  }
  const nn::Tensor2 legal = policy_legal(algo_, masks);
  const auto pass = actor_critic_->forward(state.node_features, state.adjacency, agent_rows, legal);
  cgmdp::ActionMask all;
  all.legal.fill(1);
  for (std::size_t k = 0; k < actions.size(); ++k) {
    const auto probs = pass.probs.row(k);
    const int chosen = greedy ? argmax_legal(probs, all) : sample_categorical(probs, rng);
    actions[k] = enforce_legal(chosen, probs, masks[k]);
  }
  return actions;
}

std::uint64_t RedTeamModel::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  for (const nn::LayerParams* p : layers()) {
    for (double w : p->weight.data()) feed(w);
    for (double b : p->bias) feed(b);
  }
  return h;
}

std::vector<double> normalize_rewards(std::span<const double> rewards, int window) {
  std::vector<double> out(rewards.size(), 0.0);
  if (rewards.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(rewards.begin(), rewards.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  std::vector<double> scaled(rewards.size(), 0.0);
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    scaled[i] = span > 0.0 ? (rewards[i] - lo) / span : 0.0;
  }
  const auto w = static_cast<std::size_t>(std::max(window, 1));
  double acc = 0.0;
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    acc += scaled[i];
    if (i >= w) acc -= scaled[i - w];
    out[i] = acc / static_cast<double>(std::min(i + 1, w));
  }
  return out;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RTMARL_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
}

// ---------------------------------------------------------------------------

namespace {

bool av_collision(const std::vector<sim::CollisionEvent>& events,
                  const std::vector<sim::VehicleState>& vehicles) {
  const auto is_av = [&](int id) {
    for (const auto& v : vehicles) {
      if (v.id == id) return v.role == sim::Role::kAv;
    }
    return false;
  };
  for (const auto& e : events) {
    if (is_av(e.striker_id) || is_av(e.struck_id)) return true;
  }
  return false;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct EpisodeTotals {
  double reward = 0.0;
  double cost = 0.0;
  int steps = 0;
  bool collision = false;

  void add(const cgmdp::StepOutcome& out, const std::vector<sim::VehicleState>& vehicles) {
    reward += mean(out.rewards);
    cost += mean(out.costs);
    ++steps;
    collision = collision || av_collision(out.info.collisions, vehicles);
  }

  EpisodeRecord record(int episode) const {
    EpisodeRecord r;
    r.episode = episode;
    r.reward = reward;
    r.cost = steps > 0 ? cost / steps : 0.0;
    r.collision = collision;
    return r;
  }
};

std::vector<StepSample> run_episode(const RedTeamModel& model, cgmdp::Environment& env,
                                    cgmdp::Scenario scenario, std::uint64_t seed, int episode,
                                    EpisodeRecord* record) {
  const auto ep = static_cast<std::uint64_t>(episode);
  env.reset(scenario, derive_seed(seed, kEnvStream, ep));
  std::mt19937_64 rng(derive_seed(seed, kActStream, ep));
  const nn::ActorCritic& net = model.actor_critic();
  std::vector<StepSample> steps;
  EpisodeTotals totals;
  while (!env.done()) {
    const cgmdp::GraphState state = env.observe();
    const auto& masks = env.legal_masks();
    StepSample s;
    s.features = state.node_features;
    s.adjacency = state.adjacency;
    s.agent_rows = env.agent_rows();
    s.legal = policy_legal(model.algo(), masks);
    const auto pass = net.forward(s.features, s.adjacency, s.agent_rows, s.legal);
    std::vector<int> executed(s.agent_rows.size());
    for (std::size_t k = 0; k < s.agent_rows.size(); ++k) {
      const auto probs = pass.probs.row(k);
      const int a = sample_categorical(probs, rng);
      s.actions.push_back(a);
      s.logp.push_back(std::log(probs[static_cast<std::size_t>(a)]));
      executed[k] = enforce_legal(a, probs, masks[k]);
    }
    s.v_reward = pass.v_reward;
    s.v_cost = pass.v_cost;
    const cgmdp::StepOutcome out = env.step(executed);
    s.rewards = out.rewards;
    s.costs = out.costs;
    s.done = out.done;
    totals.add(out, env.vehicles());
    steps.push_back(std::move(s));
  }
  if (record != nullptr) *record = totals.record(episode);
  return steps;
}

std::string describe_batch(const RolloutBuffer& buffer, std::span<const std::size_t> indices,
                           const std::vector<std::vector<double>>& adv, const LossTerms& terms) {
  std::ostringstream os;
  os << "non-finite loss (surrogate " << terms.surrogate << ", entropy " << terms.entropy
     << ", value_reward " << terms.value_reward << ", value_cost " << terms.value_cost << ")\n";
  for (std::size_t idx : indices) {
    const StepSample& s = buffer.steps[idx];
    os << "  step " << idx;
    for (std::size_t k = 0; k < s.actions.size(); ++k) {
      os << " [a=" << s.actions[k] << " logp=" << s.logp[k] << " r=" << s.rewards[k]
         << " c=" << s.costs[k] << " adv=" << adv[idx][k] << "]";
    }
    os << "\n";
  }
  return os.str();
}

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;
constexpr std::uint64_t kReplayStream = 0x7265706cULL;

TrainResult train_actor_critic(Algo algo, const cgmdp::EnvConfig& env_cfg,
                               cgmdp::Scenario scenario, const TrainConfig& cfg,
                               const TrainOptions& options) {
  cfg.validate();
  env_cfg.validate();
  TrainResult result;
  result.model = std::make_unique<RedTeamModel>(algo, model_shape(algo, scenario, cfg.hidden),
                                                derive_seed(cfg.seed, kInitStream, 0));
  RedTeamModel& model = *result.model;
  nn::ActorCritic& net = model.actor_critic();
  const bool dual = algo == Algo::kDcGppo;
  LagrangeState lag{cfg.lambda_init, cfg.cost_limit, cfg.lambda_lr};
  const nn::AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  long adam_t = 0;
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, kShuffleStream, 0));
  const int threads = resolve_threads(cfg.threads);

  for (int start = 0; start < cfg.episodes; start += cfg.batch_size) {
    const int count = std::min(cfg.batch_size, cfg.episodes - start);
    model.set_lambda_lag(lag.lambda_lag);
    std::vector<EpisodeRecord> records;
    const RolloutBuffer buffer =
        collect_episodes(model, env_cfg, scenario, cfg.seed, start, count, threads, &records);
    buffer.validate();

    AdvantageSet adv = dual_advantages(buffer, cfg.gamma, cfg.gae_lambda, dual ? lag.lambda_lag : 0.0);
    std::vector<std::vector<double>> a = dual ? adv.a_dc : adv.a_reward;
    standardize(a);

    std::vector<std::size_t> order(buffer.steps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto mb = static_cast<std::size_t>(cfg.minibatch_size);
    for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
      shuffle(order, shuffle_rng);
      for (std::size_t b = 0; b < order.size(); b += mb) {
        const std::span<const std::size_t> idx(order.data() + b, std::min(mb, order.size() - b));
        net.zero_grad();
        const LossTerms terms = ppo_loss(net, buffer, idx, a, adv, cfg, dual, true);
        if (!std::isfinite(terms.total)) throw TrainingError(describe_batch(buffer, idx, a, terms));
        auto layers = net.layers();
        try {
          nn::clip_gradient_norm(layers, cfg.max_grad_norm);
          nn::adam_step(layers, adam, ++adam_t);
        } catch (const nn::NonFiniteError& e) {
          throw TrainingError(std::string(e.what()) + "\n" + describe_batch(buffer, idx, a, terms));
        }
      }
    }

    double cost_sum = 0.0;
    for (const auto& s : buffer.steps) {
      for (double c : s.costs) cost_sum += c;
    }
    const double mean_cost = cost_sum / static_cast<double>(std::max<std::size_t>(1, buffer.agent_samples()));
    for (auto& r : records) {
      r.lambda = lag.lambda_lag;
      result.curves.push_back(r);
      if (options.progress) options.progress(r);
    }
    if (dual && !options.freeze_lambda) lag = lagrange_update(lag, mean_cost);
  }
  model.set_lambda_lag(lag.lambda_lag);

  std::vector<double> raw;
  for (const auto& r : result.curves) raw.push_back(r.reward);
  const std::vector<double> norm = normalize_rewards(raw);
  for (std::size_t i = 0; i < result.curves.size(); ++i) result.curves[i].normalized_reward = norm[i];
  return result;
}

struct Transition {
  nn::Tensor2 features;
  nn::Tensor2 adjacency;
  std::vector<int> actions;
  std::vector<double> rewards;
  nn::Tensor2 next_features;
  nn::Tensor2 next_adjacency;
  std::vector<cgmdp::ActionMask> next_masks;
  bool done = false;
};

}  // namespace

RolloutBuffer collect_episodes(const RedTeamModel& model, const cgmdp::EnvConfig& env_cfg,
                               cgmdp::Scenario scenario, std::uint64_t seed, int first_episode,
                               int count, int threads, std::vector<EpisodeRecord>* records) {
  std::vector<std::vector<StepSample>> per_episode(static_cast<std::size_t>(std::max(count, 0)));
  std::vector<EpisodeRecord> recs(per_episode.size());
  const int workers = std::clamp(threads, 1, std::max(count, 1));
  const auto work = [&](int worker) {
    cgmdp::Environment env(env_cfg);
    for (int e = worker; e < count; e += workers) {
      const auto i = static_cast<std::size_t>(e);
      per_episode[i] = run_episode(model, env, scenario, seed, first_episode + e, &recs[i]);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  RolloutBuffer buffer;
  for (auto& ep : per_episode) {
    for (auto& s : ep) buffer.steps.push_back(std::move(s));
  }
  if (records != nullptr) *records = std::move(recs);
  return buffer;
}

TrainResult train_dc_gppo(const cgmdp::EnvConfig& env_cfg, cgmdp::Scenario scenario,
                          const TrainConfig& cfg, const TrainOptions& options) {
  return train_actor_critic(Algo::kDcGppo, env_cfg, scenario, cfg, options);
}

TrainResult train_gppo(const cgmdp::EnvConfig& env_cfg, cgmdp::Scenario scenario,
                       const TrainConfig& cfg, const TrainOptions& options) {
  return train_actor_critic(Algo::kGppo, env_cfg, scenario, cfg, options);
}

TrainResult train_ppo_flat(const cgmdp::EnvConfig& env_cfg, cgmdp::Scenario scenario,
                           const TrainConfig& cfg, const TrainOptions& options) {
  return train_actor_critic(Algo::kPpo, env_cfg, scenario, cfg, options);
}

TrainResult train_gd3qn(const cgmdp::EnvConfig& env_cfg, cgmdp::Scenario scenario,
                        const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  env_cfg.validate();
  const nn::ModelShape shape = model_shape(Algo::kGd3qn, scenario, cfg.hidden);
  TrainResult result;
  result.model = std::make_unique<RedTeamModel>(Algo::kGd3qn, shape,
                                                derive_seed(cfg.seed, kInitStream, 0));
  nn::DuelingQNetwork& online = result.model->q_network();
  nn::DuelingQNetwork target(shape, 0);
  {
    const auto src = static_cast<const nn::DuelingQNetwork&>(online).layers();
    const auto dst = target.layers();
    nn::copy_weights(src, dst);
  }
  const nn::AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  long adam_t = 0;
  long updates = 0;
  long env_steps = 0;
  std::vector<Transition> replay;
  std::size_t replay_next = 0;
  std::mt19937_64 replay_rng(derive_seed(cfg.seed, kReplayStream, 0));
  cgmdp::Environment env(env_cfg);

  const auto learn = [&] {
    const std::size_t batch = static_cast<std::size_t>(cfg.dqn_batch);
    std::vector<std::size_t> picks(batch);
    std::size_t samples = 0;
    for (auto& p : picks) {
      p = static_cast<std::size_t>(unit_uniform(replay_rng) * static_cast<double>(replay.size()));
      p = std::min(p, replay.size() - 1);
      samples += replay[p].actions.size();
    }
    online.zero_grad();
    double loss = 0.0;
    const std::vector<int>& rows = env.agent_rows();
    for (std::size_t p : picks) {
      const Transition& t = replay[p];
      const auto pass = online.forward(t.features, t.adjacency, rows);
      nn::Tensor2 d_q(pass.q.rows(), pass.q.cols());
      std::optional<nn::DuelingQNetwork::Pass> next_online;
      std::optional<nn::DuelingQNetwork::Pass> next_target;
      if (!t.done) {
        next_online = online.forward(t.next_features, t.next_adjacency, rows);
        next_target = target.forward(t.next_features, t.next_adjacency, rows);
      }
      for (std::size_t k = 0; k < t.actions.size(); ++k) {
        double y = t.rewards[k];
        if (!t.done) {
          y = double_q_target(t.rewards[k], false, next_online->q.row(k), next_target->q.row(k),
                              t.next_masks[k].legal, cfg.gamma);
        }
        const auto a = static_cast<std::size_t>(t.actions[k]);
        const double err = pass.q(k, a) - y;
        loss += 0.5 * err * err / static_cast<double>(samples);
        d_q(k, a) = err / static_cast<double>(samples);
      }
      online.backward(pass, d_q);
    }
    if (!std::isfinite(loss)) throw TrainingError("non-finite Q loss " + std::to_string(loss));
    auto layers = online.layers();
    try {
      nn::clip_gradient_norm(layers, cfg.max_grad_norm);
      nn::adam_step(layers, adam, ++adam_t);
    } catch (const nn::NonFiniteError& e) {
      throw TrainingError(e.what());
    }
    if (++updates % cfg.target_sync == 0) {
      const auto src = static_cast<const nn::DuelingQNetwork&>(online).layers();
      const auto dst = target.layers();
      nn::copy_weights(src, dst);
    }
  };

  for (int episode = 0; episode < cfg.episodes; ++episode) {
    const auto ep = static_cast<std::uint64_t>(episode);
    const double eps =
        epsilon_schedule(episode, cfg.episodes, cfg.eps_greedy_start, cfg.eps_greedy_end);
    env.reset(scenario, derive_seed(cfg.seed, kEnvStream, ep));
    std::mt19937_64 rng(derive_seed(cfg.seed, kActStream, ep));
    EpisodeTotals totals;
    cgmdp::GraphState state = env.observe();
    while (!env.done()) {
      const auto masks = env.legal_masks();
      const auto& rows = env.agent_rows();
      const auto pass = online.forward(state.node_features, state.adjacency, rows);
      std::vector<int> actions(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) {
        if (unit_uniform(rng) < eps) {
          std::vector<double> uniform_probs(cgmdp::kActionCount, 0.0);
          for (int j = 0; j < cgmdp::kActionCount; ++j) uniform_probs[static_cast<std::size_t>(j)] = masks[k][j] ? 1.0 : 0.0;
          actions[k] = sample_categorical(uniform_probs, rng);
        } else {
          actions[k] = argmax_legal(pass.q.row(k), masks[k]);
        }
      }
      const cgmdp::StepOutcome out = env.step(actions);
      totals.add(out, env.vehicles());
      Transition t;
      t.features = state.node_features;
      t.adjacency = state.adjacency;
      t.actions = actions;
      t.rewards = out.rewards;
      t.next_features = out.next_state.node_features;
      t.next_adjacency = out.next_state.adjacency;
      t.next_masks = env.legal_masks();
      t.done = out.done;
      if (replay.size() < static_cast<std::size_t>(cfg.replay_capacity)) {
        replay.push_back(std::move(t));
      } else {
        replay[replay_next] = std::move(t);
      }
      replay_next = (replay_next + 1) % static_cast<std::size_t>(cfg.replay_capacity);
      state = out.next_state;
      if (++env_steps % cfg.dqn_update_every == 0 &&
          replay.size() >= static_cast<std::size_t>(cfg.dqn_batch)) {
        learn();
      }
    }
    EpisodeRecord r = totals.record(episode);
    result.curves.push_back(r);
    if (options.progress) options.progress(r);
  }

  std::vector<double> raw;
  for (const auto& r : result.curves) raw.push_back(r.reward);
  const std::vector<double> norm = normalize_rewards(raw);
  for (std::size_t i = 0; i < result.curves.size(); ++i) result.curves[i].normalized_reward = norm[i];
  return result;
}

TrainResult train(Algo algo, const cgmdp::EnvConfig& env_cfg, cgmdp::Scenario scenario,
                  const TrainConfig& cfg, const TrainOptions& options) {
  switch (algo) {
    case Algo::kPpo:
      return train_ppo_flat(env_cfg, scenario, cfg, options);
    case Algo::kGd3qn:
      return train_gd3qn(env_cfg, scenario, cfg, options);
    case Algo::kGppo:
      return train_gppo(env_cfg, scenario, cfg, options);
    case Algo::kDcGppo:
      return train_dc_gppo(env_cfg, scenario, cfg, options);
  }
  throw std::invalid_argument("unknown algorithm");
}

}  // namespace rtmarl::algo
