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

#ifndef RTMARL_NN_HPP_
#define RTMARL_NN_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtmarl/tensor.hpp"

namespace rtmarl::nn {

/// Raised when a gradient or loss stops being finite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Weights (in x out), bias, their gradient accumulators and Adam moments.
struct LayerParams {
  std::string name;
  Tensor2 weight;
  std::vector<double> bias;
  Tensor2 grad_weight;
  std::vector<double> grad_bias;
  Tensor2 m_weight;
  Tensor2 v_weight;
  std::vector<double> m_bias;
  std::vector<double> v_bias;

  LayerParams() = default;
  LayerParams(std::string name, std::size_t in, std::size_t out);

  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)); zero bias.
  void init_glorot(std::mt19937_64& rng);
  void zero_grad();
  /// Throws std::logic_error when any buffer disagrees with the weight shape.
  void check_shapes() const;

  /// Parameter k in weight-then-bias order; used by gradient checks.
  double& parameter(std::size_t k);
  double gradient(std::size_t k) const;
};

Tensor2 dense_forward(const Tensor2& x, const LayerParams& p);
/// Accumulates parameter gradients and returns d loss / d x.
Tensor2 dense_backward(const Tensor2& x, const Tensor2& d_out, LayerParams& p);

void relu_inplace(Tensor2& x);
Tensor2 relu_backward(const Tensor2& pre_activation, const Tensor2& d_out);

/// D^-1/2 A D^-1/2. Requires a symmetric matrix with unit diagonal.
Tensor2 normalize_adjacency(const Tensor2& adjacency);

struct GcnCache {
  Tensor2 propagated;  // A_hat H
  Tensor2 pre;         // A_hat H W + b
};

/// ReLU(A_hat H W + b), with A_hat already normalized.
Tensor2 gcn_forward(const Tensor2& h, const Tensor2& a_hat, const LayerParams& p,
                    GcnCache* cache = nullptr);
Tensor2 gcn_backward(const GcnCache& cache, const Tensor2& a_hat, const Tensor2& d_out,
                     LayerParams& p);

/// Row-wise softmax over entries with legal == 1; illegal entries get exactly 0.
/// Throws std::invalid_argument on a row without legal entries.
Tensor2 masked_softmax(const Tensor2& logits, const Tensor2& legal);

/// Dense logits then masked softmax.
Tensor2 policy_head(const Tensor2& embeddings, const Tensor2& legal, const LayerParams& head);

enum class EncoderKind { kGraph, kFlat };

struct ModelShape {
  EncoderKind encoder = EncoderKind::kGraph;
  int features = 22;
  int hidden = 64;
  int actions = 23;
  /// Vehicle count; only the flat encoder depends on it.
  int nodes = 0;

  bool operator==(const ModelShape&) const = default;
};

/// Per-node embeddings: two GCN layers, or a two-layer MLP over
/// [own features, all features flattened] for the flat baseline.
class Encoder {
 public:
  struct Cache {
    Tensor2 a_hat;
    Tensor2 input;
    GcnCache gcn1;
    GcnCache gcn2;
    Tensor2 hidden1;
    Tensor2 pre1;
    Tensor2 pre2;
  };

  Encoder(const ModelShape& shape, std::mt19937_64& rng);

  Tensor2 forward(const Tensor2& features, const Tensor2& adjacency, Cache& cache) const;
  void backward(const Cache& cache, const Tensor2& d_embeddings);

  std::vector<LayerParams*> layers() { return {&first_, &second_}; }
  std::vector<const LayerParams*> layers() const { return {&first_, &second_}; }
  std::vector<bool> activation_pattern(const Cache& cache) const;

 private:
  Tensor2 flat_input(const Tensor2& features) const;

  ModelShape shape_;
  LayerParams first_;
  LayerParams second_;
};

/// Dense -> ReLU -> dense.
class MlpHead {
 public:
  struct Cache {
    Tensor2 input;
    Tensor2 pre;
    Tensor2 hidden;
  };

  MlpHead() = default;
  MlpHead(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
          std::mt19937_64& rng);

  Tensor2 forward(const Tensor2& input, Cache& cache) const;
  Tensor2 backward(const Cache& cache, const Tensor2& d_out);

  std::vector<LayerParams*> layers() { return {&first_, &second_}; }
  std::vector<const LayerParams*> layers() const { return {&first_, &second_}; }

 private:
  LayerParams first_;
  LayerParams second_;
};

/// Rows of [mean over all nodes, the agent's own node].
Tensor2 pool_with_agents(const Tensor2& embeddings, std::span<const int> agent_rows);
/// Adds the gradient of pool_with_agents into d_embeddings.
void pool_with_agents_backward(const Tensor2& d_pooled, std::span<const int> agent_rows,
                               Tensor2& d_embeddings);

/// Shared encoder, masked categorical policy head over the agent rows, and
/// reward / cost value heads on [mean-pooled graph, agent node].
class ActorCritic {
 public:
  struct Pass {
    bool valid = false;
    Encoder::Cache encoder;
    Tensor2 embeddings;
    std::vector<int> agent_rows;
    Tensor2 agent_embeddings;
    Tensor2 pooled;
    MlpHead::Cache value_reward;
    MlpHead::Cache value_cost;
    Tensor2 legal;
    Tensor2 logits;
    Tensor2 probs;
    std::vector<double> v_reward;
    std::vector<double> v_cost;
  };

  ActorCritic(const ModelShape& shape, std::uint64_t seed);

  Pass forward(const Tensor2& features, const Tensor2& adjacency, std::span<const int> agent_rows,
               const Tensor2& legal) const;
  /// Reverse pass for d loss / d logits (agents x actions) and d loss / d values.
  /// Throws std::logic_error for a pass that was never recorded.
  void backward(const Pass& pass, const Tensor2& d_logits, std::span<const double> d_v_reward,
                std::span<const double> d_v_cost);

  std::vector<LayerParams*> layers();
  std::vector<const LayerParams*> layers() const;
  void zero_grad();
  const ModelShape& shape() const { return shape_; }
  /// ReLU on/off bits of a pass; a gradient check is only valid between
  /// inputs that share a pattern.
  std::vector<bool> activation_pattern(const Pass& pass) const;

 private:
  ModelShape shape_;
  Encoder encoder_;
  LayerParams policy_;
  MlpHead value_reward_;
  MlpHead value_cost_;
};

/// Dueling Q network: Q = V + A - mean(A) per agent row.
class DuelingQNetwork {
 public:
  struct Pass {
    bool valid = false;
    Encoder::Cache encoder;
    Tensor2 embeddings;
    std::vector<int> agent_rows;
    Tensor2 pooled;
    MlpHead::Cache value;
    MlpHead::Cache advantage;
    Tensor2 q;
  };

  DuelingQNetwork(const ModelShape& shape, std::uint64_t seed);

  Pass forward(const Tensor2& features, const Tensor2& adjacency,
               std::span<const int> agent_rows) const;
  void backward(const Pass& pass, const Tensor2& d_q);

  std::vector<LayerParams*> layers();
  std::vector<const LayerParams*> layers() const;
  void zero_grad();
  const ModelShape& shape() const { return shape_; }

 private:
  ModelShape shape_;
  Encoder encoder_;
  MlpHead value_;
  MlpHead advantage_;
};

/// Q = V + A - mean(A), row-wise. value is agents x 1.
Tensor2 dueling_combine(const Tensor2& value, const Tensor2& advantage);

struct AdamConfig {
  double lr = 7.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Throws NonFiniteError (leaving every parameter
/// untouched) if any gradient is not finite; t counts from 1.
void adam_step(std::span<LayerParams* const> layers, const AdamConfig& cfg, long t);

double gradient_norm(std::span<LayerParams* const> layers);
/// Rescales gradients so their global norm is at most max_norm; returns the
/// norm before clipping.
double clip_gradient_norm(std::span<LayerParams* const> layers, double max_norm);

/// Copies weights and biases (not gradients or moments) from src to dst.
void copy_weights(std::span<const LayerParams* const> src, std::span<LayerParams* const> dst);

}  // namespace rtmarl::nn

#endif  // RTMARL_NN_HPP_
