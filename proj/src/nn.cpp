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

#include "rtmarl/nn.hpp"

#include "rtmarl/random.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rtmarl::nn {

LayerParams::LayerParams(std::string layer_name, std::size_t in, std::size_t out)
    : name(std::move(layer_name)),
      weight(in, out),
      bias(out, 0.0),
      grad_weight(in, out),
      grad_bias(out, 0.0),
      m_weight(in, out),
      v_weight(in, out),
      m_bias(out, 0.0),
      v_bias(out, 0.0) {}

void LayerParams::init_glorot(std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in() + out()));
  for (double& w : weight.data()) w = uniform(rng, -limit, limit);
  std::fill(bias.begin(), bias.end(), 0.0);
}

void LayerParams::zero_grad() {
  grad_weight.fill(0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
}

void LayerParams::check_shapes() const {
  const auto same = [&](const Tensor2& t) { return t.rows() == in() && t.cols() == out(); };
  if (!same(grad_weight) || !same(m_weight) || !same(v_weight) || bias.size() != out() ||
      grad_bias.size() != out() || m_bias.size() != out() || v_bias.size() != out()) {
    throw std::logic_error("layer " + name + ": inconsistent buffer shapes");
  }
}

double& LayerParams::parameter(std::size_t k) {
  if (k < weight.size()) return weight.data()[k];
  return bias.at(k - weight.size());
}

double LayerParams::gradient(std::size_t k) const {
  if (k < grad_weight.size()) return grad_weight.data()[k];
  return grad_bias.at(k - grad_weight.size());
}

Tensor2 dense_forward(const Tensor2& x, const LayerParams& p) {
  if (x.cols() != p.in()) {
    throw std::invalid_argument("layer " + p.name + ": input " + x.shape_string() +
                                " does not match weight " + p.weight.shape_string());
  }
  Tensor2 out = matmul(x, p.weight);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += p.bias[c];
  }
  return out;
}

Tensor2 dense_backward(const Tensor2& x, const Tensor2& d_out, LayerParams& p) {
  if (d_out.rows() != x.rows() || d_out.cols() != p.out()) {
    throw std::invalid_argument("layer " + p.name + ": gradient shape " +
                                d_out.shape_string() + " does not match output");
  }
  const Tensor2 gw = matmul_tn(x, d_out);
  for (std::size_t i = 0; i < gw.size(); ++i) p.grad_weight.data()[i] += gw.data()[i];
  for (std::size_t r = 0; r < d_out.rows(); ++r) {
    auto row = d_out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) p.grad_bias[c] += row[c];
  }
  return matmul_nt(d_out, p.weight);
}

void relu_inplace(Tensor2& x) {
  for (double& v : x.data()) v = v > 0.0 ? v : 0.0;
}

Tensor2 relu_backward(const Tensor2& pre, const Tensor2& d_out) {
  Tensor2 d = d_out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(pre.data()[i] > 0.0)) d.data()[i] = 0.0;
  }
  return d;
}

Tensor2 normalize_adjacency(const Tensor2& a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("adjacency must be square, got " + a.shape_string());
  }
  const std::size_t n = a.rows();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (a(i, i) != 1.0) throw std::invalid_argument("adjacency diagonal must be 1");
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (a(i, j) != a(j, i)) throw std::invalid_argument("adjacency must be symmetric");
      deg += a(i, j);
    }
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  Tensor2 out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(i, j) = inv_sqrt[i] * a(i, j) * inv_sqrt[j];
  }
  return out;
}

Tensor2 gcn_forward(const Tensor2& h, const Tensor2& a_hat, const LayerParams& p,
                    GcnCache* cache) {
  Tensor2 propagated = matmul(a_hat, h);
  Tensor2 pre = dense_forward(propagated, p);
  Tensor2 out = pre;
  relu_inplace(out);
  if (cache != nullptr) {
    cache->propagated = std::move(propagated);
    cache->pre = std::move(pre);
  }
  return out;
}

Tensor2 gcn_backward(const GcnCache& cache, const Tensor2& a_hat, const Tensor2& d_out,
                     LayerParams& p) {
  const Tensor2 d_pre = relu_backward(cache.pre, d_out);
  const Tensor2 d_prop = dense_backward(cache.propagated, d_pre, p);
  // a_hat is symmetric
  return matmul(a_hat, d_prop);
}

Tensor2 masked_softmax(const Tensor2& logits, const Tensor2& legal) {
  if (logits.rows() != legal.rows() || logits.cols() != legal.cols()) {
    throw std::invalid_argument("masked_softmax: mask " + legal.shape_string() +
                                " does not match logits " + logits.shape_string());
  }
  Tensor2 out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      if (legal(r, c) != 0.0) peak = std::max(peak, logits(r, c));
    }
    if (!std::isfinite(peak)) {
      throw std::invalid_argument("masked_softmax: row " + std::to_string(r) +
                                  " has no legal entry");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      if (legal(r, c) != 0.0) {
        out(r, c) = std::exp(logits(r, c) - peak);
        total += out(r, c);
      }
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) out(r, c) /= total;
  }
  return out;
}

Tensor2 policy_head(const Tensor2& embeddings, const Tensor2& legal, const LayerParams& head) {
  return masked_softmax(dense_forward(embeddings, head), legal);
}

// ---------------------------------------------------------------------------

Encoder::Encoder(const ModelShape& shape, std::mt19937_64& rng) : shape_(shape) {
  const auto f = static_cast<std::size_t>(shape.features);
  const auto h = static_cast<std::size_t>(shape.hidden);
  if (shape.encoder == EncoderKind::kGraph) {
    first_ = LayerParams("gcn1", f, h);
  } else {
    if (shape.nodes <= 0) throw std::invalid_argument("flat encoder needs a node count");
    first_ = LayerParams("flat1", f * static_cast<std::size_t>(shape.nodes + 1), h);
  }
  second_ = LayerParams(shape.encoder == EncoderKind::kGraph ? "gcn2" : "flat2", h, h);
  first_.init_glorot(rng);
  second_.init_glorot(rng);
}

Tensor2 Encoder::flat_input(const Tensor2& features) const {
  const std::size_t n = features.rows();
  const std::size_t f = features.cols();
  if (static_cast<int>(n) != shape_.nodes) {
    throw std::invalid_argument("flat encoder built for " + std::to_string(shape_.nodes) +
                                " nodes, got " + std::to_string(n));
  }
  Tensor2 in(n, f * (n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < f; ++c) in(i, c) = features(i, c);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t c = 0; c < f; ++c) in(i, f + j * f + c) = features(j, c);
    }
  }
  return in;
}

Tensor2 Encoder::forward(const Tensor2& features, const Tensor2& adjacency, Cache& cache) const {
  if (static_cast<int>(features.cols()) != shape_.features) {
    throw std::invalid_argument("encoder expects " + std::to_string(shape_.features) +
                                " features, got " + features.shape_string());
  }
  if (shape_.encoder == EncoderKind::kGraph) {
    if (adjacency.rows() != features.rows()) {
      throw std::invalid_argument("adjacency " + adjacency.shape_string() +
                                  " does not match features " + features.shape_string());
    }
    cache.a_hat = normalize_adjacency(adjacency);
    cache.input = features;
    cache.hidden1 = gcn_forward(features, cache.a_hat, first_, &cache.gcn1);
    return gcn_forward(cache.hidden1, cache.a_hat, second_, &cache.gcn2);
  }
  cache.input = flat_input(features);
  cache.pre1 = dense_forward(cache.input, first_);
  cache.hidden1 = cache.pre1;
  relu_inplace(cache.hidden1);
  cache.pre2 = dense_forward(cache.hidden1, second_);
  Tensor2 out = cache.pre2;
  relu_inplace(out);
  return out;
}

void Encoder::backward(const Cache& cache, const Tensor2& d_embeddings) {
  if (shape_.encoder == EncoderKind::kGraph) {
    const Tensor2 d_h1 = gcn_backward(cache.gcn2, cache.a_hat, d_embeddings, second_);
    gcn_backward(cache.gcn1, cache.a_hat, d_h1, first_);
    return;
  }
  const Tensor2 d_h1 = dense_backward(cache.hidden1, relu_backward(cache.pre2, d_embeddings),
                                      second_);
  dense_backward(cache.input, relu_backward(cache.pre1, d_h1), first_);
}

std::vector<bool> Encoder::activation_pattern(const Cache& cache) const {
  std::vector<bool> bits;
  const auto push = [&](const Tensor2& t) {
    for (double v : t.data()) bits.push_back(v > 0.0);
  };
  if (shape_.encoder == EncoderKind::kGraph) {
    push(cache.gcn1.pre);
    push(cache.gcn2.pre);
  } else {
    push(cache.pre1);
    push(cache.pre2);
  }
  return bits;
}

MlpHead::MlpHead(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
                 std::mt19937_64& rng)
    : first_(name + "1", in, hidden), second_(name + "2", hidden, out) {
  first_.init_glorot(rng);
  second_.init_glorot(rng);
}

Tensor2 MlpHead::forward(const Tensor2& input, Cache& cache) const {
  cache.input = input;
  cache.pre = dense_forward(input, first_);
  cache.hidden = cache.pre;
  relu_inplace(cache.hidden);
  return dense_forward(cache.hidden, second_);
}

Tensor2 MlpHead::backward(const Cache& cache, const Tensor2& d_out) {
  const Tensor2 d_hidden = dense_backward(cache.hidden, d_out, second_);
  return dense_backward(cache.input, relu_backward(cache.pre, d_hidden), first_);
}

Tensor2 pool_with_agents(const Tensor2& embeddings, std::span<const int> agent_rows) {
  const std::size_t n = embeddings.rows();
  const std::size_t h = embeddings.cols();
  std::vector<double> mean(h, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < h; ++c) mean[c] += embeddings(i, c);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  Tensor2 out(agent_rows.size(), 2 * h);
  for (std::size_t k = 0; k < agent_rows.size(); ++k) {
    const auto row = static_cast<std::size_t>(agent_rows[k]);
    if (row >= n) throw std::out_of_range("agent row out of range");
    for (std::size_t c = 0; c < h; ++c) {
      out(k, c) = mean[c];
      out(k, h + c) = embeddings(row, c);
    }
  }
  return out;
}

void pool_with_agents_backward(const Tensor2& d_pooled, std::span<const int> agent_rows,
                               Tensor2& d_embeddings) {
  const std::size_t n = d_embeddings.rows();
  const std::size_t h = d_embeddings.cols();
  std::vector<double> d_mean(h, 0.0);
  for (std::size_t k = 0; k < agent_rows.size(); ++k) {
    const auto row = static_cast<std::size_t>(agent_rows[k]);
    for (std::size_t c = 0; c < h; ++c) {
      d_mean[c] += d_pooled(k, c);
      d_embeddings(row, c) += d_pooled(k, h + c);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < h; ++c) d_embeddings(i, c) += d_mean[c] / static_cast<double>(n);
  }
}

namespace {

Tensor2 gather_rows(const Tensor2& t, std::span<const int> rows) {
  Tensor2 out(rows.size(), t.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto src = t.row(static_cast<std::size_t>(rows[k]));
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

Tensor2 column(std::span<const double> values) {
  return Tensor2(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

template <typename T>
void append(std::vector<T>& dst, const std::vector<T>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

ActorCritic::ActorCritic(const ModelShape& shape, std::uint64_t seed)
    : shape_(shape),
      encoder_([&]() -> Encoder {
        std::mt19937_64 rng(seed);
        return Encoder(shape, rng);
      }()) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto h = static_cast<std::size_t>(shape.hidden);
  policy_ = LayerParams("policy", h, static_cast<std::size_t>(shape.actions));
  policy_.init_glorot(rng);
  // small initial logits keep the first policy close to uniform
  for (double& w : policy_.weight.data()) w *= 0.01;
  value_reward_ = MlpHead("value_reward", 2 * h, h, 1, rng);
  value_cost_ = MlpHead("value_cost", 2 * h, h, 1, rng);
}

ActorCritic::Pass ActorCritic::forward(const Tensor2& features, const Tensor2& adjacency,
                                       std::span<const int> agent_rows,
                                       const Tensor2& legal) const {
  if (legal.rows() != agent_rows.size() || static_cast<int>(legal.cols()) != shape_.actions) {
    throw std::invalid_argument("legal mask " + legal.shape_string() +
                                " does not match agent count and action table");
  }
  Pass pass;
  pass.embeddings = encoder_.forward(features, adjacency, pass.encoder);
  pass.agent_rows.assign(agent_rows.begin(), agent_rows.end());
  pass.agent_embeddings = gather_rows(pass.embeddings, agent_rows);
  pass.pooled = pool_with_agents(pass.embeddings, agent_rows);
  pass.legal = legal;
  pass.logits = dense_forward(pass.agent_embeddings, policy_);
  pass.probs = masked_softmax(pass.logits, legal);
  const Tensor2 vr = value_reward_.forward(pass.pooled, pass.value_reward);
  const Tensor2 vc = value_cost_.forward(pass.pooled, pass.value_cost);
  pass.v_reward = vr.data();
  pass.v_cost = vc.data();
  pass.valid = true;
  return pass;
}

void ActorCritic::backward(const Pass& pass, const Tensor2& d_logits,
                           std::span<const double> d_v_reward, std::span<const double> d_v_cost) {
  if (!pass.valid) throw std::logic_error("backward called without a recorded forward pass");
  const std::size_t agents = pass.agent_rows.size();
  if (d_logits.rows() != agents || d_v_reward.size() != agents || d_v_cost.size() != agents) {
    throw std::invalid_argument("backward: gradient shapes do not match the forward pass");
  }
  Tensor2 d_embeddings(pass.embeddings.rows(), pass.embeddings.cols());
  const Tensor2 d_agent = dense_backward(pass.agent_embeddings, d_logits, policy_);
  for (std::size_t k = 0; k < agents; ++k) {
    auto dst = d_embeddings.row(static_cast<std::size_t>(pass.agent_rows[k]));
    const auto src = d_agent.row(k);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
  Tensor2 d_pooled = value_reward_.backward(pass.value_reward, column(d_v_reward));
  const Tensor2 d_pooled_cost = value_cost_.backward(pass.value_cost, column(d_v_cost));
  for (std::size_t i = 0; i < d_pooled.size(); ++i) d_pooled.data()[i] += d_pooled_cost.data()[i];
  pool_with_agents_backward(d_pooled, pass.agent_rows, d_embeddings);
  encoder_.backward(pass.encoder, d_embeddings);
}

std::vector<LayerParams*> ActorCritic::layers() {
  std::vector<LayerParams*> out = encoder_.layers();
  out.push_back(&policy_);
  append(out, value_reward_.layers());
  append(out, value_cost_.layers());
  return out;
}

std::vector<const LayerParams*> ActorCritic::layers() const {
  std::vector<const LayerParams*> out = encoder_.layers();
  out.push_back(&policy_);
  append(out, value_reward_.layers());
  append(out, value_cost_.layers());
  return out;
}

void ActorCritic::zero_grad() {
  for (LayerParams* p : layers()) p->zero_grad();
}

std::vector<bool> ActorCritic::activation_pattern(const Pass& pass) const {
  std::vector<bool> bits = encoder_.activation_pattern(pass.encoder);
  for (const auto* t : {&pass.value_reward.pre, &pass.value_cost.pre}) {
    for (double v : t->data()) bits.push_back(v > 0.0);
  }
  return bits;
}

// ---------------------------------------------------------------------------

Tensor2 dueling_combine(const Tensor2& value, const Tensor2& advantage) {
  if (value.rows() != advantage.rows() || value.cols() != 1) {
    throw std::invalid_argument("dueling_combine: value must be agents x 1");
  }
  Tensor2 q(advantage.rows(), advantage.cols());
  for (std::size_t r = 0; r < q.rows(); ++r) {
    double mean = 0.0;
    for (double a : advantage.row(r)) mean += a;
    mean /= static_cast<double>(advantage.cols());
    for (std::size_t c = 0; c < q.cols(); ++c) q(r, c) = value(r, 0) + advantage(r, c) - mean;
  }
  return q;
}

DuelingQNetwork::DuelingQNetwork(const ModelShape& shape, std::uint64_t seed)
    : shape_(shape),
      encoder_([&]() -> Encoder {
        std::mt19937_64 rng(seed);
        return Encoder(shape, rng);
      }()) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto h = static_cast<std::size_t>(shape.hidden);
  value_ = MlpHead("q_value", 2 * h, h, 1, rng);
  advantage_ = MlpHead("q_advantage", 2 * h, h, static_cast<std::size_t>(shape.actions), rng);
}

DuelingQNetwork::Pass DuelingQNetwork::forward(const Tensor2& features, const Tensor2& adjacency,
                                               std::span<const int> agent_rows) const {
  Pass pass;
  pass.embeddings = encoder_.forward(features, adjacency, pass.encoder);
  pass.agent_rows.assign(agent_rows.begin(), agent_rows.end());
  pass.pooled = pool_with_agents(pass.embeddings, agent_rows);
  const Tensor2 v = value_.forward(pass.pooled, pass.value);
  const Tensor2 a = advantage_.forward(pass.pooled, pass.advantage);
  pass.q = dueling_combine(v, a);
  pass.valid = true;
  return pass;
}

void DuelingQNetwork::backward(const Pass& pass, const Tensor2& d_q) {
  if (!pass.valid) throw std::logic_error("backward called without a recorded forward pass");
  if (d_q.rows() != pass.q.rows() || d_q.cols() != pass.q.cols()) {
    throw std::invalid_argument("backward: d_q shape does not match the forward pass");
  }
  Tensor2 d_v(d_q.rows(), 1);
  Tensor2 d_a(d_q.rows(), d_q.cols());
  for (std::size_t r = 0; r < d_q.rows(); ++r) {
    double total = 0.0;
    for (double g : d_q.row(r)) total += g;
    d_v(r, 0) = total;
    const double mean = total / static_cast<double>(d_q.cols());
    for (std::size_t c = 0; c < d_q.cols(); ++c) d_a(r, c) = d_q(r, c) - mean;
  }
  Tensor2 d_pooled = value_.backward(pass.value, d_v);
  const Tensor2 d_pooled_adv = advantage_.backward(pass.advantage, d_a);
  for (std::size_t i = 0; i < d_pooled.size(); ++i) d_pooled.data()[i] += d_pooled_adv.data()[i];
  Tensor2 d_embeddings(pass.embeddings.rows(), pass.embeddings.cols());
  pool_with_agents_backward(d_pooled, pass.agent_rows, d_embeddings);
  encoder_.backward(pass.encoder, d_embeddings);
}

std::vector<LayerParams*> DuelingQNetwork::layers() {
  std::vector<LayerParams*> out = encoder_.layers();
  append(out, value_.layers());
  append(out, advantage_.layers());
  return out;
}

std::vector<const LayerParams*> DuelingQNetwork::layers() const {
  std::vector<const LayerParams*> out = encoder_.layers();
  append(out, value_.layers());
  append(out, advantage_.layers());
  return out;
}

void DuelingQNetwork::zero_grad() {
  for (LayerParams* p : layers()) p->zero_grad();
}

// ---------------------------------------------------------------------------

void adam_step(std::span<LayerParams* const> layers, const AdamConfig& cfg, long t) {
  if (t < 1) throw std::invalid_argument("adam_step: t counts from 1");
  for (const LayerParams* p : layers) {
    if (!p->grad_weight.all_finite()) {
      throw NonFiniteError("non-finite gradient in layer " + p->name);
    }
    for (double g : p->grad_bias) {
      if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in layer " + p->name);
    }
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const auto update = [&](double& w, double g, double& m, double& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    w -= cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
  };
  for (LayerParams* p : layers) {
    for (std::size_t i = 0; i < p->weight.size(); ++i) {
      update(p->weight.data()[i], p->grad_weight.data()[i], p->m_weight.data()[i],
             p->v_weight.data()[i]);
    }
    for (std::size_t i = 0; i < p->bias.size(); ++i) {
      update(p->bias[i], p->grad_bias[i], p->m_bias[i], p->v_bias[i]);
    }
  }
}

double gradient_norm(std::span<LayerParams* const> layers) {
  double total = 0.0;
  for (const LayerParams* p : layers) {
    for (double g : p->grad_weight.data()) total += g * g;
    for (double g : p->grad_bias) total += g * g;
  }
  return std::sqrt(total);
}

double clip_gradient_norm(std::span<LayerParams* const> layers, double max_norm) {
  const double norm = gradient_norm(layers);
  if (!std::isfinite(norm)) throw NonFiniteError("non-finite gradient norm");
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (LayerParams* p : layers) {
      for (double& g : p->grad_weight.data()) g *= scale;
      for (double& g : p->grad_bias) g *= scale;
    }
  }
  return norm;
}

void copy_weights(std::span<const LayerParams* const> src, std::span<LayerParams* const> dst) {
  if (src.size() != dst.size()) throw std::invalid_argument("copy_weights: layer count differs");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i]->weight.rows() != dst[i]->weight.rows() ||
        src[i]->weight.cols() != dst[i]->weight.cols()) {
      throw std::invalid_argument("copy_weights: shape mismatch in layer " + src[i]->name);
    }
    dst[i]->weight = src[i]->weight;
    dst[i]->bias = src[i]->bias;
  }
}

}  // namespace rtmarl::nn
