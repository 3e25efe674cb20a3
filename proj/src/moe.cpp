// Copyright 2026 The framecls Authors.
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

#include "framecls/moe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace framecls {
namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_pdf(double z) {
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

std::vector<char> resolve_mask(Index rows, const std::vector<char>* row_mask) {
  if (!row_mask) return std::vector<char>(static_cast<std::size_t>(rows), 1);
  if (static_cast<Index>(row_mask->size()) != rows) throw std::invalid_argument("moe: row mask size mismatch");
  return *row_mask;
}

// Calls fn(s, e, z, effective_std, threshold_expert) for every active (s, e) pair.
template <typename Fn>
void for_each_selection(const GateOutput& gate, int k, double noise_floor, Fn&& fn) {
  const Index n = gate.clean_logits.cols();
  std::vector<int> position(static_cast<std::size_t>(n));
  for (Index s = 0; s < gate.rows(); ++s) {
    if (!gate.active[s]) continue;
    std::vector<int> order = rank_experts(gate.noisy_logits.row(s));
    for (Index r = 0; r < n; ++r) position[order[r]] = static_cast<int>(r);
    for (Index e = 0; e < n; ++e) {
      const int threshold_expert = position[e] < k ? order[k] : order[k - 1];
      const double std_eff = std::max(gate.noise_std(s, e), noise_floor);
      const double z = (gate.clean_logits(s, e) - gate.noisy_logits(s, threshold_expert)) / std_eff;
      fn(s, e, z, std_eff, threshold_expert);
    }
  }
}

}  // namespace

void validate(const MoEConfig& config) {
  if (config.num_experts < 1) throw std::invalid_argument("MoE needs at least one expert");
  if (config.k < 1 || config.k > config.num_experts) throw std::invalid_argument("MoE requires 1 <= k <= n");
  if (config.input_size < 1 || config.expert_hidden < 1 || config.output_size < 1)
    throw std::invalid_argument("MoE dimensions must be positive");
  if (config.w_importance < 0.0 || config.w_load < 0.0) throw std::invalid_argument("MoE loss weights must be >= 0");
  if (!(config.noise_floor > 0.0)) throw std::invalid_argument("MoE noise floor must be positive");
}

std::vector<int> rank_experts(const Eigen::Ref<const RowVector>& logits) {
  std::vector<int> order(static_cast<std::size_t>(logits.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return logits(a) > logits(b); });
  return order;
}

GateOutput gate_topk(const Matrix& x, const GateParams& params, int k, Mode mode, Rng& rng,
                     const std::vector<char>* row_mask) {
  const Index n = params.gate_weights.value.cols();
  if (x.cols() != params.gate_weights.value.rows()) throw std::invalid_argument("gate_topk: input width mismatch");
  if (k < 1 || k > n) throw std::invalid_argument("gate_topk: k must be in [1, n]");

  GateOutput out;
  out.mode = mode;
  out.active = resolve_mask(x.rows(), row_mask);
  out.clean_logits = x * params.gate_weights.value;
  if (mode == Mode::kTrain) {
    out.noise_pre = x * params.noise_weights.value;
    out.noise_std = softplus(out.noise_pre);
    out.noise = Matrix::Zero(x.rows(), n);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index s = 0; s < x.rows(); ++s)
      if (out.active[s])
        for (Index e = 0; e < n; ++e) out.noise(s, e) = normal(rng);
    out.noisy_logits = out.clean_logits + out.noise.cwiseProduct(out.noise_std);
  } else {
    out.noisy_logits = out.clean_logits;
  }

  out.gates = Matrix::Zero(x.rows(), n);
  out.selected.assign(static_cast<std::size_t>(x.rows()), {});
  for (Index s = 0; s < x.rows(); ++s) {
    if (!out.active[s]) continue;
    std::vector<int> order = rank_experts(out.noisy_logits.row(s));
    order.resize(static_cast<std::size_t>(k));
    // Softmax over the survivors; order[0] holds the maximum.
    const double top = out.noisy_logits(s, order[0]);
    double total = 0.0;
    for (int e : order) total += std::exp(out.noisy_logits(s, e) - top);
    for (int e : order) out.gates(s, e) = std::exp(out.noisy_logits(s, e) - top) / total;
    out.selected[s] = std::move(order);
  }
  return out;
}

Matrix gate_backward(const Matrix& x, const GateOutput& gate, const Matrix& d_gates, const Matrix& d_clean,
                     const Matrix& d_std, GateParams& params) {
  const Index n = gate.gates.cols();
  Matrix d_noisy = Matrix::Zero(gate.rows(), n);
  for (Index s = 0; s < gate.rows(); ++s) {
    if (!gate.active[s]) continue;
    double dot = 0.0;
    for (int e : gate.selected[s]) dot += gate.gates(s, e) * d_gates(s, e);
    for (int e : gate.selected[s]) d_noisy(s, e) = gate.gates(s, e) * (d_gates(s, e) - dot);
  }

  Matrix d_clean_total = d_noisy;
  if (d_clean.size() > 0) d_clean_total += d_clean;
  params.gate_weights.grad.noalias() += x.transpose() * d_clean_total;
  Matrix dx = d_clean_total * params.gate_weights.value.transpose();

  if (gate.mode == Mode::kTrain) {
    Matrix d_std_total = gate.noise.cwiseProduct(d_noisy);
    if (d_std.size() > 0) d_std_total += d_std;
    Matrix d_noise_pre = d_std_total.cwiseProduct(Matrix(sigmoid(gate.noise_pre)));
    params.noise_weights.grad.noalias() += x.transpose() * d_noise_pre;
    dx.noalias() += d_noise_pre * params.noise_weights.value.transpose();
  }
  return dx;
}

double cv_squared(const Vector& values, Vector* grad) {
  const Index n = values.size();
  if (grad) grad->setZero(n);
  if (n == 0) return 0.0;
  const double mean = values.sum() / static_cast<double>(n);
  if (mean == 0.0) return 0.0;
  const Vector centered = values.array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(n);
  if (grad) {
    const double nn = static_cast<double>(n);
    *grad = (2.0 / nn) * centered.array() / (mean * mean) - 2.0 * var / (nn * mean * mean * mean);
  }
  return var / (mean * mean);
}

double importance_loss(const Matrix& gates, double weight, Matrix* d_gates, const std::vector<char>* row_mask) {
  std::vector<char> active = resolve_mask(gates.rows(), row_mask);
  Vector importance = Vector::Zero(gates.cols());
  for (Index s = 0; s < gates.rows(); ++s)
    if (active[s]) importance += gates.row(s).transpose();
  Vector grad;
  const double loss = weight * cv_squared(importance, &grad);
  if (d_gates) {
    d_gates->setZero(gates.rows(), gates.cols());
    for (Index s = 0; s < gates.rows(); ++s)
      if (active[s]) d_gates->row(s) = weight * grad.transpose();
  }
  return loss;
}

Matrix selection_probability(const GateOutput& gate, int k, double noise_floor) {
  if (gate.mode != Mode::kTrain) throw std::invalid_argument("selection_probability needs a train-mode gate");
  const Index n = gate.clean_logits.cols();
  Matrix p = Matrix::Zero(gate.rows(), n);
  if (k >= n) {
    for (Index s = 0; s < gate.rows(); ++s)
      if (gate.active[s]) p.row(s).setOnes();
    return p;
  }
  for_each_selection(gate, k, noise_floor, [&](Index s, Index e, double z, double, int) { p(s, e) = normal_cdf(z); });
  return p;
}

double load_loss(const GateOutput& gate, int k, double weight, double noise_floor, Matrix* d_clean, Matrix* d_std) {
  const Index n = gate.clean_logits.cols();
  if (d_clean) d_clean->setZero(gate.rows(), n);
  if (d_std) d_std->setZero(gate.rows(), n);
  if (k >= n) return 0.0;  // every expert is always selected

  const Matrix p = selection_probability(gate, k, noise_floor);
  const Vector load = p.colwise().sum().transpose();
  Vector grad;
  const double loss = weight * cv_squared(load, &grad);
  if (!d_clean && !d_std) return loss;

  Matrix dc = Matrix::Zero(gate.rows(), n);
  Matrix ds = Matrix::Zero(gate.rows(), n);
  for_each_selection(gate, k, noise_floor, [&](Index s, Index e, double z, double std_eff, int thr) {
    const double dz = weight * grad(e) * normal_pdf(z);  // dL/dz
    dc(s, e) += dz / std_eff;
    if (gate.noise_std(s, e) > noise_floor) ds(s, e) += -dz * z / std_eff;
    // Threshold is the noisy logit of expert `thr`: clean + noise * std.
    const double d_thr = -dz / std_eff;
    dc(s, thr) += d_thr;
    ds(s, thr) += d_thr * gate.noise(s, thr);
  });
  if (d_clean) *d_clean = std::move(dc);
  if (d_std) *d_std = std::move(ds);
  return loss;
}

Matrix expert_forward(const Matrix& x, const ExpertParams& expert, ExpertCache* cache) {
  Matrix pre = fc_forward(x, expert.w1, expert.b1);
  Matrix hidden = relu(pre);
  Matrix out = fc_forward(hidden, expert.w2, expert.b2);
  if (cache) {
    cache->input = x;
    cache->hidden_pre = std::move(pre);
    cache->hidden = std::move(hidden);
    cache->output = out;
  }
  return out;
}

// ---- layer -----------------------------------------------------------------

MoeLayer::MoeLayer(const std::string& name, const MoEConfig& config, Rng& rng) : config_(config) {
  validate(config);
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(config.input_size));
  const double hid_scale = 1.0 / std::sqrt(static_cast<double>(config.expert_hidden));
  gate_params.gate_weights =
      Parameter(name + ".gate_weights", uniform_matrix(config.input_size, config.num_experts, in_scale, rng));
  gate_params.noise_weights = Parameter(name + ".noise_weights", Matrix::Zero(config.input_size, config.num_experts));
  experts.resize(static_cast<std::size_t>(config.num_experts));
  for (int e = 0; e < config.num_experts; ++e) {
    const std::string prefix = name + ".expert" + std::to_string(e);
    ExpertParams& ex = experts[e];
    ex.w1 = Parameter(prefix + ".w1", uniform_matrix(config.input_size, config.expert_hidden, in_scale, rng));
    ex.b1 = Parameter(prefix + ".b1", Matrix::Zero(1, config.expert_hidden));
    ex.w2 = Parameter(prefix + ".w2", uniform_matrix(config.expert_hidden, config.output_size, hid_scale, rng));
    ex.b2 = Parameter(prefix + ".b2", Matrix::Zero(1, config.output_size));
  }
}

void MoeLayer::collect(ParameterList& out) {
  gate_params.collect(out);
  for (auto& e : experts) e.collect(out);
}

Matrix MoeLayer::forward(const Matrix& x, Mode mode, Rng& rng, const std::vector<char>* row_mask) {
  if (x.cols() != config_.input_size) throw std::invalid_argument("MoeLayer: input width mismatch");
  input_ = x;
  gate_ = gate_topk(x, gate_params, config_.k, mode, rng, row_mask);

  const Index n = config_.num_experts;
  caches_.assign(static_cast<std::size_t>(n), {});
  for (Index s = 0; s < x.rows(); ++s)
    for (int e : gate_.selected[s]) caches_[e].rows.push_back(s);

  Matrix y = Matrix::Zero(x.rows(), config_.output_size);
  evaluations_ = 0;
  for (Index e = 0; e < n; ++e) {
    ExpertCache& cache = caches_[e];
    if (cache.rows.empty()) continue;
    Matrix gathered(static_cast<Index>(cache.rows.size()), x.cols());
    for (std::size_t r = 0; r < cache.rows.size(); ++r) gathered.row(r) = x.row(cache.rows[r]);
    expert_forward(gathered, experts[e], &cache);
    evaluations_ += cache.rows.size();
    for (std::size_t r = 0; r < cache.rows.size(); ++r) {
      const Index s = cache.rows[r];
      y.row(s) += gate_.gates(s, e) * cache.output.row(r);
    }
  }

  if (mode == Mode::kTrain) {
    importance_ = importance_loss(gate_.gates, config_.w_importance, &d_gates_aux_, &gate_.active);
    load_ = load_loss(gate_, config_.k, config_.w_load, config_.noise_floor, &d_clean_aux_, &d_std_aux_);
  } else {
    importance_ = importance_loss(gate_.gates, config_.w_importance, nullptr, &gate_.active);
    load_ = 0.0;
    d_gates_aux_.resize(0, 0);
    d_clean_aux_.resize(0, 0);
    d_std_aux_.resize(0, 0);
  }
  return y;
}

Matrix MoeLayer::backward(const Matrix& upstream) {
  const Index n = config_.num_experts;
  Matrix d_gates = d_gates_aux_.size() > 0 ? d_gates_aux_ : Matrix::Zero(input_.rows(), n);
  Matrix dx = Matrix::Zero(input_.rows(), input_.cols());

  for (Index e = 0; e < n; ++e) {
    ExpertCache& cache = caches_[e];
    if (cache.rows.empty()) continue;
    ExpertParams& ex = experts[e];
    Matrix d_out(static_cast<Index>(cache.rows.size()), config_.output_size);
    for (std::size_t r = 0; r < cache.rows.size(); ++r) {
      const Index s = cache.rows[r];
      d_out.row(r) = gate_.gates(s, e) * upstream.row(s);
      d_gates(s, e) += upstream.row(s).dot(cache.output.row(r));
    }
    Matrix d_hidden = fc_backward(cache.hidden, d_out, ex.w2, ex.b2);
    Matrix d_pre = relu_backward(cache.hidden_pre, d_hidden);
    Matrix d_in = fc_backward(cache.input, d_pre, ex.w1, ex.b1);
    for (std::size_t r = 0; r < cache.rows.size(); ++r) dx.row(cache.rows[r]) += d_in.row(r);
  }

  dx += gate_backward(input_, gate_, d_gates, d_clean_aux_, d_std_aux_, gate_params);
  return dx;
}

Sequence MoeLayer::forward_over_time(const Sequence& x, const std::vector<Index>& valid_len, Mode mode, Rng& rng) {
  const std::vector<char> mask = valid_row_mask(x.batch, x.steps, valid_len);
  seq_batch_ = x.batch;
  seq_steps_ = x.steps;
  Sequence out;
  out.batch = x.batch;
  out.steps = x.steps;
  out.data = forward(x.data, mode, rng, &mask);
  return out;
}

Sequence MoeLayer::backward_over_time(const Sequence& upstream) {
  Sequence dx;
  dx.batch = seq_batch_;
  dx.steps = seq_steps_;
  dx.data = backward(upstream.data);
  return dx;
}

}  // namespace framecls
