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

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "framecls/types.hpp"

namespace framecls {

/// A named value paired with a gradient of identical shape. Gradients accumulate (+=)
/// and are reset explicitly once per training step.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string param_name, Matrix initial)
      : name(std::move(param_name)), value(std::move(initial)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using ParameterList = std::vector<Parameter*>;

/// Uniform in [-scale, scale].
Matrix uniform_matrix(Index rows, Index cols, double scale, Rng& rng);

// ---- fully connected ------------------------------------------------------

/// y = x W + b with W [in, out] and b [1, out].
Matrix fc_forward(const Matrix& x, const Parameter& weight, const Parameter& bias);
/// Accumulates weight/bias gradients and returns dL/dx.
Matrix fc_backward(const Matrix& x, const Matrix& upstream, Parameter& weight, Parameter& bias);

struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  /// Without a bias the layer is x·W; use it when a batch norm follows.
  Linear(const std::string& name, Index in, Index out, Rng& rng, bool with_bias = true);

  bool has_bias() const { return has_bias_; }
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& upstream);
  void collect(ParameterList& out) {
    out.push_back(&weight);
    if (has_bias_) out.push_back(&bias);
  }

 private:
  bool has_bias_ = true;
  Matrix input_;
};

Matrix relu(const Matrix& x);
Matrix relu_backward(const Matrix& pre_activation, const Matrix& upstream);

// ---- batch normalization --------------------------------------------------

/// Per-feature normalization over rows. Rows with mask 0 (padding) are excluded from
/// the statistics, output zero, and receive zero gradient.
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(const std::string& name, Index features, double momentum = 0.9, double epsilon = 1e-8);

  Matrix forward(const Matrix& x, Mode mode, const std::vector<char>* row_mask = nullptr);
  Matrix backward(const Matrix& upstream);

  void collect(ParameterList& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }

  Parameter gamma;
  Parameter beta;
  // Non-trainable buffers; stored as Parameters so checkpoints treat them uniformly.
  Parameter running_mean;
  Parameter running_var;
  double momentum = 0.9;
  double epsilon = 1e-8;

 private:
  Mode mode_ = Mode::kInfer;
  Matrix xhat_;
  RowVector inv_std_;
  std::vector<char> mask_;
  Index count_ = 0;
};

// ---- dropout -------------------------------------------------------------

/// Inverted dropout. In train mode each element is zeroed with probability p and
/// survivors are scaled by 1 / (1 - p); infer mode is the identity. `mask` receives the
/// per-element multiplier (empty when no mask is applied).
Matrix dropout_forward(const Matrix& x, double p, Mode mode, Rng& rng, Matrix& mask);
Matrix dropout_backward(const Matrix& upstream, const Matrix& mask);

// ---- time max pooling -----------------------------------------------------

struct MaxPoolResult {
  Matrix output;                                                       // [batch, features]
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> argmax;  // winning step
  Index steps = 0;
};

MaxPoolResult max_pool_time(const Sequence& x, const std::vector<Index>& valid_len);
Sequence max_pool_time_backward(const Matrix& upstream, const MaxPoolResult& pooled);

// ---- losses ----------------------------------------------------------------

/// Per-class multiplier c_j >= 1 on the positive-label term.
struct PenaltyWeights {
  RowVector weights;
};

struct LossResult {
  double loss = 0.0;  // mean over batch * classes
  long double loss_extended = 0.0L;  // same value before rounding to double
  Matrix grad;                       // d loss / d logits
};

LossResult sigmoid_cross_entropy(const Matrix& logits, const Matrix& labels,
                                 const PenaltyWeights* penalty = nullptr);

/// c_j = min(max(counts) / max(counts_j, 1), cap); never-seen classes get cap.
PenaltyWeights penalty_from_counts(std::span<const std::int64_t> counts, double cap);

// ---- optimizer -------------------------------------------------------------

struct RmsPropConfig {
  double decay_rate = 0.9;
  double epsilon = 1e-8;
  double base_lr = 1e-4;
  std::uint64_t lr_decay_every_samples = 20'000'000;  // 0 disables decay
  double lr_decay_factor = 0.1;
};

struct OptimizerState {
  RmsPropConfig config;
  std::vector<Matrix> accumulators;  // mean-square of gradients, one per parameter

  double learning_rate(std::uint64_t samples_seen) const;
};

void validate(const RmsPropConfig& config);

/// acc = d * acc + (1 - d) * g^2;  p -= lr(samples_seen) * g / (sqrt(acc) + eps)
void rmsprop_step(const ParameterList& params, OptimizerState& state, std::uint64_t samples_seen);

// ---- gradient checking -----------------------------------------------------

class NonDeterministicLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-5;
  Index max_coords_per_param = 0;  // 0 checks every coordinate
  std::uint64_t sample_seed = 0;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  Index coords_checked = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;

  bool passed() const;
  double max_rel_error() const;
  std::string summary() const;
};

/// `loss_fn` evaluates the loss at the current parameter values and accumulates analytic
/// gradients into `grad`. The checker zeroes gradients before each call and compares
/// them against central differences (L(p+h) - L(p-h)) / 2h with relative error
/// |a - n| / max(|a|, |n|, 1e-8). Two evaluations at the same point must agree exactly.
GradCheckReport grad_check(const std::function<long double()>& loss_fn, const ParameterList& params,
                           const GradCheckOptions& options = {});

}  // namespace framecls
