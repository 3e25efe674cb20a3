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
#include <string>
#include <vector>

#include "framecls/nn.hpp"
#include "framecls/types.hpp"

namespace framecls {

struct MoEConfig {
  int num_experts = 64;
  int k = 4;  // experts active per sample
  int input_size = 512;
  int expert_hidden = 1024;
  int output_size = 512;
  double w_importance = 0.1;
  double w_load = 0.1;
  double noise_floor = 1e-8;  // lower bound on the noise scale inside the load estimator
};

void validate(const MoEConfig& config);

struct GateParams {
  Parameter gate_weights;   // [in, n]
  Parameter noise_weights;  // [in, n]

  void collect(ParameterList& out) {
    out.push_back(&gate_weights);
    out.push_back(&noise_weights);
  }
};

/// Two-layer feed-forward expert: relu(x W1 + b1) W2 + b2.
struct ExpertParams {
  Parameter w1, b1, w2, b2;

  void collect(ParameterList& out) {
    out.push_back(&w1);
    out.push_back(&b1);
    out.push_back(&w2);
    out.push_back(&b2);
  }
};

/// Result of noisy top-k gating over S rows.
struct GateOutput {
  Mode mode = Mode::kInfer;
  Matrix gates;         // [S, n], exactly k nonzeros per active row, rows sum to 1
  Matrix clean_logits;  // x W_g
  Matrix noisy_logits;  // clean + noise * noise_std in train mode, clean otherwise
  Matrix noise_pre;     // x W_noise (train only)
  Matrix noise_std;     // softplus(noise_pre) (train only)
  Matrix noise;         // standard normal draws (train only)
  std::vector<std::vector<int>> selected;  // per row, chosen experts in rank order
  std::vector<char> active;                // rows that take part (unmasked)

  Index rows() const { return gates.rows(); }
};

/// Ranking used for selection: higher logit first, lower expert index on ties.
std::vector<int> rank_experts(const Eigen::Ref<const RowVector>& logits);

GateOutput gate_topk(const Matrix& x, const GateParams& params, int k, Mode mode, Rng& rng,
                     const std::vector<char>* row_mask = nullptr);

/// Backpropagates into the gate parameters. `d_gates` is dL/dG (only selected entries
/// matter); `d_clean` and `d_std` carry the load-loss gradient (may be empty).
Matrix gate_backward(const Matrix& x, const GateOutput& gate, const Matrix& d_gates, const Matrix& d_clean,
                     const Matrix& d_std, GateParams& params);

/// Squared coefficient of variation (population std / mean)^2; 0 when the mean is 0.
/// Writes d CV^2 / d values when `grad` is non-null.
double cv_squared(const Vector& values, Vector* grad = nullptr);

/// w * CV(sum_s G[s, :])^2 with its gradient wrt G.
double importance_loss(const Matrix& gates, double weight, Matrix* d_gates = nullptr,
                       const std::vector<char>* row_mask = nullptr);

/// P(s, e) = Phi((clean[s,e] - threshold(s,e)) / noise_std[s,e]), where threshold is the
/// k-th largest noisy logit among the other experts of that row.
Matrix selection_probability(const GateOutput& gate, int k, double noise_floor);

/// w * CV(sum_s P[s, :])^2 with gradients wrt clean logits and noise scale.
double load_loss(const GateOutput& gate, int k, double weight, double noise_floor, Matrix* d_clean = nullptr,
                 Matrix* d_std = nullptr);

/// Per-expert evaluation of the rows dispatched to it.
struct ExpertCache {
  std::vector<Index> rows;
  Matrix input;
  Matrix hidden_pre;
  Matrix hidden;
  Matrix output;
};

Matrix expert_forward(const Matrix& x, const ExpertParams& expert, ExpertCache* cache = nullptr);

/// Sparsely-gated mixture of experts applied row-wise.
class MoeLayer {
 public:
  MoeLayer() = default;
  MoeLayer(const std::string& name, const MoEConfig& config, Rng& rng);

  /// y_s = sum over selected e of G[s, e] * Expert_e(x_s). Masked rows produce zeros and
  /// are left out of gating, dispatch and the auxiliary losses.
  Matrix forward(const Matrix& x, Mode mode, Rng& rng, const std::vector<char>* row_mask = nullptr);
  /// dL/dx including the auxiliary loss gradients (train mode).
  Matrix backward(const Matrix& upstream);

  /// Per-step application over a sequence; steps t >= valid_len are masked.
  Sequence forward_over_time(const Sequence& x, const std::vector<Index>& valid_len, Mode mode, Rng& rng);
  Sequence backward_over_time(const Sequence& upstream);

  void collect(ParameterList& out);

  const MoEConfig& config() const { return config_; }
  const GateOutput& last_gate() const { return gate_; }
  double importance_loss_value() const { return importance_; }
  double load_loss_value() const { return load_; }
  double aux_loss() const { return importance_ + load_; }
  /// Rows evaluated by experts during the last forward (S * k for S active rows).
  std::uint64_t expert_evaluations() const { return evaluations_; }

  GateParams gate_params;
  std::vector<ExpertParams> experts;

 private:
  MoEConfig config_;
  Matrix input_;
  GateOutput gate_;
  std::vector<ExpertCache> caches_;
  double importance_ = 0.0;
  double load_ = 0.0;
  Matrix d_gates_aux_;
  Matrix d_clean_aux_;
  Matrix d_std_aux_;
  std::uint64_t evaluations_ = 0;
  Index seq_batch_ = 0;
  Index seq_steps_ = 0;
};

}  // namespace framecls
