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

#include <string>
#include <vector>

#include "framecls/nn.hpp"
#include "framecls/types.hpp"

namespace framecls {

/// Gate blocks are laid out [input i | forget f | candidate g | output o], each hidden wide.
struct LstmCellParams {
  Parameter input_weights;      // [in, 4 * hidden]
  Parameter recurrent_weights;  // [hidden, 4 * hidden]
  Parameter bias;               // [1, 4 * hidden]

  LstmCellParams() = default;
  /// Weights uniform in [-1/sqrt(hidden), 1/sqrt(hidden)]; forget bias 1, other biases 0.
  LstmCellParams(const std::string& name, Index input_size, Index hidden_size, Rng& rng);

  Index input_size() const { return input_weights.value.rows(); }
  Index hidden_size() const { return recurrent_weights.value.rows(); }

  void collect(ParameterList& out) {
    out.push_back(&input_weights);
    out.push_back(&recurrent_weights);
    out.push_back(&bias);
  }
};

struct CellCache {
  Matrix x, h_prev, c_prev;
  Matrix i, f, g, o;
  Matrix tanh_c;
};

struct CellState {
  Matrix h;
  Matrix c;
};

struct CellGrads {
  Matrix dx;
  Matrix dh_prev;
  Matrix dc_prev;
};

/// One step of a standard LSTM cell on a [batch, in] input.
CellState cell_step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev, const LstmCellParams& params,
                    CellCache* cache = nullptr);

/// Backward of cell_step given dL/dh_t and dL/dc_t; accumulates parameter gradients.
CellGrads cell_step_backward(const CellCache& cache, const Matrix& dh, const Matrix& dc, LstmCellParams& params);

/// One unrolled LSTM layer. Output per step is dropout(h_t), plus the layer input when
/// residual. State starts at zero and runs through every step, padded ones included;
/// the caller masks padded steps downstream.
class LstmLayer {
 public:
  LstmLayer() = default;
  LstmLayer(const std::string& name, Index input_size, Index hidden_size, bool residual, double dropout_p, Rng& rng);

  Sequence forward(const Sequence& x, Mode mode, Rng& rng);
  /// Returns dL/dx for the last forward call.
  Sequence backward(const Sequence& upstream);

  void collect(ParameterList& out) { params.collect(out); }
  bool residual() const { return residual_; }
  double dropout_p() const { return dropout_p_; }

  LstmCellParams params;

 private:
  bool residual_ = false;
  double dropout_p_ = 0.0;

  // Unroll tape, all rows time-major [steps * batch, ...].
  Index batch_ = 0;
  Index steps_ = 0;
  Matrix input_;
  Matrix gates_;  // activated i, f, g, o
  Matrix cell_;
  Matrix tanh_cell_;
  Matrix hidden_;
  Matrix dropout_mask_;
};

struct LstmStackConfig {
  int num_layers = 2;
  int hidden_size = 1024;
  bool residual = false;
  double dropout_p = 0.4;
};

/// N stacked layers; layer l consumes layer l-1's output. Residual connections apply to
/// layers 2..N only, where input and output widths agree.
class LstmStack {
 public:
  LstmStack() = default;
  LstmStack(const std::string& name, Index input_size, const LstmStackConfig& config, Rng& rng);

  Sequence forward(const Sequence& x, Mode mode, Rng& rng);
  Sequence backward(const Sequence& upstream);
  void collect(ParameterList& out);

  const LstmStackConfig& config() const { return config_; }
  std::vector<LstmLayer>& layers() { return layers_; }

 private:
  LstmStackConfig config_;
  std::vector<LstmLayer> layers_;
};

/// Linear time weighting of per-step outputs: sum over t < len_b of ((t + 1) / len_b) * out_t.
/// The last real frame of every sample gets weight exactly 1; padded steps get 0.
Matrix weighted_output_sum(const Sequence& outputs, const std::vector<Index>& valid_len);
Sequence weighted_output_sum_backward(const Matrix& upstream, const std::vector<Index>& valid_len, Index steps);

/// Weight for 0-based step t of a sample with len real steps.
inline double time_weight(Index t, Index len) { return static_cast<double>(t + 1) / static_cast<double>(len); }

}  // namespace framecls
