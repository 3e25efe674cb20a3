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

#include "framecls/lstm.hpp"

#include <cmath>
#include <stdexcept>

namespace framecls {
namespace {

Matrix sigmoid_of(const Matrix& z) { return sigmoid(z); }

}  // namespace

LstmCellParams::LstmCellParams(const std::string& name, Index input_size, Index hidden_size, Rng& rng) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  input_weights = Parameter(name + ".input_weights", uniform_matrix(input_size, 4 * hidden_size, scale, rng));
  recurrent_weights =
      Parameter(name + ".recurrent_weights", uniform_matrix(hidden_size, 4 * hidden_size, scale, rng));
  Matrix b = Matrix::Zero(1, 4 * hidden_size);
  b.middleCols(hidden_size, hidden_size).setOnes();
  bias = Parameter(name + ".bias", b);
}

CellState cell_step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev, const LstmCellParams& params,
                    CellCache* cache) {
  const Index hid = params.hidden_size();
  if (x.cols() != params.input_size() || h_prev.cols() != hid || c_prev.cols() != hid || h_prev.rows() != x.rows() ||
      c_prev.rows() != x.rows())
    throw std::invalid_argument("cell_step: shape mismatch");

  Matrix pre = x * params.input_weights.value + h_prev * params.recurrent_weights.value;
  pre.rowwise() += params.bias.value.row(0);

  Matrix i = sigmoid_of(pre.middleCols(0, hid));
  Matrix f = sigmoid_of(pre.middleCols(hid, hid));
  Matrix g = pre.middleCols(2 * hid, hid).array().tanh().matrix();
  Matrix o = sigmoid_of(pre.middleCols(3 * hid, hid));

  CellState state;
  state.c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  Matrix tanh_c = state.c.array().tanh().matrix();
  state.h = o.cwiseProduct(tanh_c);
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->g = std::move(g);
    cache->o = std::move(o);
    cache->tanh_c = std::move(tanh_c);
  }
  return state;
}

CellGrads cell_step_backward(const CellCache& cache, const Matrix& dh, const Matrix& dc, LstmCellParams& params) {
  const Index hid = params.hidden_size();
  const Index batch = dh.rows();
  Matrix dc_total = dc.array() + dh.array() * cache.o.array() * (1.0 - cache.tanh_c.array().square());

  Matrix dgates(batch, 4 * hid);
  dgates.middleCols(0, hid) = (dc_total.array() * cache.g.array() * cache.i.array() * (1.0 - cache.i.array())).matrix();
  dgates.middleCols(hid, hid) =
      (dc_total.array() * cache.c_prev.array() * cache.f.array() * (1.0 - cache.f.array())).matrix();
  dgates.middleCols(2 * hid, hid) = (dc_total.array() * cache.i.array() * (1.0 - cache.g.array().square())).matrix();
  dgates.middleCols(3 * hid, hid) =
      (dh.array() * cache.tanh_c.array() * cache.o.array() * (1.0 - cache.o.array())).matrix();

  params.input_weights.grad.noalias() += cache.x.transpose() * dgates;
  params.recurrent_weights.grad.noalias() += cache.h_prev.transpose() * dgates;
  params.bias.grad.row(0) += dgates.colwise().sum();

  CellGrads grads;
  grads.dx = dgates * params.input_weights.value.transpose();
  grads.dh_prev = dgates * params.recurrent_weights.value.transpose();
  grads.dc_prev = dc_total.cwiseProduct(cache.f);
  return grads;
}

// ---- layer -----------------------------------------------------------------

LstmLayer::LstmLayer(const std::string& name, Index input_size, Index hidden_size, bool residual, double dropout_p,
                     Rng& rng)
    : params(name, input_size, hidden_size, rng), residual_(residual), dropout_p_(dropout_p) {
  if (residual && input_size != hidden_size)
    throw std::invalid_argument(name + ": residual connection needs input width == hidden width (got " +
                                std::to_string(input_size) + " vs " + std::to_string(hidden_size) + ")");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw std::invalid_argument(name + ": dropout must be in [0, 1)");
}

Sequence LstmLayer::forward(const Sequence& x, Mode mode, Rng& rng) {
  const Index hid = params.hidden_size();
  if (x.features() != params.input_size()) throw std::invalid_argument("LstmLayer: input width mismatch");
  batch_ = x.batch;
  steps_ = x.steps;
  input_ = x.data;

  // Input projections for every step in one product.
  Matrix pre_all = x.data * params.input_weights.value;
  pre_all.rowwise() += params.bias.value.row(0);

  gates_.resize(batch_ * steps_, 4 * hid);
  cell_.resize(batch_ * steps_, hid);
  tanh_cell_.resize(batch_ * steps_, hid);
  hidden_.resize(batch_ * steps_, hid);

  Matrix h = Matrix::Zero(batch_, hid);
  Matrix c = Matrix::Zero(batch_, hid);
  for (Index t = 0; t < steps_; ++t) {
    Matrix pre = pre_all.middleRows(t * batch_, batch_);
    pre.noalias() += h * params.recurrent_weights.value;
    auto gates = gates_.middleRows(t * batch_, batch_);
    gates.middleCols(0, hid) = sigmoid(pre.middleCols(0, hid));
    gates.middleCols(hid, hid) = sigmoid(pre.middleCols(hid, hid));
    gates.middleCols(2 * hid, hid) = pre.middleCols(2 * hid, hid).array().tanh().matrix();
    gates.middleCols(3 * hid, hid) = sigmoid(pre.middleCols(3 * hid, hid));

    c = gates.middleCols(hid, hid).cwiseProduct(c) + gates.middleCols(0, hid).cwiseProduct(gates.middleCols(2 * hid, hid));
    Matrix tc = c.array().tanh().matrix();
    h = gates.middleCols(3 * hid, hid).cwiseProduct(tc);
    cell_.middleRows(t * batch_, batch_) = c;
    tanh_cell_.middleRows(t * batch_, batch_) = tc;
    hidden_.middleRows(t * batch_, batch_) = h;
  }

  Sequence out;
  out.batch = batch_;
  out.steps = steps_;
  out.data = dropout_forward(hidden_, dropout_p_, mode, rng, dropout_mask_);
  if (residual_) out.data += x.data;
  return out;
}

Sequence LstmLayer::backward(const Sequence& upstream) {
  const Index hid = params.hidden_size();
  Matrix dh_all = dropout_backward(upstream.data, dropout_mask_);
  Matrix dgates_all(batch_ * steps_, 4 * hid);

  Matrix dh_next = Matrix::Zero(batch_, hid);
  Matrix dc_next = Matrix::Zero(batch_, hid);
  const Matrix& wh = params.recurrent_weights.value;
  for (Index t = steps_ - 1; t >= 0; --t) {
    const Index r0 = t * batch_;
    auto gates = gates_.middleRows(r0, batch_);
    auto i = gates.middleCols(0, hid).array();
    auto f = gates.middleCols(hid, hid).array();
    auto g = gates.middleCols(2 * hid, hid).array();
    auto o = gates.middleCols(3 * hid, hid).array();
    auto tc = tanh_cell_.middleRows(r0, batch_).array();

    Matrix dh = dh_all.middleRows(r0, batch_) + dh_next;
    Matrix c_prev = t > 0 ? Matrix(cell_.middleRows(r0 - batch_, batch_)) : Matrix::Zero(batch_, hid);
    Matrix dc = (dc_next.array() + dh.array() * o * (1.0 - tc.square())).matrix();

    auto dgates = dgates_all.middleRows(r0, batch_);
    dgates.middleCols(0, hid) = (dc.array() * g * i * (1.0 - i)).matrix();
    dgates.middleCols(hid, hid) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
    dgates.middleCols(2 * hid, hid) = (dc.array() * i * (1.0 - g.square())).matrix();
    dgates.middleCols(3 * hid, hid) = (dh.array() * tc * o * (1.0 - o)).matrix();

    if (t > 0) params.recurrent_weights.grad.noalias() += hidden_.middleRows(r0 - batch_, batch_).transpose() * dgates;
    dh_next.noalias() = dgates * wh.transpose();
    dc_next = (dc.array() * f).matrix();
  }

  params.input_weights.grad.noalias() += input_.transpose() * dgates_all;
  params.bias.grad.row(0) += dgates_all.colwise().sum();

  Sequence dx;
  dx.batch = batch_;
  dx.steps = steps_;
  dx.data = dgates_all * params.input_weights.value.transpose();
  if (residual_) dx.data += upstream.data;
  return dx;
}

// ---- stack -----------------------------------------------------------------

LstmStack::LstmStack(const std::string& name, Index input_size, const LstmStackConfig& config, Rng& rng)
    : config_(config) {
  if (config.num_layers < 1) throw std::invalid_argument("LstmStack: need at least one layer");
  if (config.hidden_size < 1) throw std::invalid_argument("LstmStack: hidden_size must be positive");
  Index in = input_size;
  for (int l = 0; l < config.num_layers; ++l) {
    const bool residual = config.residual && l > 0;
    layers_.emplace_back(name + std::to_string(l + 1), in, config.hidden_size, residual, config.dropout_p,
                         rng);
    in = config.hidden_size;
  }
}

Sequence LstmStack::forward(const Sequence& x, Mode mode, Rng& rng) {
  Sequence h = layers_.front().forward(x, mode, rng);
  for (std::size_t l = 1; l < layers_.size(); ++l) h = layers_[l].forward(h, mode, rng);
  return h;
}

Sequence LstmStack::backward(const Sequence& upstream) {
  Sequence d = upstream;
  for (std::size_t l = layers_.size(); l-- > 0;) d = layers_[l].backward(d);
  return d;
}

void LstmStack::collect(ParameterList& out) {
  for (auto& layer : layers_) layer.collect(out);
}

// ---- time-weighted aggregation ---------------------------------------------

Matrix weighted_output_sum(const Sequence& outputs, const std::vector<Index>& valid_len) {
  if (static_cast<Index>(valid_len.size()) != outputs.batch)
    throw std::invalid_argument("weighted_output_sum: valid_len size mismatch");
  Matrix y = Matrix::Zero(outputs.batch, outputs.features());
  for (Index b = 0; b < outputs.batch; ++b) {
    const Index len = valid_len[b];
    if (len < 1 || len > outputs.steps) throw std::invalid_argument("weighted_output_sum: valid_len out of range");
    for (Index t = 0; t < len; ++t) y.row(b) += time_weight(t, len) * outputs.at(b, t);
  }
  return y;
}

Sequence weighted_output_sum_backward(const Matrix& upstream, const std::vector<Index>& valid_len, Index steps) {
  Sequence d(upstream.rows(), steps, upstream.cols());
  for (Index b = 0; b < upstream.rows(); ++b) {
    const Index len = valid_len[b];
    for (Index t = 0; t < len; ++t) d.at(b, t) = time_weight(t, len) * upstream.row(b);
  }
  return d;
}

}  // namespace framecls
