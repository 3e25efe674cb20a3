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

#include "framecls/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace framecls {

Matrix uniform_matrix(Index rows, Index cols, double scale, Rng& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix fc_forward(const Matrix& x, const Parameter& weight, const Parameter& bias) {
  if (x.cols() != weight.value.rows() || bias.value.rows() != 1 || bias.value.cols() != weight.value.cols())
    throw std::invalid_argument("fc_forward: shape mismatch for " + weight.name);
  Matrix y = x * weight.value;
  y.rowwise() += bias.value.row(0);
  return y;
}

Matrix fc_backward(const Matrix& x, const Matrix& upstream, Parameter& weight, Parameter& bias) {
  if (upstream.rows() != x.rows() || upstream.cols() != weight.value.cols())
    throw std::invalid_argument("fc_backward: shape mismatch for " + weight.name);
  weight.grad.noalias() += x.transpose() * upstream;
  bias.grad.row(0) += upstream.colwise().sum();
  return upstream * weight.value.transpose();
}

Linear::Linear(const std::string& name, Index in, Index out, Rng& rng, bool with_bias)
    : weight(name + ".weight", uniform_matrix(in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng)),
      bias(name + ".bias", Matrix::Zero(1, out)),
      has_bias_(with_bias) {}

Matrix Linear::forward(const Matrix& x) {
  input_ = x;
  if (has_bias_) return fc_forward(x, weight, bias);
  if (x.cols() != weight.value.rows()) throw std::invalid_argument("Linear: shape mismatch for " + weight.name);
  return x * weight.value;
}

Matrix Linear::backward(const Matrix& upstream) {
  if (has_bias_) return fc_backward(input_, upstream, weight, bias);
  weight.grad.noalias() += input_.transpose() * upstream;
  return upstream * weight.value.transpose();
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& pre_activation, const Matrix& upstream) {
  return (pre_activation.array() > 0.0).select(upstream, 0.0);
}

// ---- batch normalization --------------------------------------------------

BatchNorm::BatchNorm(const std::string& name, Index features, double momentum_, double epsilon_)
    : gamma(name + ".gamma", Matrix::Ones(1, features)),
      beta(name + ".beta", Matrix::Zero(1, features)),
      running_mean(name + ".running_mean", Matrix::Zero(1, features)),
      running_var(name + ".running_var", Matrix::Ones(1, features)),
      momentum(momentum_),
      epsilon(epsilon_) {}

Matrix BatchNorm::forward(const Matrix& x, Mode mode, const std::vector<char>* row_mask) {
  const Index n = x.rows();
  const Index f = x.cols();
  if (f != gamma.value.cols()) throw std::invalid_argument("batchnorm: feature mismatch for " + gamma.name);
  mode_ = mode;
  if (row_mask) {
    if (static_cast<Index>(row_mask->size()) != n) throw std::invalid_argument("batchnorm: mask size mismatch");
    mask_ = *row_mask;
  } else {
    mask_.assign(static_cast<std::size_t>(n), 1);
  }
  count_ = std::count(mask_.begin(), mask_.end(), 1);

  RowVector mean;
  RowVector var;
  if (mode == Mode::kTrain) {
    if (count_ < 2) throw std::invalid_argument("batchnorm: train mode needs at least 2 rows");
    mean = RowVector::Zero(f);
    for (Index r = 0; r < n; ++r)
      if (mask_[r]) mean += x.row(r);
    mean /= static_cast<double>(count_);
    var = RowVector::Zero(f);
    for (Index r = 0; r < n; ++r)
      if (mask_[r]) var.array() += (x.row(r) - mean).array().square();
    var /= static_cast<double>(count_);
    running_mean.value.row(0) = momentum * running_mean.value.row(0) + (1.0 - momentum) * mean;
    running_var.value.row(0) = momentum * running_var.value.row(0) + (1.0 - momentum) * var;
  } else {
    mean = running_mean.value.row(0);
    var = running_var.value.row(0);
  }

  inv_std_ = (var.array() + epsilon).rsqrt().matrix();
  xhat_ = Matrix::Zero(n, f);
  Matrix y = Matrix::Zero(n, f);
  for (Index r = 0; r < n; ++r) {
    if (!mask_[r]) continue;
    xhat_.row(r) = ((x.row(r) - mean).array() * inv_std_.array()).matrix();
    y.row(r) = (xhat_.row(r).array() * gamma.value.row(0).array() + beta.value.row(0).array()).matrix();
  }
  return y;
}

Matrix BatchNorm::backward(const Matrix& upstream) {
  const Index n = upstream.rows();
  const Index f = upstream.cols();
  RowVector dgamma = RowVector::Zero(f);
  RowVector dbeta = RowVector::Zero(f);
  for (Index r = 0; r < n; ++r) {
    if (!mask_[r]) continue;
    dgamma.array() += upstream.row(r).array() * xhat_.row(r).array();
    dbeta += upstream.row(r);
  }
  gamma.grad.row(0) += dgamma;
  beta.grad.row(0) += dbeta;

  Matrix dx = Matrix::Zero(n, f);
  const RowVector scale = (gamma.value.row(0).array() * inv_std_.array()).matrix();
  if (mode_ == Mode::kInfer) {
    for (Index r = 0; r < n; ++r)
      if (mask_[r]) dx.row(r) = (upstream.row(r).array() * scale.array()).matrix();
    return dx;
  }

  // dx = gamma * inv_std / N * (N dy - sum(dy) - xhat * sum(dy * xhat))
  const double count = static_cast<double>(count_);
  for (Index r = 0; r < n; ++r) {
    if (!mask_[r]) continue;
    dx.row(r) = (scale.array() / count *
                 (count * upstream.row(r).array() - dbeta.array() - xhat_.row(r).array() * dgamma.array()))
                    .matrix();
  }
  return dx;
}

// ---- dropout -------------------------------------------------------------

Matrix dropout_forward(const Matrix& x, double p, Mode mode, Rng& rng, Matrix& mask) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout probability must be in [0, 1)");
  if (mode == Mode::kInfer || p == 0.0) {
    mask.resize(0, 0);
    return x;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  mask.resize(x.rows(), x.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = unit(rng) < p ? 0.0 : keep_scale;
  return x.cwiseProduct(mask);
}

Matrix dropout_backward(const Matrix& upstream, const Matrix& mask) {
  if (mask.size() == 0) return upstream;
  return upstream.cwiseProduct(mask);
}

// ---- time max pooling -----------------------------------------------------

MaxPoolResult max_pool_time(const Sequence& x, const std::vector<Index>& valid_len) {
  const Index batch = x.batch;
  const Index f = x.features();
  if (static_cast<Index>(valid_len.size()) != batch) throw std::invalid_argument("max_pool_time: valid_len size");
  MaxPoolResult result;
  result.steps = x.steps;
  result.output.resize(batch, f);
  result.argmax.resize(batch, f);
  for (Index b = 0; b < batch; ++b) {
    const Index len = valid_len[b];
    if (len < 1 || len > x.steps) throw std::invalid_argument("max_pool_time: valid_len must be in [1, steps]");
    result.output.row(b) = x.at(b, 0);
    result.argmax.row(b).setZero();
    for (Index t = 1; t < len; ++t) {
      auto row = x.at(b, t);
      for (Index j = 0; j < f; ++j) {
        if (row(j) > result.output(b, j)) {
          result.output(b, j) = row(j);
          result.argmax(b, j) = t;
        }
      }
    }
  }
  return result;
}

Sequence max_pool_time_backward(const Matrix& upstream, const MaxPoolResult& pooled) {
  Sequence dx(upstream.rows(), pooled.steps, upstream.cols());
  for (Index b = 0; b < upstream.rows(); ++b)
    for (Index j = 0; j < upstream.cols(); ++j) dx.at(b, pooled.argmax(b, j))(j) += upstream(b, j);
  return dx;
}

// ---- losses ----------------------------------------------------------------

LossResult sigmoid_cross_entropy(const Matrix& logits, const Matrix& labels, const PenaltyWeights* penalty) {
  if (logits.rows() != labels.rows() || logits.cols() != labels.cols())
    throw std::invalid_argument("sigmoid_cross_entropy: logits/labels shape mismatch");
  if (penalty && penalty->weights.size() != logits.cols())
    throw std::invalid_argument("sigmoid_cross_entropy: penalty length mismatch");
  for (Index i = 0; i < labels.size(); ++i) {
    double y = labels.data()[i];
    if (y != 0.0 && y != 1.0) throw std::invalid_argument("sigmoid_cross_entropy: labels must be 0 or 1");
  }

  const double denom = static_cast<double>(logits.size());
  LossResult result;
  result.grad.resize(logits.rows(), logits.cols());
  long double total = 0.0L;
  for (Index r = 0; r < logits.rows(); ++r) {
    for (Index c = 0; c < logits.cols(); ++c) {
      const double z = logits(r, c);
      const double y = labels(r, c);
      const double sig = 1.0 / (1.0 + std::exp(-z));
      const long double zl = z;
      const long double soft = std::log1p(std::exp(-std::fabs(zl)));
      long double loss = std::max(zl, 0.0L) - zl * y + soft;
      double grad = sig - y;
      if (penalty) {
        // Extra (c - 1) * y * -log(sigmoid(z)) on the positive term; exact no-op when c == 1.
        const double extra = penalty->weights(c) - 1.0;
        loss += extra * y * (std::max(-zl, 0.0L) + soft);
        grad += extra * y * (sig - 1.0);
      }
      total += loss;
      result.grad(r, c) = grad / denom;
    }
  }
  result.loss_extended = total / denom;
  result.loss = static_cast<double>(result.loss_extended);
  return result;
}

PenaltyWeights penalty_from_counts(std::span<const std::int64_t> counts, double cap) {
  if (!(cap >= 1.0)) throw std::invalid_argument("penalty cap must be >= 1");
  std::int64_t max_count = 0;
  for (std::int64_t c : counts) {
    if (c < 0) throw std::invalid_argument("penalty_from_counts: negative count");
    max_count = std::max(max_count, c);
  }
  PenaltyWeights w;
  w.weights.resize(static_cast<Index>(counts.size()));
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] == 0) {
      w.weights(j) = cap;
      continue;
    }
    const double raw = static_cast<double>(max_count) / static_cast<double>(counts[j]);
    w.weights(j) = std::min(raw, cap);
  }
  return w;
}

// ---- optimizer -------------------------------------------------------------

void validate(const RmsPropConfig& config) {
  if (!(config.decay_rate > 0.0 && config.decay_rate < 1.0)) throw std::invalid_argument("decay_rate must be in (0, 1)");
  if (!(config.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(config.base_lr >= 0.0)) throw std::invalid_argument("base learning rate must be >= 0");
  if (!(config.lr_decay_factor > 0.0 && config.lr_decay_factor <= 1.0))
    throw std::invalid_argument("lr_decay_factor must be in (0, 1]");
}

double OptimizerState::learning_rate(std::uint64_t samples_seen) const {
  if (config.lr_decay_every_samples == 0) return config.base_lr;
  const std::uint64_t periods = samples_seen / config.lr_decay_every_samples;
  return config.base_lr * std::pow(config.lr_decay_factor, static_cast<double>(periods));
}

void rmsprop_step(const ParameterList& params, OptimizerState& state, std::uint64_t samples_seen) {
  if (state.accumulators.empty()) {
    for (const Parameter* p : params) state.accumulators.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  if (state.accumulators.size() != params.size()) throw std::invalid_argument("rmsprop: parameter count changed");

  const double decay = state.config.decay_rate;
  const double lr = state.learning_rate(samples_seen);
  const double eps = state.config.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& acc = state.accumulators[i];
    if (acc.rows() != p.value.rows() || acc.cols() != p.value.cols())
      throw std::invalid_argument("rmsprop: accumulator shape mismatch for " + p.name);
    acc.array() = decay * acc.array() + (1.0 - decay) * p.grad.array().square();
    p.value.array() -= lr * p.grad.array() / (acc.array().sqrt() + eps);
  }
}

// ---- gradient checking -----------------------------------------------------

bool GradCheckReport::passed() const {
  return std::all_of(params.begin(), params.end(), [](const ParamCheck& p) { return p.passed; });
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& p : params) worst = std::max(worst, p.max_rel_error);
  return worst;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  for (const auto& p : params) {
    os << (p.passed ? "ok   " : "FAIL ") << p.name << " max_rel_err=" << p.max_rel_error
       << " coords=" << p.coords_checked;
    if (!p.passed) os << " worst_index=" << p.worst_index;
    os << '\n';
  }
  return os.str();
}

GradCheckReport grad_check(const std::function<long double()>& loss_fn, const ParameterList& params,
                           const GradCheckOptions& options) {
  auto zero_all = [&] {
    for (Parameter* p : params) p->zero_grad();
  };

  zero_all();
  const long double base = loss_fn();
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  zero_all();
  const long double again = loss_fn();
  if (again != base || !std::isfinite(base))
    throw NonDeterministicLoss("grad_check: loss closure is not deterministic (" +
                               std::to_string(static_cast<double>(base)) + " vs " +
                               std::to_string(static_cast<double>(again)) + ")");

  Rng sampler(options.sample_seed);
  GradCheckReport report;
  const double h = options.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    std::vector<Index> coords(static_cast<std::size_t>(p.value.size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (options.max_coords_per_param > 0 && static_cast<Index>(coords.size()) > options.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), sampler);
      coords.resize(static_cast<std::size_t>(options.max_coords_per_param));
      std::sort(coords.begin(), coords.end());
    }

    ParamCheck check;
    check.name = p.name;
    for (Index idx : coords) {
      double& v = p.value.data()[idx];
      const double original = v;
      const double up = original + h;
      const double down = original - h;
      v = up;
      const long double plus = loss_fn();
      v = down;
      const long double minus = loss_fn();
      v = original;
      // Divide by the step actually applied; original +- h is rounded.
      const double numeric =
          static_cast<double>((plus - minus) / (static_cast<long double>(up) - static_cast<long double>(down)));
      const double a = analytic[i].data()[idx];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
      if (check.worst_index < 0 || rel > check.max_rel_error) {
        check.max_rel_error = rel;
        check.worst_index = idx;
        check.worst_analytic = a;
        check.worst_numeric = numeric;
      }
      ++check.coords_checked;
    }
    check.passed = check.max_rel_error < options.tolerance;
    report.params.push_back(std::move(check));
  }
  zero_all();
  return report;
}

}  // namespace framecls
