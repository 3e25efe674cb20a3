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
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace framecls {

template <typename ScalarType>
struct Dense {
  using Scalar = ScalarType;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
};

// All numerics run in double precision; stored features are float.
using Scalar = double;
using Matrix = Dense<double>::Matrix;
using Vector = Dense<double>::Vector;
using RowVector = Dense<double>::RowVector;
using FrameMatrix = Dense<float>::Matrix;
using Index = Eigen::Index;

using Rng = std::mt19937_64;

enum class Mode { kTrain, kInfer };

// Rank-3 activation [batch, steps, features] stored time-major: row t*batch + b.
// Each step is then a contiguous [batch, features] block.
struct Sequence {
  Index batch = 0;
  Index steps = 0;
  Matrix data;

  Sequence() = default;
  Sequence(Index batch_size, Index num_steps, Index features)
      : batch(batch_size), steps(num_steps), data(Matrix::Zero(batch_size * num_steps, features)) {}

  Index features() const { return data.cols(); }
  Index row(Index b, Index t) const { return t * batch + b; }

  auto step(Index t) { return data.middleRows(t * batch, batch); }
  auto step(Index t) const { return data.middleRows(t * batch, batch); }
  auto at(Index b, Index t) { return data.row(row(b, t)); }
  auto at(Index b, Index t) const { return data.row(row(b, t)); }
};

// Row mask over a Sequence: true where t < valid_len[b].
inline std::vector<char> valid_row_mask(Index batch, Index steps, const std::vector<Index>& valid_len) {
  std::vector<char> mask(static_cast<size_t>(batch * steps), 0);
  for (Index t = 0; t < steps; ++t)
    for (Index b = 0; b < batch; ++b) mask[t * batch + b] = t < valid_len[b] ? 1 : 0;
  return mask;
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& z) {
  using S = typename Derived::Scalar;
  return z.unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
}

template <typename Derived>
auto softplus(const Eigen::MatrixBase<Derived>& z) {
  using S = typename Derived::Scalar;
  return z.unaryExpr([](S v) { return std::max(v, S(0)) + std::log1p(std::exp(-std::abs(v))); });
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace framecls
