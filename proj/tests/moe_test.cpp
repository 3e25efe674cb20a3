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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "framecls/moe.hpp"
#include "test_support.hpp"

namespace framecls {
namespace {

using testing::extrapolated_gradient;
using testing::max_relative_error;
using testing::numeric_gradient;
using testing::random_matrix;
using testing::weighted_sum;

MoEConfig small_config(int n, int k, int in = 3, int hidden = 5, int out = 3) {
  MoEConfig c;
  c.num_experts = n;
  c.k = k;
  c.input_size = in;
  c.expert_hidden = hidden;
  c.output_size = out;
  return c;
}

void jitter_biases(MoeLayer& layer, Rng& rng) {
  for (ExpertParams& e : layer.experts) {
    e.b1.value = random_matrix(1, e.b1.value.cols(), rng, 0.3);
    e.b2.value = random_matrix(1, e.b2.value.cols(), rng, 0.3);
  }
}

// ---- gating --------------------------------------------------------------------------

TEST(Gating, AllExpertsIsDenseSoftmax) {
  Rng rng(1);
  GateParams p{Parameter("g", random_matrix(3, 5, rng)), Parameter("n", Matrix::Zero(3, 5))};
  Matrix x = random_matrix(4, 3, rng);
  GateOutput g = gate_topk(x, p, 5, Mode::kInfer, rng);
  Matrix logits = x * p.gate_weights.value;
  for (Index s = 0; s < 4; ++s) {
    RowVector e = (logits.row(s).array() - logits.row(s).maxCoeff()).exp().matrix();
    EXPECT_TRUE(g.gates.row(s).isApprox(e / e.sum(), 1e-14));
  }
}

TEST(Gating, TiesGoToLowestIndices) {
  Rng rng(2);
  GateParams p{Parameter("g", Matrix::Zero(3, 8)), Parameter("n", Matrix::Zero(3, 8))};
  GateOutput g = gate_topk(random_matrix(2, 3, rng), p, 4, Mode::kInfer, rng);
  for (Index s = 0; s < 2; ++s) {
    EXPECT_EQ(g.selected[s], (std::vector<int>{0, 1, 2, 3}));
    for (Index e = 0; e < 8; ++e) EXPECT_DOUBLE_EQ(g.gates(s, e), e < 4 ? 0.25 : 0.0);
  }
}

TEST(Gating, RowsHaveExactlyKWeightsSummingToOne) {
  Rng rng(3);
  GateParams p{Parameter("g", random_matrix(6, 10, rng)), Parameter("n", random_matrix(6, 10, rng))};
  Matrix x = random_matrix(100, 6, rng);
  for (int k : {1, 3, 10}) {
    for (Mode mode : {Mode::kTrain, Mode::kInfer}) {
      GateOutput g = gate_topk(x, p, k, mode, rng);
      for (Index s = 0; s < 100; ++s) {
        EXPECT_EQ((g.gates.row(s).array() > 0.0).count(), k);
        EXPECT_NEAR(g.gates.row(s).sum(), 1.0, 1e-12);
        EXPECT_TRUE((g.gates.row(s).array() >= 0.0).all());
      }
    }
  }
}

TEST(Gating, SelectedExpertsHaveTheLargestNoisyLogits) {
  Rng rng(4);
  GateParams p{Parameter("g", random_matrix(4, 7, rng)), Parameter("n", random_matrix(4, 7, rng))};
  GateOutput g = gate_topk(random_matrix(30, 4, rng), p, 3, Mode::kTrain, rng);
  for (Index s = 0; s < 30; ++s) {
    double weakest_selected = 1e300;
    for (int e : g.selected[s]) weakest_selected = std::min(weakest_selected, g.noisy_logits(s, e));
    for (Index e = 0; e < 7; ++e) {
      if (g.gates(s, e) == 0.0) {
        EXPECT_LE(g.noisy_logits(s, e), weakest_selected);
      }
    }
  }
}

TEST(Gating, MaskedRowsAreInactive) {
  Rng rng(5);
  GateParams p{Parameter("g", random_matrix(3, 4, rng)), Parameter("n", random_matrix(3, 4, rng))};
  const std::vector<char> mask = {1, 0, 1};
  GateOutput g = gate_topk(random_matrix(3, 3, rng), p, 2, Mode::kTrain, rng, &mask);
  EXPECT_TRUE(g.gates.row(1).isZero(0.0));
  EXPECT_TRUE(g.selected[1].empty());
  EXPECT_TRUE(g.noise.row(1).isZero(0.0));
}

TEST(Gating, RejectsBadK) {
  Rng rng(6);
  GateParams p{Parameter("g", Matrix::Zero(3, 4)), Parameter("n", Matrix::Zero(3, 4))};
  EXPECT_THROW(gate_topk(Matrix::Zero(1, 3), p, 0, Mode::kInfer, rng), std::invalid_argument);
  EXPECT_THROW(gate_topk(Matrix::Zero(1, 3), p, 5, Mode::kInfer, rng), std::invalid_argument);
  EXPECT_THROW(validate(small_config(4, 5)), std::invalid_argument);
}

// ---- layer -----------------------------------------------------------------------------

TEST(MixtureLayer, SingleExpertIsTheExpert) {
  Rng rng(7);
  MoeLayer layer("moe", small_config(1, 1), rng);
  jitter_biases(layer, rng);
  Matrix x = random_matrix(5, 3, rng);
  Matrix y = layer.forward(x, Mode::kTrain, rng);
  EXPECT_TRUE(y.isApprox(expert_forward(x, layer.experts[0]), 1e-15));
}

TEST(MixtureLayer, IdenticalExpertsMakeGatingIrrelevant) {
  Rng rng(8);
  MoeLayer layer("moe", small_config(6, 3), rng);
  jitter_biases(layer, rng);
  for (std::size_t e = 1; e < layer.experts.size(); ++e) {
    layer.experts[e].w1.value = layer.experts[0].w1.value;
    layer.experts[e].b1.value = layer.experts[0].b1.value;
    layer.experts[e].w2.value = layer.experts[0].w2.value;
    layer.experts[e].b2.value = layer.experts[0].b2.value;
  }
  Matrix x = random_matrix(10, 3, rng);
  Matrix expected = expert_forward(x, layer.experts[0]);
  EXPECT_TRUE(layer.forward(x, Mode::kTrain, rng).isApprox(expected, 1e-12));
  layer.gate_params.gate_weights.value = random_matrix(3, 6, rng, 5.0);
  EXPECT_TRUE(layer.forward(x, Mode::kInfer, rng).isApprox(expected, 1e-12));
}

TEST(MixtureLayer, MatchesDenseOracle) {
  Rng rng(9);
  MoeLayer layer("moe", small_config(4, 2, 3, 5, 3), rng);
  jitter_biases(layer, rng);
  Matrix x = random_matrix(12, 3, rng);
  Matrix y = layer.forward(x, Mode::kInfer, rng);

  // Evaluate every expert on every row, then combine by hand.
  std::vector<Matrix> outputs;
  for (const ExpertParams& e : layer.experts) outputs.push_back(expert_forward(x, e));
  Matrix logits = x * layer.gate_params.gate_weights.value;
  for (Index s = 0; s < 12; ++s) {
    std::vector<int> idx = {0, 1, 2, 3};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return logits(s, a) > logits(s, b); });
    const double a = std::exp(logits(s, idx[0]));
    const double b = std::exp(logits(s, idx[1]));
    RowVector expected = (a * outputs[idx[0]].row(s) + b * outputs[idx[1]].row(s)) / (a + b);
    EXPECT_LT((y.row(s) - expected).cwiseAbs().maxCoeff(), 1e-12) << s;
  }
}

TEST(MixtureLayer, EvaluatesExactlyKExpertsPerRow) {
  Rng rng(10);
  MoeLayer layer("moe", small_config(8, 3), rng);
  layer.forward(random_matrix(17, 3, rng), Mode::kTrain, rng);
  EXPECT_EQ(layer.expert_evaluations(), 17u * 3u);
  const std::vector<char> mask = {1, 1, 0, 0, 1};
  layer.forward(random_matrix(5, 3, rng), Mode::kInfer, rng, &mask);
  EXPECT_EQ(layer.expert_evaluations(), 3u * 3u);
}

TEST(MixtureLayer, GradientsMatchFiniteDifferences) {
  Rng rng(11);
  MoEConfig cfg = small_config(5, 2, 3, 4, 2);
  MoeLayer layer("moe", cfg, rng);
  jitter_biases(layer, rng);
  layer.gate_params.noise_weights.value = random_matrix(3, 5, rng, 0.5);
  Matrix x = random_matrix(6, 3, rng);
  Matrix probe = random_matrix(6, 2, rng);
  auto loss = [&]() -> long double {
    Rng noise(77);
    Matrix y = layer.forward(x, Mode::kTrain, noise);
    return weighted_sum(y, probe) + layer.aux_loss();
  };
  ParameterList params;
  layer.collect(params);
  for (Parameter* p : params) p->zero_grad();
  loss();
  Matrix dx = layer.backward(probe);
  std::vector<Matrix> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);
  EXPECT_LT(max_relative_error(dx, numeric_gradient(loss, x)), 1e-5);
  for (std::size_t i = 0; i < params.size(); ++i)
    EXPECT_LT(max_relative_error(analytic[i], numeric_gradient(loss, params[i]->value)), 1e-5) << params[i]->name;
}

// ---- importance loss ---------------------------------------------------------------------

TEST(ImportanceLoss, UniformImportanceIsZero) {
  EXPECT_EQ(importance_loss(Matrix::Constant(4, 3, 1.0 / 3.0), 0.1), 0.0);
}

TEST(ImportanceLoss, HandExample) {
  Matrix g(2, 2);
  g << 1.0, 0.0, 0.5, 0.5;  // importance (1.5, 0.5) is proportional to (3, 1)
  EXPECT_DOUBLE_EQ(importance_loss(g, 0.7), 0.25 * 0.7);
  Vector v(2);
  v << 3.0, 1.0;
  EXPECT_DOUBLE_EQ(cv_squared(v), 0.25);
}

TEST(ImportanceLoss, GradientMatchesFiniteDifferences) {
  Rng rng(12);
  Matrix g = random_matrix(6, 4, rng).cwiseAbs();
  const std::vector<char> mask = {1, 1, 0, 1, 1, 1};
  Matrix d;
  importance_loss(g, 0.3, &d, &mask);
  auto loss = [&] { return static_cast<long double>(importance_loss(g, 0.3, nullptr, &mask)); };
  EXPECT_LT(max_relative_error(d, numeric_gradient(loss, g)), 1e-6);
  EXPECT_TRUE(d.row(2).isZero(0.0));
}

TEST(ImportanceLoss, ScaleInvariantAndNonNegative) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    Vector v = random_matrix(1 + static_cast<Index>(rng() % 10), 1, rng).cwiseAbs();
    const double cv = cv_squared(v);
    EXPECT_GE(cv, 0.0);
    EXPECT_NEAR(cv_squared(3.7 * v), cv, 1e-12 * std::max(1.0, cv));
  }
}

// ---- load loss ----------------------------------------------------------------------------

GateOutput manual_gate(const Matrix& clean, const Matrix& noise_std, const Matrix& noise) {
  GateOutput g;
  g.mode = Mode::kTrain;
  g.clean_logits = clean;
  g.noise_std = noise_std;
  g.noise_pre = noise_std;  // unused by the load estimator
  g.noise = noise;
  g.noisy_logits = clean + noise.cwiseProduct(noise_std);
  g.gates = Matrix::Zero(clean.rows(), clean.cols());
  g.active.assign(static_cast<std::size_t>(clean.rows()), 1);
  return g;
}

TEST(LoadLoss, SymmetricExpertsGiveZero) {
  Matrix clean(2, 2);
  clean << 1.0, 0.0, 0.0, 1.0;
  Matrix noise(2, 2);
  noise << 0.0, 0.0, 0.0, 0.0;
  GateOutput g = manual_gate(clean, Matrix::Ones(2, 2), noise);
  EXPECT_NEAR(load_loss(g, 1, 0.1, 1e-8), 0.0, 1e-15);
}

TEST(LoadLoss, FarAboveAndBelowThreshold) {
  Matrix clean(1, 2);
  clean << 10.0, 0.0;
  GateOutput g = manual_gate(clean, Matrix::Ones(1, 2), Matrix::Zero(1, 2));
  Matrix p = selection_probability(g, 1, 1e-8);
  EXPECT_NEAR(p(0, 0), 1.0, 1e-20);
  EXPECT_NEAR(p(0, 1), 0.0, 1e-20);
}

TEST(LoadLoss, SelectionProbabilityMatchesMonteCarlo) {
  // Redraw one expert's noise with every other noisy logit held fixed; the empirical
  // frequency of landing in the top k estimates P(s, e).
  Rng rng(14);
  const Index n = 5;
  const int k = 2;
  Matrix clean = random_matrix(3, n, rng);
  Matrix noise_std = random_matrix(3, n, rng).cwiseAbs().array() + 0.2;
  GateOutput g = manual_gate(clean, noise_std, random_matrix(3, n, rng));
  Matrix p = selection_probability(g, k, 1e-8);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int trials = 100000;
  for (Index s = 0; s < 3; ++s) {
    for (Index e = 0; e < n; ++e) {
      int hits = 0;
      for (int t = 0; t < trials; ++t) {
        const double mine = clean(s, e) + noise_std(s, e) * normal(rng);
        int above = 0;
        for (Index o = 0; o < n; ++o)
          if (o != e && g.noisy_logits(s, o) > mine) ++above;
        if (above < k) ++hits;
      }
      EXPECT_NEAR(static_cast<double>(hits) / trials, p(s, e), 0.01) << s << "," << e;
    }
  }
}

TEST(LoadLoss, GradientsMatchFiniteDifferences) {
  Rng rng(15);
  const Index n = 6;
  Matrix clean = random_matrix(8, n, rng);
  Matrix noise_std = random_matrix(8, n, rng).cwiseAbs().array() + 0.3;
  const Matrix noise = random_matrix(8, n, rng);
  Matrix d_clean, d_std;
  load_loss(manual_gate(clean, noise_std, noise), 2, 0.4, 1e-8, &d_clean, &d_std);
  auto loss = [&] {
    return static_cast<long double>(load_loss(manual_gate(clean, noise_std, noise), 2, 0.4, 1e-8));
  };
  // Some entries are ~1e-9; plain differences at h = 1e-5 sit at the roundoff floor.
  EXPECT_LT(max_relative_error(d_clean, extrapolated_gradient(loss, clean)), 1e-5);
  EXPECT_LT(max_relative_error(d_std, extrapolated_gradient(loss, noise_std)), 1e-5);
}

TEST(LoadLoss, AllExpertsActiveHasNoLoad) {
  Rng rng(16);
  GateOutput g = manual_gate(random_matrix(3, 4, rng), Matrix::Ones(3, 4), random_matrix(3, 4, rng));
  EXPECT_EQ(load_loss(g, 4, 0.1, 1e-8), 0.0);
}

TEST(AuxLosses, ZeroWeightsGiveZeroAuxLoss) {
  Rng rng(17);
  MoEConfig cfg = small_config(6, 2);
  cfg.w_importance = 0.0;
  cfg.w_load = 0.0;
  MoeLayer layer("moe", cfg, rng);
  layer.forward(random_matrix(9, 3, rng), Mode::kTrain, rng);
  EXPECT_EQ(layer.aux_loss(), 0.0);
}

// ---- application over time ------------------------------------------------------------------

TEST(MixtureOverTime, SingleStepEqualsRowwise) {
  Rng rng(18);
  MoeLayer layer("moe", small_config(4, 2), rng);
  Sequence x(5, 1, 3);
  x.data = random_matrix(5, 3, rng);
  Sequence y = layer.forward_over_time(x, {1, 1, 1, 1, 1}, Mode::kInfer, rng);
  EXPECT_EQ(y.data, layer.forward(x.data, Mode::kInfer, rng));
}

TEST(MixtureOverTime, PermutingTimePermutesOutputs) {
  Rng rng(19);
  MoeLayer layer("moe", small_config(5, 2), rng);
  jitter_biases(layer, rng);
  Sequence x(2, 4, 3);
  x.data = random_matrix(8, 3, rng);
  const std::vector<Index> perm = {2, 0, 3, 1};
  Sequence xp(2, 4, 3);
  for (Index t = 0; t < 4; ++t) xp.step(t) = x.step(perm[t]);
  Sequence y = layer.forward_over_time(x, {4, 4}, Mode::kInfer, rng);
  Sequence yp = layer.forward_over_time(xp, {4, 4}, Mode::kInfer, rng);
  for (Index t = 0; t < 4; ++t) EXPECT_EQ(yp.step(t), y.step(perm[t]));
}

TEST(MixtureOverTime, PaddingIsExcludedFromOutputsAndAuxLosses) {
  Rng rng(20);
  MoeLayer layer("moe", small_config(5, 2), rng);
  jitter_biases(layer, rng);
  layer.gate_params.noise_weights.value = random_matrix(3, 5, rng, 0.5);
  Sequence x(2, 5, 3);
  x.data = random_matrix(10, 3, rng);
  const std::vector<Index> lens = {5, 2};
  Sequence garbage = x;
  for (Index t = 2; t < 5; ++t) garbage.at(1, t).setConstant(1e6);

  Rng r1(21), r2(21);
  Sequence a = layer.forward_over_time(x, lens, Mode::kTrain, r1);
  const double aux_a = layer.aux_loss();
  Sequence b = layer.forward_over_time(garbage, lens, Mode::kTrain, r2);
  EXPECT_EQ(layer.aux_loss(), aux_a);
  EXPECT_EQ(a.data, b.data);
  for (Index t = 2; t < 5; ++t) EXPECT_TRUE(b.at(1, t).isZero(0.0));

  Sequence up(2, 5, 3);
  up.data = random_matrix(10, 3, rng);
  Sequence dx = layer.backward_over_time(up);
  for (Index t = 2; t < 5; ++t) EXPECT_TRUE(dx.at(1, t).isZero(0.0));
}

}  // namespace
}  // namespace framecls
