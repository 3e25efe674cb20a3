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

#include <cmath>
#include <fstream>
#include <limits>

#include "framecls/app.hpp"
#include "framecls/checkpoint.hpp"
#include "framecls/models.hpp"
#include "test_support.hpp"

namespace framecls {
namespace {

using testing::extrapolated_gradient;
using testing::max_relative_error;
using testing::numeric_gradient;
using testing::random_matrix;
using testing::TempDir;

Parameter& param(Model& model, const std::string& name) {
  for (Parameter* p : model.state_tensors())
    if (p->name == name) return *p;
  throw std::out_of_range("no parameter " + name);
}

Batch random_batch(Index b_size, Index steps, Index features, Index classes, Rng& rng,
                   std::vector<Index> lens = {}) {
  Batch batch;
  batch.features = Sequence(b_size, steps, features);
  batch.labels = Matrix::Zero(b_size, classes);
  if (lens.empty()) lens.assign(static_cast<std::size_t>(b_size), steps);
  batch.valid_len = lens;
  for (Index b = 0; b < b_size; ++b) {
    batch.video_ids.push_back("v" + std::to_string(b));
    for (Index t = 0; t < lens[b]; ++t) batch.features.at(b, t) = random_matrix(1, features, rng).row(0);
    batch.labels(b, b % classes) = 1.0;
  }
  return batch;
}

void reverse_frames(Batch& batch, Index b) {
  const Index len = batch.valid_len[b];
  for (Index t = 0; t < len / 2; ++t) {
    RowVector tmp = batch.features.at(b, t);
    batch.features.at(b, t) = batch.features.at(b, len - 1 - t);
    batch.features.at(b, len - 1 - t) = tmp;
  }
}

struct GradientErrors {
  double worst = 0.0;
  std::string worst_name;
};

// Compares model gradients of the penalized loss against an independent finite-difference
// oracle. `step_for` picks the oracle step per tensor.
GradientErrors end_to_end_errors(Model& model, const Batch& batch, std::uint64_t noise_seed,
                                 const std::function<Matrix(const std::function<long double()>&, Parameter&)>& oracle) {
  PenaltyWeights penalty{RowVector::LinSpaced(batch.labels.cols(), 1.0, 4.0)};
  auto loss = [&]() -> long double {
    Rng rng(noise_seed);
    Matrix logits = model.forward(batch, Mode::kTrain, rng);
    LossResult ce = sigmoid_cross_entropy(logits, batch.labels, &penalty);
    model.backward(ce.grad);
    return ce.loss_extended + model.aux_loss();
  };
  model.zero_grad();
  loss();
  std::vector<Matrix> analytic;
  for (Parameter* p : model.parameters()) analytic.push_back(p->grad);
  GradientErrors errors;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    Parameter& p = *model.parameters()[i];
    const double e = max_relative_error(analytic[i], oracle(loss, p));
    if (e > errors.worst) {
      errors.worst = e;
      errors.worst_name = p.name;
    }
  }
  return errors;
}

// ---- Bag-of-Frames ------------------------------------------------------------------

BoFConfig tiny_bof() {
  BoFConfig c;
  c.feature_size = 4;
  c.num_classes = 3;
  c.max_frames = 6;
  c.fc_hidden = 5;
  return c;
}

TEST(BagOfFrames, SingleFrameSingleSampleIsFinite) {
  Rng rng(1);
  BoFConfig cfg = tiny_bof();
  cfg.max_frames = 1;
  auto model = make_model(cfg, 1);
  Batch batch = random_batch(1, 1, 4, 3, rng);
  Matrix logits = predict(*model, batch);
  EXPECT_TRUE(logits.allFinite());
  EXPECT_EQ(logits.rows(), 1);
  EXPECT_EQ(logits.cols(), 3);
}

TEST(BagOfFrames, FrameOrderDoesNotMatter) {
  Rng rng(2);
  auto model = make_model(tiny_bof(), 2);
  for (int trial = 0; trial < 5; ++trial) {
    Batch batch = random_batch(3, 6, 4, 3, rng, {6, 4, 2});
    Batch shuffled = batch;
    std::vector<Index> order = {3, 0, 2, 1};
    for (Index t = 0; t < 4; ++t) shuffled.features.at(1, t) = batch.features.at(1, order[t]);
    reverse_frames(shuffled, 0);
    EXPECT_EQ(predict(*model, batch), predict(*model, shuffled));
  }
}

TEST(BagOfFrames, FullPipelineGradients) {
  // The input-norm shift is cancelled by the hidden batch norm, so its gradient is zero
  // almost surely and the loss is flat along it. At h = 1e-5 the oracle reads only
  // roundoff there; a 1e-3 step along that flat direction is exact and crosses no kinks.
  // Every other tensor uses h = 1e-5.
  const ModelConfig config = miniature_config(ModelKind::kBoF);
  auto model = miniature_model(config, 0);
  const Batch batch = miniature_batch(config, 1);
  GradientErrors e = end_to_end_errors(*model, batch, 2, [](const auto& loss, Parameter& p) {
    return numeric_gradient(loss, p.value, p.name == "bn_input.beta" ? 1e-3 : 1e-5);
  });
  EXPECT_LT(e.worst, 1e-5) << e.worst_name;
}

TEST(BagOfFrames, FullyConnectedBeforeNormHaveNoBias) {
  auto model = make_model(tiny_bof(), 3);
  for (const Parameter* p : model->parameters()) {
    EXPECT_NE(p->name, "fc1.bias");
    EXPECT_NE(p->name, "fc2.bias");
  }
  EXPECT_NO_THROW(param(*model, "classifier.bias"));
}

// ---- Simple LSTM -----------------------------------------------------------------------

SimpleLstmConfig tiny_lstm() {
  SimpleLstmConfig c;
  c.feature_size = 4;
  c.num_classes = 3;
  c.max_frames = 4;
  c.num_layers = 2;
  c.hidden_size = 8;
  return c;
}

TEST(SimpleLstm, ReversingFramesChangesLogits) {
  Rng rng(4);
  auto model = make_model(tiny_lstm(), 4);
  Batch batch = random_batch(2, 4, 4, 3, rng);
  Batch reversed = batch;
  reverse_frames(reversed, 0);
  reverse_frames(reversed, 1);
  Matrix a = predict(*model, batch);
  Matrix b = predict(*model, reversed);
  EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SimpleLstm, SingleStepUsesTheOnlyOutput) {
  Rng rng(5);
  SimpleLstmConfig cfg = tiny_lstm();
  cfg.max_frames = 1;
  cfg.num_layers = 1;
  auto model = make_model(cfg, 5);
  Batch batch = random_batch(2, 1, 4, 3, rng);
  Matrix logits = model->forward(batch, Mode::kInfer, rng);

  LstmLayer layer("lstm1", 4, 8, false, 0.0, rng);
  layer.params.input_weights.value = param(*model, "lstm1.input_weights").value;
  layer.params.recurrent_weights.value = param(*model, "lstm1.recurrent_weights").value;
  layer.params.bias.value = param(*model, "lstm1.bias").value;
  Sequence x = batch.features;
  x.data /= std::sqrt(1.0 + 1e-8);  // fresh running statistics: mean 0, variance 1
  Sequence h = layer.forward(x, Mode::kInfer, rng);
  Matrix expected = h.data * param(*model, "classifier.weight").value;
  expected.rowwise() += param(*model, "classifier.bias").value.row(0);
  EXPECT_TRUE(logits.isApprox(expected, 1e-13));
}

TEST(SimpleLstm, FullGradients) {
  SimpleLstmConfig cfg = tiny_lstm();
  cfg.dropout = 0.4;
  auto model = miniature_model(cfg, 6);
  Rng rng(6);
  Batch batch = random_batch(3, 4, 4, 3, rng, {4, 2, 3});
  GradientErrors e = end_to_end_errors(*model, batch, 7, [](const auto& loss, Parameter& p) {
    return numeric_gradient(loss, p.value, 1e-5);
  });
  EXPECT_LT(e.worst, 1e-4) << e.worst_name;
  // The network is smooth, so an extrapolated oracle resolves it far more tightly.
  GradientErrors tight = end_to_end_errors(*model, batch, 7, [](const auto& loss, Parameter& p) {
    return extrapolated_gradient(loss, p.value);
  });
  EXPECT_LT(tight.worst, 1e-5) << tight.worst_name;
}

// ---- LSTM + mixture of experts -------------------------------------------------------------

LstmMoeConfig tiny_moe() {
  LstmMoeConfig c;
  c.feature_size = 4;
  c.num_classes = 3;
  c.max_frames = 5;
  c.lstm_hidden = 4;
  c.num_experts = 4;
  c.active_experts = 2;
  c.expert_hidden = 5;
  return c;
}

TEST(LstmMoe, ZeroAuxWeightsGivePureClassificationLoss) {
  LstmMoeConfig cfg = tiny_moe();
  cfg.w_importance = 0.0;
  cfg.w_load = 0.0;
  auto model = make_model(cfg, 8);
  Rng rng(8);
  Batch batch = random_batch(3, 5, 4, 3, rng, {5, 3, 1});
  TrainState state;
  state.rng.seed(9);
  StepResult r = train_step(*model, batch, state);
  EXPECT_EQ(r.aux_loss, 0.0);
  EXPECT_EQ(r.loss, r.classification_loss);

  auto weighted = make_model(tiny_moe(), 8);
  TrainState state2;
  state2.rng.seed(9);
  EXPECT_GT(train_step(*weighted, batch, state2).aux_loss, 0.0);
}

TEST(LstmMoe, DenseMixtureMatchesOracle) {
  LstmMoeConfig cfg = tiny_moe();
  cfg.num_experts = 3;
  cfg.active_experts = 3;
  auto model = make_model(cfg, 10);
  Rng rng(10);
  Batch batch = random_batch(2, 5, 4, 3, rng, {5, 3});
  Matrix logits = model->forward(batch, Mode::kInfer, rng);

  auto copy_layer = [&](const std::string& name, Index in) {
    LstmLayer layer(name, in, 4, false, 0.0, rng);
    layer.params.input_weights.value = param(*model, name + ".input_weights").value;
    layer.params.recurrent_weights.value = param(*model, name + ".recurrent_weights").value;
    layer.params.bias.value = param(*model, name + ".bias").value;
    return layer;
  };
  LstmLayer lstm1 = copy_layer("lstm1", 4);
  LstmLayer lstm2 = copy_layer("lstm2", 4);
  Sequence x = batch.features;
  x.data /= std::sqrt(1.0 + 1e-8);
  Sequence h1 = lstm1.forward(x, Mode::kInfer, rng);

  // Dense mixture with softmax gates over all experts.
  Sequence mixed(2, 5, 4);
  const Matrix gate_w = param(*model, "moe.gate_weights").value;
  for (Index t = 0; t < 5; ++t) {
    for (Index b = 0; b < 2; ++b) {
      if (t >= batch.valid_len[b]) continue;
      const Matrix row = h1.at(b, t);
      RowVector logit = row * gate_w;
      RowVector w = (logit.array() - logit.maxCoeff()).exp().matrix();
      w /= w.sum();
      for (int e = 0; e < 3; ++e) {
        const std::string p = "moe.expert" + std::to_string(e);
        Matrix hid = (row * param(*model, p + ".w1").value + param(*model, p + ".b1").value).cwiseMax(0.0);
        Matrix out = hid * param(*model, p + ".w2").value + param(*model, p + ".b2").value;
        mixed.at(b, t) += w(e) * out.row(0);
      }
    }
  }
  Sequence h2 = lstm2.forward(mixed, Mode::kInfer, rng);
  Matrix pooled = Matrix::Zero(2, 4);
  for (Index b = 0; b < 2; ++b) {
    const Index len = batch.valid_len[b];
    for (Index t = 0; t < len; ++t) pooled.row(b) += (static_cast<double>(t + 1) / len) * h2.at(b, t);
  }
  Matrix expected = pooled * param(*model, "classifier.weight").value;
  expected.rowwise() += param(*model, "classifier.bias").value.row(0);
  EXPECT_LT((logits - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LstmMoe, FullGradientsWithFixedNoise) {
  const ModelConfig config = miniature_config(ModelKind::kLstmMoe);
  auto model = miniature_model(config, 0);
  const Batch batch = miniature_batch(config, 1);
  GradientErrors e = end_to_end_errors(*model, batch, 2, [](const auto& loss, Parameter& p) {
    return numeric_gradient(loss, p.value, 1e-5);
  });
  EXPECT_LT(e.worst, 1e-4) << e.worst_name;
}

// ---- training -----------------------------------------------------------------------------

Dataset separable_dataset(int videos, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_classes = 4;
  spec.num_videos = videos;
  spec.min_frames = 3;
  spec.max_frames = 6;
  spec.feature_size = 8;
  spec.min_labels_per_video = 1;
  spec.max_labels_per_video = 1;
  spec.noise_std = 0.3;
  spec.seed = seed;
  return generate_synthetic(spec);
}

std::vector<Batch> separable_batches(std::uint64_t seed) {
  BatchOptions opt;
  opt.max_frames = 6;
  opt.skip_frames = 0;
  opt.batch_size = 16;
  opt.drop_remainder = true;
  return make_batches(separable_dataset(128, seed), opt, seed);
}

BoFConfig separable_bof() {
  BoFConfig c;
  c.feature_size = 8;
  c.num_classes = 4;
  c.max_frames = 6;
  c.fc_hidden = 16;
  return c;
}

TEST(TrainStep, IdenticalRunsGiveIdenticalLosses) {
  const std::vector<Batch> batches = separable_batches(11);
  for (const ModelConfig& cfg : {ModelConfig(separable_bof()), ModelConfig(miniature_config(ModelKind::kLstmMoe))}) {
    auto run = [&] {
      auto model = make_model(cfg, 12);
      TrainState state;
      state.rng.seed(13);
      state.optimizer.config.base_lr = 1e-3;
      const Batch mini = miniature_batch(cfg, 14);
      std::vector<double> losses;
      for (int s = 0; s < 6; ++s) {
        const Batch& b = kind_of(cfg) == ModelKind::kBoF ? batches[s % batches.size()] : mini;
        losses.push_back(train_step(*model, b, state).loss);
      }
      return losses;
    };
    EXPECT_EQ(run(), run());
  }
}

TEST(TrainStep, ZeroLearningRateLeavesParametersUnchanged) {
  const std::vector<Batch> batches = separable_batches(15);
  auto model = make_model(separable_bof(), 16);
  std::vector<Matrix> before;
  for (const Parameter* p : model->parameters()) before.push_back(p->value);
  TrainState state;
  state.optimizer.config.base_lr = 0.0;
  for (int s = 0; s < 3; ++s) train_step(*model, batches[s], state);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(model->parameters()[i]->value, before[i]);
  EXPECT_EQ(state.samples_seen, 48u);
  EXPECT_EQ(state.step, 3u);
}

TEST(TrainStep, LossHalvesOnSeparableData) {
  const std::vector<Batch> batches = separable_batches(17);
  auto model = make_model(separable_bof(), 18);
  TrainState state;
  state.rng.seed(19);
  state.optimizer.config.base_lr = 1e-3;
  double first = 0.0;
  double last = 0.0;
  for (int s = 0; s < 200; ++s) {
    const double loss = train_step(*model, batches[s % batches.size()], state).loss;
    if (s == 0) first = loss;
    last = loss;
  }
  EXPECT_LE(last, 0.5 * first) << "first " << first << " last " << last;
}

TEST(TrainStep, NonFiniteInputAbortsWithTensorName) {
  std::vector<Batch> batches = separable_batches(20);
  auto model = make_model(separable_bof(), 21);
  TrainState state;
  batches[0].features.at(0, 0)(0) = std::numeric_limits<double>::quiet_NaN();
  try {
    train_step(*model, batches[0], state);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("logits"), std::string::npos) << e.what();
  }
}

TEST(TrainStep, NonFiniteParameterIsNamed) {
  std::vector<Batch> batches = separable_batches(22);
  auto model = make_model(separable_bof(), 23);
  TrainState state;
  // A finite loss with an infinite gradient: the update itself produces the bad tensor.
  param(*model, "classifier.weight").value(0, 0) = 1e308;
  try {
    for (int s = 0; s < 3; ++s) train_step(*model, batches[s], state);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite values in"), std::string::npos) << e.what();
  }
}

// ---- prediction -----------------------------------------------------------------------------

TEST(Predict, ZeroLogitsGiveOneHalf) {
  auto model = make_model(separable_bof(), 24);
  param(*model, "classifier.weight").value.setZero();
  param(*model, "classifier.bias").value.setZero();
  Matrix p = predict(*model, separable_batches(25)[0]);
  EXPECT_TRUE((p.array() == 0.5).all());
}

TEST(Predict, RepeatedCallsAreBitIdentical) {
  for (ModelKind kind : {ModelKind::kBoF, ModelKind::kSimpleLstm, ModelKind::kLstmMoe}) {
    const ModelConfig cfg = miniature_config(kind);
    auto model = miniature_model(cfg, 26);
    const Batch batch = miniature_batch(cfg, 27);
    EXPECT_EQ(predict(*model, batch), predict(*model, batch)) << to_string(kind);
  }
}

TEST(Predict, ExtremeInputsStayInsideUnitInterval) {
  for (ModelKind kind : {ModelKind::kBoF, ModelKind::kSimpleLstm, ModelKind::kLstmMoe}) {
    const ModelConfig cfg = miniature_config(kind);
    auto model = miniature_model(cfg, 28, 3.0);
    Batch batch = miniature_batch(cfg, 29);
    for (Index b = 0; b < batch.size(); ++b)
      for (Index t = 0; t < batch.valid_len[b]; ++t)
        for (Index f = 0; f < batch.features.features(); ++f) batch.features.at(b, t)(f) = ((b + t + f) % 2 ? 1e3 : -1e3);
    Matrix p = predict(*model, batch);
    EXPECT_TRUE((p.array() > 0.0).all()) << to_string(kind);
    EXPECT_TRUE((p.array() < 1.0).all()) << to_string(kind);
  }
}

// ---- checkpoints -------------------------------------------------------------------------------

TEST(Checkpointing, RoundTripPredictsBitIdentically) {
  TempDir dir("ckpt");
  for (ModelKind kind : {ModelKind::kBoF, ModelKind::kSimpleLstm, ModelKind::kLstmMoe}) {
    const ModelConfig cfg = miniature_config(kind);
    auto model = miniature_model(cfg, 30);
    TrainState state;
    state.rng.seed(31);
    const Batch batch = miniature_batch(cfg, 32);
    train_step(*model, batch, state);
    save_checkpoint(dir / "m.fgck", *model, state);
    Checkpoint loaded = load_checkpoint(dir / "m.fgck");
    EXPECT_EQ(loaded.model->kind(), kind);
    EXPECT_EQ(predict(*loaded.model, batch), predict(*model, batch)) << to_string(kind);
    EXPECT_EQ(loaded.state.samples_seen, state.samples_seen);
    EXPECT_EQ(loaded.state.step, 1u);
    EXPECT_EQ(loaded.state.rng, state.rng);
  }
}

TEST(Checkpointing, ResumedTrajectoryMatchesUninterrupted) {
  TempDir dir("resume");
  const ModelConfig cfg = miniature_config(ModelKind::kLstmMoe);
  std::vector<Batch> batches;
  for (std::uint64_t i = 0; i < 10; ++i) batches.push_back(miniature_batch(cfg, 40 + i));

  auto straight = make_model(cfg, 33);
  TrainState s1;
  s1.rng.seed(34);
  s1.optimizer.config.base_lr = 1e-2;
  for (int i = 0; i < 10; ++i) train_step(*straight, batches[i], s1);

  auto first = make_model(cfg, 33);
  TrainState s2;
  s2.rng.seed(34);
  s2.optimizer.config.base_lr = 1e-2;
  for (int i = 0; i < 5; ++i) train_step(*first, batches[i], s2);
  save_checkpoint(dir / "half.fgck", *first, s2);
  Checkpoint resumed = load_checkpoint(dir / "half.fgck");
  for (int i = 5; i < 10; ++i) train_step(*resumed.model, batches[i], resumed.state);

  for (std::size_t i = 0; i < straight->state_tensors().size(); ++i)
    EXPECT_EQ(straight->state_tensors()[i]->value, resumed.model->state_tensors()[i]->value)
        << straight->state_tensors()[i]->name;
}

TEST(Checkpointing, KindMismatchIsRejected) {
  TempDir dir("kind");
  auto bof = make_model(miniature_config(ModelKind::kBoF), 35);
  TrainState state;
  save_checkpoint(dir / "bof.fgck", *bof, state);
  auto lstm = make_model(miniature_config(ModelKind::kSimpleLstm), 35);
  TrainState other;
  EXPECT_THROW(restore_checkpoint(dir / "bof.fgck", *lstm, other), CheckpointMismatch);
  BoFConfig wider = std::get<BoFConfig>(miniature_config(ModelKind::kBoF));
  wider.fc_hidden += 1;
  auto bof2 = make_model(wider, 35);
  EXPECT_THROW(restore_checkpoint(dir / "bof.fgck", *bof2, other), CheckpointMismatch);
}

TEST(Checkpointing, CorruptFilesAreRejected) {
  TempDir dir("corrupt");
  auto model = make_model(miniature_config(ModelKind::kSimpleLstm), 36);
  TrainState state;
  save_checkpoint(dir / "ok.fgck", *model, state);
  std::ifstream in(dir / "ok.fgck", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    out << content;
    return dir / name;
  };
  EXPECT_THROW(load_checkpoint(write("magic.fgck", "XGCK" + bytes.substr(4))), FormatError);
  EXPECT_THROW(load_checkpoint(write("short.fgck", bytes.substr(0, bytes.size() / 2))), FormatError);
  EXPECT_THROW(load_checkpoint(write("long.fgck", bytes + "x")), FormatError);
  std::string version = bytes;
  version[4] = 99;
  EXPECT_THROW(load_checkpoint(write("version.fgck", version)), CheckpointMismatch);
  EXPECT_THROW(load_checkpoint(dir / "missing.fgck"), std::runtime_error);
}

// ---- configuration ---------------------------------------------------------------------------------

TEST(ModelConfiguration, KeyValueRoundTrip) {
  for (ModelKind kind : {ModelKind::kBoF, ModelKind::kSimpleLstm, ModelKind::kLstmMoe}) {
    const ModelConfig cfg = miniature_config(kind);
    const std::string text = to_canonical_text(to_key_values(cfg));
    const ModelConfig back = model_config_from(kind, parse_key_values(text));
    EXPECT_EQ(to_canonical_text(to_key_values(back)), text);
    EXPECT_EQ(kind_of(back), kind);
    EXPECT_EQ(parse_model_kind(to_string(kind)), kind);
  }
}

TEST(ModelConfiguration, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(model_config_from(ModelKind::kBoF, {{"fc_hiden", "3"}}), std::invalid_argument);
  EXPECT_THROW(model_config_from(ModelKind::kBoF, {{"fc_hidden", "x"}}), std::invalid_argument);
  EXPECT_THROW(parse_model_kind("gru"), std::invalid_argument);
  LstmMoeConfig bad = tiny_moe();
  bad.active_experts = 5;
  EXPECT_THROW(validate(ModelConfig(bad)), std::invalid_argument);
  EXPECT_THROW(parse_key_values("no equals sign"), std::invalid_argument);
}

TEST(ModelConfiguration, BatchShapeIsChecked) {
  auto model = make_model(tiny_bof(), 37);
  Rng rng(37);
  Batch wrong = random_batch(2, 6, 5, 3, rng);
  EXPECT_THROW(predict(*model, wrong), std::invalid_argument);
}

}  // namespace
}  // namespace framecls
