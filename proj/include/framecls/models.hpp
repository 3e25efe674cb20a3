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
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>

#include "framecls/dataio.hpp"
#include "framecls/lstm.hpp"
#include "framecls/moe.hpp"
#include "framecls/nn.hpp"

namespace framecls {

enum class ModelKind { kBoF, kSimpleLstm, kLstmMoe };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Frame max-pooling followed by two FC blocks and a classifier.
struct BoFConfig {
  int feature_size = kDefaultFeatureSize;
  int num_classes = 4716;
  int max_frames = 90;
  int fc_hidden = 4096;
  double dropout_input = 0.3;
  double dropout_fc1 = 0.3;
};

/// Stacked LSTM with time-weighted output aggregation.
struct SimpleLstmConfig {
  int feature_size = kDefaultFeatureSize;
  int num_classes = 4716;
  int max_frames = 90;
  int num_layers = 2;
  int hidden_size = 1024;
  bool residual = false;
  double dropout = 0.4;
};

/// LSTM -> per-step mixture of experts -> LSTM.
struct LstmMoeConfig {
  int feature_size = kDefaultFeatureSize;
  int num_classes = 4716;
  int max_frames = 90;
  int lstm_hidden = 512;
  double dropout = 0.4;
  int num_experts = 64;
  int active_experts = 4;
  int expert_hidden = 1024;
  double w_importance = 0.1;
  double w_load = 0.1;
};

using ModelConfig = std::variant<BoFConfig, SimpleLstmConfig, LstmMoeConfig>;
using KeyValues = std::map<std::string, std::string>;

ModelKind kind_of(const ModelConfig& config);
void validate(const ModelConfig& config);
KeyValues to_key_values(const ModelConfig& config);
ModelConfig model_config_from(ModelKind kind, const KeyValues& values);
/// Canonical "key=value" lines, sorted by key.
std::string to_canonical_text(const KeyValues& values);
KeyValues parse_key_values(const std::string& text);

class Model {
 public:
  virtual ~Model() = default;

  virtual ModelKind kind() const = 0;
  virtual ModelConfig config() const = 0;
  /// Returns logits [batch, num_classes]. Caches what backward needs.
  virtual Matrix forward(const Batch& batch, Mode mode, Rng& rng) = 0;
  /// Backpropagates dL/dlogits (plus auxiliary losses) into parameter gradients.
  virtual void backward(const Matrix& d_logits) = 0;
  /// Auxiliary loss added to the classification loss by the last train-mode forward.
  virtual double aux_loss() const { return 0.0; }

  const ParameterList& parameters() const { return params_; }
  /// Parameters followed by non-trainable buffers, in a fixed order.
  const ParameterList& state_tensors() const { return state_; }
  void zero_grad();

 protected:
  void check_batch(const Batch& batch, int feature_size, int max_frames) const;

  ParameterList params_;
  ParameterList state_;
};

std::unique_ptr<Model> make_model(const ModelConfig& config, std::uint64_t init_seed);

class BoFModel final : public Model {
 public:
  BoFModel(const BoFConfig& config, Rng& rng);
  ModelKind kind() const override { return ModelKind::kBoF; }
  ModelConfig config() const override { return config_; }
  Matrix forward(const Batch& batch, Mode mode, Rng& rng) override;
  void backward(const Matrix& d_logits) override;

 private:
  BoFConfig config_;
  BatchNorm bn_input_;
  Linear fc1_;
  BatchNorm bn1_;
  Linear fc2_;
  BatchNorm bn2_;
  Linear classifier_;

  Index batch_ = 0;
  Index steps_ = 0;
  Matrix input_mask_;
  MaxPoolResult pooled_;
  Matrix bn1_out_;
  Matrix fc1_mask_;
  Matrix bn2_out_;
};

class SimpleLstmModel final : public Model {
 public:
  SimpleLstmModel(const SimpleLstmConfig& config, Rng& rng);
  ModelKind kind() const override { return ModelKind::kSimpleLstm; }
  ModelConfig config() const override { return config_; }
  Matrix forward(const Batch& batch, Mode mode, Rng& rng) override;
  void backward(const Matrix& d_logits) override;

  LstmStack& stack() { return stack_; }

 private:
  SimpleLstmConfig config_;
  BatchNorm bn_input_;
  LstmStack stack_;
  Linear classifier_;
  std::vector<Index> valid_len_;
  Index steps_ = 0;
};

class LstmMoeModel final : public Model {
 public:
  LstmMoeModel(const LstmMoeConfig& config, Rng& rng);
  ModelKind kind() const override { return ModelKind::kLstmMoe; }
  ModelConfig config() const override { return config_; }
  Matrix forward(const Batch& batch, Mode mode, Rng& rng) override;
  void backward(const Matrix& d_logits) override;
  double aux_loss() const override { return aux_; }

  MoeLayer& moe() { return moe_; }

 private:
  LstmMoeConfig config_;
  BatchNorm bn_input_;
  LstmLayer lstm1_;
  MoeLayer moe_;
  LstmLayer lstm2_;
  Linear classifier_;
  std::vector<Index> valid_len_;
  Index steps_ = 0;
  double aux_ = 0.0;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimizer state plus the counters and randomness a training run carries forward.
struct TrainState {
  OptimizerState optimizer;
  std::uint64_t samples_seen = 0;
  std::uint64_t step = 0;
  Rng rng;
};

struct StepResult {
  double loss = 0.0;  // classification + auxiliary
  double classification_loss = 0.0;
  double aux_loss = 0.0;
};

/// zero grads -> forward -> sigmoid CE (+ penalty, + aux) -> backward -> RMSProp.
/// Throws NonFiniteError naming the first non-finite tensor.
StepResult train_step(Model& model, const Batch& batch, TrainState& state, const PenaltyWeights* penalty = nullptr);

/// Infer-mode probabilities, strictly inside (0, 1).
Matrix predict(Model& model, const Batch& batch);

}  // namespace framecls
