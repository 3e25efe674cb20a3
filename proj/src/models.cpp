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

#include "framecls/models.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

namespace framecls {
namespace {

template <typename Fn>
void for_each_field(BoFConfig& c, Fn&& fn) {
  fn("feature_size", c.feature_size);
  fn("num_classes", c.num_classes);
  fn("max_frames", c.max_frames);
  fn("fc_hidden", c.fc_hidden);
  fn("dropout_input", c.dropout_input);
  fn("dropout_fc1", c.dropout_fc1);
}

template <typename Fn>
void for_each_field(SimpleLstmConfig& c, Fn&& fn) {
  fn("feature_size", c.feature_size);
  fn("num_classes", c.num_classes);
  fn("max_frames", c.max_frames);
  fn("num_layers", c.num_layers);
  fn("hidden_size", c.hidden_size);
  fn("residual", c.residual);
  fn("dropout", c.dropout);
}

template <typename Fn>
void for_each_field(LstmMoeConfig& c, Fn&& fn) {
  fn("feature_size", c.feature_size);
  fn("num_classes", c.num_classes);
  fn("max_frames", c.max_frames);
  fn("lstm_hidden", c.lstm_hidden);
  fn("dropout", c.dropout);
  fn("num_experts", c.num_experts);
  fn("active_experts", c.active_experts);
  fn("expert_hidden", c.expert_hidden);
  fn("w_importance", c.w_importance);
  fn("w_load", c.w_load);
}

std::string format_value(int v) { return std::to_string(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void parse_value(const std::string& key, const std::string& text, int& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("config key '" + key + "' expects an integer, got '" + text + "'");
}
void parse_value(const std::string& key, const std::string& text, bool& out) {
  if (text == "true" || text == "1") out = true;
  else if (text == "false" || text == "0") out = false;
  else throw std::invalid_argument("config key '" + key + "' expects true/false, got '" + text + "'");
}
void parse_value(const std::string& key, const std::string& text, double& out) {
  char* end = nullptr;
  out = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size())
    throw std::invalid_argument("config key '" + key + "' expects a number, got '" + text + "'");
}

template <typename Config>
KeyValues fields_to_kv(Config c) {
  KeyValues kv;
  for_each_field(c, [&](const char* key, auto& value) { kv[key] = format_value(value); });
  return kv;
}

template <typename Config>
Config fields_from_kv(const KeyValues& kv) {
  Config c;
  std::set<std::string> known;
  for_each_field(c, [&](const char* key, auto& value) {
    known.insert(key);
    if (auto it = kv.find(key); it != kv.end()) parse_value(key, it->second, value);
  });
  for (const auto& [key, _] : kv)
    if (!known.count(key)) throw std::invalid_argument("unknown model config key '" + key + "'");
  return c;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid model config: " + what);
}

void require_dropout(double p, const char* name) {
  require(p >= 0.0 && p < 1.0, std::string(name) + " must be in [0, 1)");
}

void check_finite(const Matrix& m, const std::string& name) {
  if (!m.allFinite()) throw NonFiniteError("non-finite values in " + name);
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBoF:
      return "bof";
    case ModelKind::kSimpleLstm:
      return "lstm";
    case ModelKind::kLstmMoe:
      return "lstm-moe";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "bof") return ModelKind::kBoF;
  if (text == "lstm") return ModelKind::kSimpleLstm;
  if (text == "lstm-moe") return ModelKind::kLstmMoe;
  throw std::invalid_argument("unknown model kind '" + text + "' (expected bof, lstm or lstm-moe)");
}

ModelKind kind_of(const ModelConfig& config) {
  return std::visit(
      [](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, BoFConfig>) return ModelKind::kBoF;
        else if constexpr (std::is_same_v<T, SimpleLstmConfig>) return ModelKind::kSimpleLstm;
        else return ModelKind::kLstmMoe;
      },
      config);
}

void validate(const ModelConfig& config) {
  std::visit(
      [](const auto& c) {
        require(c.feature_size >= 1, "feature_size must be positive");
        require(c.num_classes >= 1, "num_classes must be positive");
        require(c.max_frames >= 1 && c.max_frames <= kMaxRecordFrames, "max_frames must be in [1, 360]");
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, BoFConfig>) {
          require(c.fc_hidden >= 1, "fc_hidden must be positive");
          require_dropout(c.dropout_input, "dropout_input");
          require_dropout(c.dropout_fc1, "dropout_fc1");
        } else if constexpr (std::is_same_v<T, SimpleLstmConfig>) {
          require(c.num_layers >= 1, "num_layers must be >= 1");
          require(c.hidden_size >= 1, "hidden_size must be positive");
          require_dropout(c.dropout, "dropout");
        } else {
          require(c.lstm_hidden >= 1, "lstm_hidden must be positive");
          require_dropout(c.dropout, "dropout");
          require(c.num_experts >= 1, "num_experts must be >= 1");
          require(c.active_experts >= 1 && c.active_experts <= c.num_experts, "active_experts must be in [1, n]");
          require(c.expert_hidden >= 1, "expert_hidden must be positive");
          require(c.w_importance >= 0.0 && c.w_load >= 0.0, "loss weights must be >= 0");
        }
      },
      config);
}

KeyValues to_key_values(const ModelConfig& config) {
  return std::visit([](const auto& c) { return fields_to_kv(c); }, config);
}

ModelConfig model_config_from(ModelKind kind, const KeyValues& values) {
  switch (kind) {
    case ModelKind::kBoF:
      return fields_from_kv<BoFConfig>(values);
    case ModelKind::kSimpleLstm:
      return fields_from_kv<SimpleLstmConfig>(values);
    case ModelKind::kLstmMoe:
      return fields_from_kv<LstmMoeConfig>(values);
  }
  throw std::invalid_argument("unknown model kind");
}

std::string to_canonical_text(const KeyValues& values) {
  std::string out;
  for (const auto& [key, value] : values) out += key + "=" + value + "\n";
  return out;
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key=value");
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

// ---- model base ------------------------------------------------------------

void Model::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Model::check_batch(const Batch& batch, int feature_size, int max_frames) const {
  if (batch.features.features() != feature_size)
    throw std::invalid_argument("batch feature size " + std::to_string(batch.features.features()) +
                                " does not match model feature size " + std::to_string(feature_size));
  if (batch.features.steps != max_frames)
    throw std::invalid_argument("batch max_frames " + std::to_string(batch.features.steps) +
                                " does not match model max_frames " + std::to_string(max_frames));
  if (static_cast<Index>(batch.valid_len.size()) != batch.size())
    throw std::invalid_argument("batch valid_len size mismatch");
}

std::unique_ptr<Model> make_model(const ModelConfig& config, std::uint64_t init_seed) {
  validate(config);
  Rng rng(init_seed);
  return std::visit(
      [&](const auto& c) -> std::unique_ptr<Model> {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, BoFConfig>) return std::make_unique<BoFModel>(c, rng);
        else if constexpr (std::is_same_v<T, SimpleLstmConfig>) return std::make_unique<SimpleLstmModel>(c, rng);
        else return std::make_unique<LstmMoeModel>(c, rng);
      },
      config);
}

// ---- Bag-of-Frames -----------------------------------------------------------

BoFModel::BoFModel(const BoFConfig& config, Rng& rng)
    : config_(config),
      bn_input_("bn_input", config.feature_size),
      fc1_("fc1", config.feature_size, config.fc_hidden, rng, false),
      bn1_("bn1", config.fc_hidden),
      fc2_("fc2", config.fc_hidden, config.fc_hidden, rng, false),
      bn2_("bn2", config.fc_hidden),
      classifier_("classifier", config.fc_hidden, config.num_classes, rng) {
  bn_input_.collect(params_);
  fc1_.collect(params_);
  bn1_.collect(params_);
  fc2_.collect(params_);
  bn2_.collect(params_);
  classifier_.collect(params_);
  state_ = params_;
  for (BatchNorm* bn : {&bn_input_, &bn1_, &bn2_}) {
    state_.push_back(&bn->running_mean);
    state_.push_back(&bn->running_var);
  }
}

Matrix BoFModel::forward(const Batch& batch, Mode mode, Rng& rng) {
  check_batch(batch, config_.feature_size, config_.max_frames);
  batch_ = batch.size();
  steps_ = batch.features.steps;
  const std::vector<char> mask = valid_row_mask(batch_, steps_, batch.valid_len);

  Sequence x;
  x.batch = batch_;
  x.steps = steps_;
  x.data = bn_input_.forward(batch.features.data, mode, &mask);
  x.data = dropout_forward(x.data, config_.dropout_input, mode, rng, input_mask_);
  pooled_ = max_pool_time(x, batch.valid_len);

  bn1_out_ = bn1_.forward(fc1_.forward(pooled_.output), mode);
  Matrix h1 = dropout_forward(relu(bn1_out_), config_.dropout_fc1, mode, rng, fc1_mask_);
  bn2_out_ = bn2_.forward(fc2_.forward(h1), mode);
  return classifier_.forward(relu(bn2_out_));
}

void BoFModel::backward(const Matrix& d_logits) {
  Matrix d = classifier_.backward(d_logits);
  d = relu_backward(bn2_out_, d);
  d = fc2_.backward(bn2_.backward(d));
  d = relu_backward(bn1_out_, dropout_backward(d, fc1_mask_));
  d = fc1_.backward(bn1_.backward(d));
  Sequence d_seq = max_pool_time_backward(d, pooled_);
  bn_input_.backward(dropout_backward(d_seq.data, input_mask_));
}

// ---- Simple LSTM -----------------------------------------------------------

SimpleLstmModel::SimpleLstmModel(const SimpleLstmConfig& config, Rng& rng)
    : config_(config),
      bn_input_("bn_input", config.feature_size),
      stack_("lstm", config.feature_size,
             LstmStackConfig{config.num_layers, config.hidden_size, config.residual, config.dropout}, rng),
      classifier_("classifier", config.hidden_size, config.num_classes, rng) {
  bn_input_.collect(params_);
  stack_.collect(params_);
  classifier_.collect(params_);
  state_ = params_;
  state_.push_back(&bn_input_.running_mean);
  state_.push_back(&bn_input_.running_var);
}

Matrix SimpleLstmModel::forward(const Batch& batch, Mode mode, Rng& rng) {
  check_batch(batch, config_.feature_size, config_.max_frames);
  valid_len_ = batch.valid_len;
  steps_ = batch.features.steps;
  const std::vector<char> mask = valid_row_mask(batch.size(), steps_, valid_len_);

  Sequence x;
  x.batch = batch.size();
  x.steps = steps_;
  x.data = bn_input_.forward(batch.features.data, mode, &mask);
  Sequence h = stack_.forward(x, mode, rng);
  return classifier_.forward(weighted_output_sum(h, valid_len_));
}

void SimpleLstmModel::backward(const Matrix& d_logits) {
  Matrix d_agg = classifier_.backward(d_logits);
  Sequence d_h = weighted_output_sum_backward(d_agg, valid_len_, steps_);
  Sequence d_x = stack_.backward(d_h);
  bn_input_.backward(d_x.data);
}

// ---- LSTM + MoE --------------------------------------------------------------

namespace {

MoEConfig moe_config_of(const LstmMoeConfig& c) {
  MoEConfig m;
  m.num_experts = c.num_experts;
  m.k = c.active_experts;
  m.input_size = c.lstm_hidden;
  m.expert_hidden = c.expert_hidden;
  m.output_size = c.lstm_hidden;
  m.w_importance = c.w_importance;
  m.w_load = c.w_load;
  return m;
}

}  // namespace

LstmMoeModel::LstmMoeModel(const LstmMoeConfig& config, Rng& rng)
    : config_(config),
      bn_input_("bn_input", config.feature_size),
      lstm1_("lstm1", config.feature_size, config.lstm_hidden, false, config.dropout, rng),
      moe_("moe", moe_config_of(config), rng),
      lstm2_("lstm2", config.lstm_hidden, config.lstm_hidden, false, config.dropout, rng),
      classifier_("classifier", config.lstm_hidden, config.num_classes, rng) {
  bn_input_.collect(params_);
  lstm1_.collect(params_);
  moe_.collect(params_);
  lstm2_.collect(params_);
  classifier_.collect(params_);
  state_ = params_;
  state_.push_back(&bn_input_.running_mean);
  state_.push_back(&bn_input_.running_var);
}

Matrix LstmMoeModel::forward(const Batch& batch, Mode mode, Rng& rng) {
  check_batch(batch, config_.feature_size, config_.max_frames);
  valid_len_ = batch.valid_len;
  steps_ = batch.features.steps;
  const std::vector<char> mask = valid_row_mask(batch.size(), steps_, valid_len_);

  Sequence x;
  x.batch = batch.size();
  x.steps = steps_;
  x.data = bn_input_.forward(batch.features.data, mode, &mask);
  Sequence h1 = lstm1_.forward(x, mode, rng);
  Sequence m = moe_.forward_over_time(h1, valid_len_, mode, rng);
  Sequence h2 = lstm2_.forward(m, mode, rng);
  aux_ = mode == Mode::kTrain ? moe_.aux_loss() : 0.0;
  return classifier_.forward(weighted_output_sum(h2, valid_len_));
}

void LstmMoeModel::backward(const Matrix& d_logits) {
  Matrix d_agg = classifier_.backward(d_logits);
  Sequence d_h2 = weighted_output_sum_backward(d_agg, valid_len_, steps_);
  Sequence d_m = lstm2_.backward(d_h2);
  Sequence d_h1 = moe_.backward_over_time(d_m);
  Sequence d_x = lstm1_.backward(d_h1);
  bn_input_.backward(d_x.data);
}

// ---- training ----------------------------------------------------------------

StepResult train_step(Model& model, const Batch& batch, TrainState& state, const PenaltyWeights* penalty) {
  model.zero_grad();
  Matrix logits = model.forward(batch, Mode::kTrain, state.rng);
  check_finite(logits, "logits");

  LossResult ce = sigmoid_cross_entropy(logits, batch.labels, penalty);
  StepResult result;
  result.classification_loss = ce.loss;
  result.aux_loss = model.aux_loss();
  result.loss = ce.loss + result.aux_loss;
  if (!std::isfinite(result.loss)) throw NonFiniteError("non-finite values in loss");

  model.backward(ce.grad);
  for (const Parameter* p : model.parameters()) check_finite(p->grad, p->name + ".grad");

  rmsprop_step(model.parameters(), state.optimizer, state.samples_seen);
  for (const Parameter* p : model.parameters()) check_finite(p->value, p->name);
  state.samples_seen += static_cast<std::uint64_t>(batch.size());
  ++state.step;
  return result;
}

Matrix predict(Model& model, const Batch& batch) {
  Rng unused(0);
  Matrix logits = model.forward(batch, Mode::kInfer, unused);
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  Matrix probabilities = sigmoid(logits);
  return probabilities.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace framecls
