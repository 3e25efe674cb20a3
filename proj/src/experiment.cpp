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

#include "framecls/experiment.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace framecls {
namespace {

const std::string kModelPrefix = "model.";

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("config key '" + key + "' expects an integer, got '" + text + "'");
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  char* end = nullptr;
  double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size())
    throw std::invalid_argument("config key '" + key + "' expects a number, got '" + text + "'");
  return v;
}

}  // namespace

std::string to_string(PenaltyMode mode) { return mode == PenaltyMode::kNone ? "none" : "inverse-frequency"; }

PenaltyMode parse_penalty_mode(const std::string& text) {
  if (text == "none") return PenaltyMode::kNone;
  if (text == "inverse-frequency") return PenaltyMode::kInverseFrequency;
  throw std::invalid_argument("unknown penalty '" + text + "' (expected none or inverse-frequency)");
}

ModelConfig default_model_config(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBoF:
      return BoFConfig{};
    case ModelKind::kSimpleLstm:
      return SimpleLstmConfig{};
    case ModelKind::kLstmMoe:
      return LstmMoeConfig{};
  }
  throw std::invalid_argument("unknown model kind");
}

void validate(const ExperimentConfig& config) {
  validate(config.model);
  validate(config.optimizer);
  if (config.steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (config.batch_size < 2) throw std::invalid_argument("batch_size must be >= 2 (batch norm needs two rows)");
  if (config.eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (config.skip_frames < 0) throw std::invalid_argument("skip_frames must be >= 0");
  if (config.top_n < 1) throw std::invalid_argument("top_n must be >= 1");
  if (!(config.penalty_cap >= 1.0)) throw std::invalid_argument("penalty_cap must be >= 1");
  if (config.out_dir.empty()) throw std::invalid_argument("out_dir must not be empty");
}

KeyValues to_key_values(const ExperimentConfig& config) {
  KeyValues kv;
  kv["model"] = to_string(kind_of(config.model));
  for (const auto& [key, value] : to_key_values(config.model)) kv[kModelPrefix + key] = value;
  kv["data_dir"] = config.data_dir;
  kv["out_dir"] = config.out_dir;
  kv["seed"] = std::to_string(config.seed);
  kv["steps"] = std::to_string(config.steps);
  kv["batch_size"] = std::to_string(config.batch_size);
  kv["eval_every"] = std::to_string(config.eval_every);
  kv["skip_frames"] = std::to_string(config.skip_frames);
  kv["top_n"] = std::to_string(config.top_n);
  kv["rmsprop_decay"] = fmt(config.optimizer.decay_rate);
  kv["rmsprop_epsilon"] = fmt(config.optimizer.epsilon);
  kv["lr"] = fmt(config.optimizer.base_lr);
  kv["lr_decay_every_samples"] = std::to_string(config.optimizer.lr_decay_every_samples);
  kv["lr_decay_factor"] = fmt(config.optimizer.lr_decay_factor);
  kv["penalty"] = to_string(config.penalty);
  kv["penalty_cap"] = fmt(config.penalty_cap);
  return kv;
}

void apply_overrides(ExperimentConfig& config, const KeyValues& values) {
  if (auto it = values.find("model"); it != values.end()) {
    ModelKind kind = parse_model_kind(it->second);
    if (kind != kind_of(config.model)) config.model = default_model_config(kind);
  }
  KeyValues model_kv = to_key_values(config.model);
  bool model_changed = false;
  for (const auto& [key, value] : values) {
    if (key == "model") continue;
    if (key.rfind(kModelPrefix, 0) == 0) {
      model_kv[key.substr(kModelPrefix.size())] = value;
      model_changed = true;
    } else if (key == "data_dir") {
      config.data_dir = value;
    } else if (key == "out_dir") {
      config.out_dir = value;
    } else if (key == "seed") {
      config.seed = parse_integer<std::uint64_t>(key, value);
    } else if (key == "steps") {
      config.steps = parse_integer<int>(key, value);
    } else if (key == "batch_size") {
      config.batch_size = parse_integer<int>(key, value);
    } else if (key == "eval_every") {
      config.eval_every = parse_integer<int>(key, value);
    } else if (key == "skip_frames") {
      config.skip_frames = parse_integer<int>(key, value);
    } else if (key == "top_n") {
      config.top_n = parse_integer<int>(key, value);
    } else if (key == "rmsprop_decay") {
      config.optimizer.decay_rate = parse_real(key, value);
    } else if (key == "rmsprop_epsilon") {
      config.optimizer.epsilon = parse_real(key, value);
    } else if (key == "lr") {
      config.optimizer.base_lr = parse_real(key, value);
    } else if (key == "lr_decay_every_samples") {
      config.optimizer.lr_decay_every_samples = parse_integer<std::uint64_t>(key, value);
    } else if (key == "lr_decay_factor") {
      config.optimizer.lr_decay_factor = parse_real(key, value);
    } else if (key == "penalty") {
      config.penalty = parse_penalty_mode(value);
    } else if (key == "penalty_cap") {
      config.penalty_cap = parse_real(key, value);
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  if (model_changed) config.model = model_config_from(kind_of(config.model), model_kv);
}

ExperimentConfig experiment_from(const KeyValues& values) {
  ExperimentConfig config;
  apply_overrides(config, values);
  return config;
}

}  // namespace framecls
