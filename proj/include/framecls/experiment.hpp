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

#include "framecls/models.hpp"
#include "framecls/nn.hpp"

namespace framecls {

enum class PenaltyMode { kNone, kInverseFrequency };

/// Everything a training run depends on. Serialized as sorted key=value lines; model
/// fields are prefixed with "model.".
struct ExperimentConfig {
  ModelConfig model = SimpleLstmConfig{};
  std::string data_dir = "data";
  std::string out_dir = "run";
  std::uint64_t seed = 0;
  int steps = 1000;
  int batch_size = 32;
  int eval_every = 100;
  int skip_frames = 20;
  int top_n = 20;
  RmsPropConfig optimizer;
  PenaltyMode penalty = PenaltyMode::kNone;
  double penalty_cap = 100.0;
};

void validate(const ExperimentConfig& config);
KeyValues to_key_values(const ExperimentConfig& config);
/// Starts from defaults (with the model kind given by "model") and applies every key.
ExperimentConfig experiment_from(const KeyValues& values);
/// Applies `values` on top of an existing config; model keys must match its kind.
void apply_overrides(ExperimentConfig& config, const KeyValues& values);

std::string to_string(PenaltyMode mode);
PenaltyMode parse_penalty_mode(const std::string& text);

/// Full-scale defaults for each architecture.
ModelConfig default_model_config(ModelKind kind);

}  // namespace framecls
