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

#include <filesystem>
#include <memory>
#include <stdexcept>

#include "framecls/models.hpp"

namespace framecls {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// FGCK layout (little-endian):
///   "FGCK" | u32 version | u16 len + kind tag | u32 len + canonical config text
///   | u32 tensor count | per tensor: u16 len + name, u32 rows, u32 cols, f64 data
///   | optimizer: f64 decay, f64 epsilon, f64 base_lr, u64 decay_every, f64 decay_factor,
///     u32 count, per accumulator: u32 rows, u32 cols, f64 data
///   | u64 samples_seen | u64 step | u32 len + rng state text
void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainState& state);

struct Checkpoint {
  ModelConfig config;
  std::unique_ptr<Model> model;
  TrainState state;
};

/// Rebuilds the model recorded in the file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Restores into an existing model; its kind and config must match the file.
void restore_checkpoint(const std::filesystem::path& path, Model& model, TrainState& state);

}  // namespace framecls
