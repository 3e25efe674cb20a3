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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "framecls/dataio.hpp"
#include "framecls/experiment.hpp"
#include "framecls/metrics.hpp"
#include "framecls/models.hpp"

namespace framecls {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitRuntime = 2,
  kExitVerification = 3,
};

/// Serves the batch for any global step: step s uses batch s % B of epoch s / B, where
/// every epoch is reshuffled from (seed, epoch). Resuming at step s replays the same data.
class EpochBatcher {
 public:
  EpochBatcher(const Dataset& dataset, const BatchOptions& options, std::uint64_t seed);

  const Batch& batch_for_step(std::uint64_t step);
  std::size_t batches_per_epoch() const { return batches_per_epoch_; }

 private:
  const Dataset& dataset_;
  BatchOptions options_;
  std::uint64_t seed_;
  std::size_t batches_per_epoch_ = 0;
  std::uint64_t loaded_epoch_ = ~std::uint64_t{0};
  std::vector<Batch> batches_;
};

/// Infer-mode scores for every record, in dataset order.
PredictionSet predict_dataset(Model& model, const Dataset& dataset, const BatchOptions& options);

struct GenDataOptions {
  SyntheticSpec spec;
  double validate_fraction = 0.1;
  double test_fraction = 0.1;
  std::filesystem::path out_dir = "data";
};

int cmd_gen_data(const GenDataOptions& options, std::ostream& out, std::ostream& err);

/// Trains per `config`, writing config.txt, train_log.txt, timing.log and checkpoint.fgck
/// into config.out_dir. Model feature_size/num_classes are taken from the training data.
int cmd_train(ExperimentConfig config, const std::optional<std::filesystem::path>& resume, std::ostream& out,
              std::ostream& err);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::filesystem::path out_dir = "eval";
  std::optional<std::filesystem::path> from_predictions;
  int skip_frames = 20;
  int batch_size = 64;
  int top_n = 20;
};

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);

struct GradcheckCommandOptions {
  std::string model = "all";
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  // Negates the named parameter's gradient after backward; exercises failure reporting.
  std::string inject_sign_bug;
};

int cmd_gradcheck(const GradcheckCommandOptions& options, std::ostream& out, std::ostream& err);

int cmd_stats(const std::filesystem::path& data, std::ostream& out, std::ostream& err);

/// Full command-line entry point (gen-data, train, eval, gradcheck, stats).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Miniature model configurations used by the gradient-check command and suites.
ModelConfig miniature_config(ModelKind kind);
Batch miniature_batch(const ModelConfig& config, std::uint64_t seed);
/// Builds the model and adds U(-jitter, jitter) to every trainable parameter, moving it
/// off initialization points such as zero biases where ReLU kinks sit.
/// Finite-difference step for end-to-end checks. BoF uses a larger step: its input BN
/// shift has an (almost always) exactly zero gradient, so the check measures pure roundoff.
double gradcheck_step(ModelKind kind);
std::unique_ptr<Model> miniature_model(const ModelConfig& config, std::uint64_t seed, double jitter = 0.1);

}  // namespace framecls
