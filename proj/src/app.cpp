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

#include "framecls/app.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>

#include "framecls/checkpoint.hpp"

namespace framecls {
namespace {

std::string printf_string(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

std::uint64_t epoch_seed(std::uint64_t seed, std::uint64_t epoch) {
  return seed ^ (0x9E3779B97F4A7C15ULL * (epoch + 1));
}

int max_frames_of(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.max_frames; }, config);
}

void set_data_dims(ModelConfig& config, int feature_size, int num_classes) {
  std::visit(
      [&](auto& c) {
        c.feature_size = feature_size;
        c.num_classes = num_classes;
      },
      config);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---- batching / prediction helpers -----------------------------------------------

EpochBatcher::EpochBatcher(const Dataset& dataset, const BatchOptions& options, std::uint64_t seed)
    : dataset_(dataset), options_(options), seed_(seed) {
  if (options.batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  const std::size_t n = dataset.records.size();
  const std::size_t bs = static_cast<std::size_t>(options.batch_size);
  batches_per_epoch_ = options.drop_remainder ? n / bs : (n + bs - 1) / bs;
  if (batches_per_epoch_ == 0) throw std::invalid_argument("dataset too small for one batch");
}

const Batch& EpochBatcher::batch_for_step(std::uint64_t step) {
  const std::uint64_t epoch = step / batches_per_epoch_;
  if (epoch != loaded_epoch_) {
    batches_ = make_batches(dataset_, options_, epoch_seed(seed_, epoch));
    loaded_epoch_ = epoch;
  }
  return batches_[step % batches_per_epoch_];
}

PredictionSet predict_dataset(Model& model, const Dataset& dataset, const BatchOptions& options) {
  BatchOptions opts = options;
  opts.drop_remainder = false;
  PredictionSet set;
  set.reserve(dataset.records.size());
  std::size_t next = 0;
  for (const Batch& batch : make_batches(dataset, opts)) {
    Matrix probs = predict(model, batch);
    for (Index b = 0; b < batch.size(); ++b, ++next) {
      Prediction p;
      p.video_id = batch.video_ids[b];
      p.scores = probs.row(b).transpose();
      p.labels = dataset.records[next].labels;
      set.push_back(std::move(p));
    }
  }
  return set;
}

// ---- gen-data ------------------------------------------------------------------

int cmd_gen_data(const GenDataOptions& options, std::ostream& out, std::ostream& err) {
  Dataset all;
  try {
    if (options.validate_fraction < 0 || options.test_fraction < 0 ||
        options.validate_fraction + options.test_fraction > 1.0)
      throw std::invalid_argument("split fractions must be >= 0 and sum to at most 1");
    all = generate_synthetic(options.spec);
  } catch (const std::invalid_argument& e) {
    err << "gen-data: " << e.what() << '\n';
    return kExitUsage;
  }
  if (options.spec.num_videos == 0) err << "warning: --videos 0 produces empty datasets\n";

  try {
    const std::size_t n = all.records.size();
    const auto n_val = static_cast<std::size_t>(std::llround(options.validate_fraction * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::llround(options.test_fraction * static_cast<double>(n)));
    const std::size_t n_train = n - std::min(n, n_val + n_test);

    auto slice = [&](std::size_t begin, std::size_t end) {
      Dataset d;
      d.num_classes = all.num_classes;
      d.feature_size = all.feature_size;
      d.records.assign(all.records.begin() + begin, all.records.begin() + end);
      return d;
    };
    std::filesystem::create_directories(options.out_dir);
    Dataset train = slice(0, n_train);
    Dataset valid = slice(n_train, std::min(n, n_train + n_val));
    Dataset test = slice(std::min(n, n_train + n_val), n);
    const std::pair<const char*, const Dataset*> splits[] = {
        {"train.fgr", &train}, {"validate.fgr", &valid}, {"test.fgr", &test}};
    for (const auto& [name, ds] : splits) {
      write_records(*ds, options.out_dir / name);
      out << "wrote " << ds->records.size() << " records to " << (options.out_dir / name).string() << '\n';
    }
    cmd_stats(options.out_dir / "train.fgr", out, err);
  } catch (const std::exception& e) {
    err << "gen-data: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

// ---- stats -----------------------------------------------------------------------

int cmd_stats(const std::filesystem::path& data, std::ostream& out, std::ostream& err) {
  Dataset ds;
  try {
    ds = read_records(data);
  } catch (const std::exception& e) {
    err << "stats: " << e.what() << '\n';
    return kExitRuntime;
  }
  LabelStats stats = label_stats(ds.records, ds.num_classes);
  out << "# records=" << ds.records.size() << " classes=" << ds.num_classes << " label_occurrences=" << stats.total
      << '\n';
  const double ratio = stats.max_min_ratio();
  out << "# max_min_ratio=" << (std::isinf(ratio) ? std::string("inf") : printf_string("%.6g", ratio)) << '\n';
  out << "rank\tclass\tcount\tpercent\tcoverage_percent\n";
  if (stats.total == 0) return kExitOk;

  std::vector<int> order(static_cast<std::size_t>(ds.num_classes));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return stats.counts[a] > stats.counts[b]; });
  for (std::size_t r = 0; r < order.size(); ++r) {
    const int c = order[r];
    out << printf_string("%zu\t%d\t%lld\t%.4f\t%.4f\n", r + 1, c, static_cast<long long>(stats.counts[c]),
                         stats.percentages[c], 100.0 * stats.cumulative_coverage[r]);
  }
  return kExitOk;
}

// ---- train -----------------------------------------------------------------------

int cmd_train(ExperimentConfig config, const std::optional<std::filesystem::path>& resume, std::ostream& out,
              std::ostream& err) {
  Dataset train;
  Dataset valid;
  try {
    validate(config);
  } catch (const std::invalid_argument& e) {
    err << "train: invalid config: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    const std::filesystem::path data_dir = config.data_dir;
    train = read_records(data_dir / "train.fgr");
    if (std::filesystem::exists(data_dir / "validate.fgr")) valid = read_records(data_dir / "validate.fgr");
    set_data_dims(config.model, train.feature_size, train.num_classes);
    validate(config);
    if (train.records.size() < 2) throw std::invalid_argument("training split needs at least 2 records");
  } catch (const std::invalid_argument& e) {
    err << "train: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return kExitRuntime;
  }

  try {
    const std::filesystem::path out_dir = config.out_dir;
    std::filesystem::create_directories(out_dir);
    {
      std::ofstream cfg(out_dir / "config.txt", std::ios::trunc);
      cfg << to_canonical_text(to_key_values(config));
    }

    std::unique_ptr<Model> model = make_model(config.model, config.seed);
    TrainState state;
    state.optimizer.config = config.optimizer;
    state.rng.seed(config.seed ^ 0xD1B54A32D192ED03ULL);
    if (resume) restore_checkpoint(*resume, *model, state);

    std::ofstream log(out_dir / "train_log.txt", std::ios::trunc);
    std::ofstream timing(out_dir / "timing.log", std::ios::trunc);
    auto emit = [&](const std::string& line) {
      log << line << '\n';
      out << line << '\n';
    };

    std::optional<PenaltyWeights> penalty;
    if (config.penalty == PenaltyMode::kInverseFrequency) {
      LabelStats stats = label_stats(train.records, train.num_classes);
      penalty = penalty_from_counts(stats.counts, config.penalty_cap);
      emit(printf_string("penalty=inverse-frequency cap=%.6g c_min=%.6g c_max=%.6g c_mean=%.6g", config.penalty_cap,
                         penalty->weights.minCoeff(), penalty->weights.maxCoeff(), penalty->weights.mean()));
    }

    BatchOptions options;
    options.max_frames = max_frames_of(config.model);
    options.skip_frames = config.skip_frames;
    options.batch_size = config.batch_size;
    options.drop_remainder = train.records.size() >= static_cast<std::size_t>(config.batch_size);
    EpochBatcher batcher(train, options, config.seed);

    const auto start = std::chrono::steady_clock::now();
    while (state.step < static_cast<std::uint64_t>(config.steps)) {
      const Batch& batch = batcher.batch_for_step(state.step);
      const double lr = state.optimizer.learning_rate(state.samples_seen);
      StepResult r = train_step(*model, batch, state, penalty ? &*penalty : nullptr);
      if (state.step % static_cast<std::uint64_t>(config.eval_every) != 0 &&
          state.step != static_cast<std::uint64_t>(config.steps))
        continue;

      std::string line = printf_string("step=%llu samples=%llu loss=%.6f aux_loss=%.6f lr=%.6g",
                                       static_cast<unsigned long long>(state.step),
                                       static_cast<unsigned long long>(state.samples_seen), r.loss, r.aux_loss, lr);
      if (!valid.records.empty()) {
        PredictionSet preds = predict_dataset(*model, valid, options);
        line += printf_string(" hit_at_1=%.6f gap=%.6f", hit_at_1(preds), gap(preds, config.top_n));
      }
      emit(line);
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
      timing << "step=" << state.step << " wall_ms=" << ms.count() << '\n';
    }
    save_checkpoint(out_dir / "checkpoint.fgck", *model, state);
    out << "checkpoint=" << (out_dir / "checkpoint.fgck").string() << '\n';
  } catch (const NonFiniteError& e) {
    err << "train: aborted: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------------

namespace {

void print_result(std::ostream& out, const EvalResult& r) {
  out << printf_string("hit_at_1=%.9f gap=%.9f n_samples=%zu\n", r.hit_at_1, r.gap, r.n_samples);
}

}  // namespace

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err) {
  try {
    Dataset ds = read_records(options.data);
    if (options.from_predictions) {
      std::ifstream in(*options.from_predictions);
      if (!in) throw std::runtime_error("cannot open " + options.from_predictions->string());
      PredictionSet preds = read_predictions(in, ds.num_classes);
      std::unordered_map<std::string, const FrameRecord*> by_id;
      for (const FrameRecord& r : ds.records) by_id[r.video_id] = &r;
      for (Prediction& p : preds) {
        auto it = by_id.find(p.video_id);
        if (it == by_id.end()) throw std::runtime_error("prediction for unknown video '" + p.video_id + "'");
        p.labels = it->second->labels;
      }
      print_result(out, evaluate(preds, ds.num_classes, options.top_n));
      return kExitOk;
    }

    Checkpoint ck = load_checkpoint(options.checkpoint);
    KeyValues kv = to_key_values(ck.config);
    if (std::stoi(kv.at("feature_size")) != ds.feature_size || std::stoi(kv.at("num_classes")) != ds.num_classes)
      throw std::runtime_error("dataset dimensions do not match the checkpoint's model");

    BatchOptions batching;
    batching.max_frames = max_frames_of(ck.config);
    batching.skip_frames = options.skip_frames;
    batching.batch_size = options.batch_size;
    PredictionSet preds = predict_dataset(*ck.model, ds, batching);
    // Scores are scored exactly as they are exported.
    for (Prediction& p : preds) p.scores = quantize_scores(p.scores);
    EvalResult result = evaluate(preds, ds.num_classes, options.top_n);
    print_result(out, result);

    std::filesystem::create_directories(options.out_dir);
    std::ofstream pred_out(options.out_dir / "predictions.txt", std::ios::trunc);
    write_predictions(pred_out, preds);
    std::ofstream report(options.out_dir / "per_class_report.txt", std::ios::trunc);
    report << "class\tpositives\ttop1_frequency\taverage_precision\n";
    for (int c = 0; c < ds.num_classes; ++c) {
      const auto& ap = result.per_class.average_precision[c];
      report << c << '\t' << result.per_class.positives[c] << '\t'
             << printf_string("%.6f", result.per_class.top1_frequency[c]) << '\t'
             << (ap ? printf_string("%.6f", *ap) : std::string("-")) << '\n';
    }
  } catch (const CheckpointMismatch& e) {
    err << "eval: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

// ---- gradcheck ---------------------------------------------------------------------

ModelConfig miniature_config(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBoF: {
      BoFConfig c;
      c.feature_size = 5;
      c.num_classes = 3;
      c.max_frames = 8;
      c.fc_hidden = 6;
      return c;
    }
    case ModelKind::kSimpleLstm: {
      SimpleLstmConfig c;
      c.feature_size = 5;
      c.num_classes = 3;
      c.max_frames = 8;
      c.num_layers = 2;
      c.hidden_size = 8;
      c.residual = true;
      return c;
    }
    case ModelKind::kLstmMoe: {
      LstmMoeConfig c;
      c.feature_size = 5;
      c.num_classes = 3;
      c.max_frames = 8;
      c.lstm_hidden = 4;
      c.num_experts = 4;
      c.active_experts = 2;
      c.expert_hidden = 5;
      return c;
    }
  }
  throw std::invalid_argument("unknown model kind");
}

Batch miniature_batch(const ModelConfig& config, std::uint64_t seed) {
  const KeyValues kv = to_key_values(config);
  const int features = std::stoi(kv.at("feature_size"));
  const int classes = std::stoi(kv.at("num_classes"));
  const int steps = std::stoi(kv.at("max_frames"));
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> length(1, steps);

  Batch batch;
  const Index b_size = 4;
  batch.features = Sequence(b_size, steps, features);
  batch.labels = Matrix::Zero(b_size, classes);
  for (Index b = 0; b < b_size; ++b) {
    batch.valid_len.push_back(b == 0 ? steps : length(rng));
    batch.video_ids.push_back("mini" + std::to_string(b));
    for (Index t = 0; t < batch.valid_len[b]; ++t)
      for (Index f = 0; f < features; ++f) batch.features.at(b, t)(f) = normal(rng);
    batch.labels(b, static_cast<Index>(b % classes)) = 1.0;
    if (b % 2 == 1) batch.labels(b, classes - 1) = 1.0;
  }
  return batch;
}

double gradcheck_step(ModelKind kind) { return kind == ModelKind::kBoF ? 1e-4 : 1e-5; }

std::unique_ptr<Model> miniature_model(const ModelConfig& config, std::uint64_t seed, double jitter) {
  std::unique_ptr<Model> model = make_model(config, seed);
  Rng rng(seed ^ 0xA0761D6478BD642FULL);
  for (Parameter* p : model->parameters()) p->value += uniform_matrix(p->value.rows(), p->value.cols(), jitter, rng);
  return model;
}

int cmd_gradcheck(const GradcheckCommandOptions& options, std::ostream& out, std::ostream& err) {
  std::vector<ModelKind> kinds;
  try {
    if (options.model == "all") kinds = {ModelKind::kBoF, ModelKind::kSimpleLstm, ModelKind::kLstmMoe};
    else kinds = {parse_model_kind(options.model)};
    if (!(options.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  } catch (const std::invalid_argument& e) {
    err << "gradcheck: " << e.what() << '\n';
    return kExitUsage;
  }

  bool all_passed = true;
  for (ModelKind kind : kinds) {
    const ModelConfig config = miniature_config(kind);
    std::unique_ptr<Model> model = miniature_model(config, options.seed);
    const Batch batch = miniature_batch(config, options.seed + 1);
    PenaltyWeights penalty;
    penalty.weights = RowVector::LinSpaced(batch.labels.cols(), 1.0, 4.0);

    Parameter* injected = nullptr;
    for (Parameter* p : model->parameters())
      if (p->name == options.inject_sign_bug) injected = p;

    auto loss_fn = [&]() {
      Rng rng(options.seed + 2);
      Matrix logits = model->forward(batch, Mode::kTrain, rng);
      LossResult ce = sigmoid_cross_entropy(logits, batch.labels, &penalty);
      model->backward(ce.grad);
      if (injected) injected->grad = -injected->grad;
      return ce.loss_extended + model->aux_loss();
    };
    GradCheckOptions gc;
    gc.step = gradcheck_step(kind);
    gc.tolerance = options.tolerance;
    GradCheckReport report = grad_check(loss_fn, model->parameters(), gc);

    out << printf_string("model=%s status=%s max_rel_err=%.3e params=%zu\n", to_string(kind).c_str(),
                         report.passed() ? "pass" : "FAIL", report.max_rel_error(), report.params.size());
    for (const ParamCheck& p : report.params)
      if (!p.passed)
        out << printf_string("  failed parameter=%s max_rel_err=%.3e worst_index=%lld analytic=%.9g numeric=%.9g\n",
                             p.name.c_str(), p.max_rel_error, static_cast<long long>(p.worst_index), p.worst_analytic,
                             p.worst_numeric);
    all_passed = all_passed && report.passed();
  }
  return all_passed ? kExitOk : kExitVerification;
}

// ---- command line -------------------------------------------------------------------

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"framecls: multi-label frame-sequence classification toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");
  app.add_option("--config", config_path, "key=value config file (flags override it)");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");

  // gen-data
  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic train/validate/test corpus");
  gen_cmd->add_option("--classes", gen.spec.num_classes, "Number of classes")->capture_default_str();
  gen_cmd->add_option("--videos", gen.spec.num_videos, "Number of videos")->capture_default_str();
  gen_cmd->add_option("--min-frames", gen.spec.min_frames)->capture_default_str();
  gen_cmd->add_option("--max-frames", gen.spec.max_frames)->capture_default_str();
  gen_cmd->add_option("--feature-size", gen.spec.feature_size)->capture_default_str();
  gen_cmd->add_option("--min-labels", gen.spec.min_labels_per_video)->capture_default_str();
  gen_cmd->add_option("--max-labels", gen.spec.max_labels_per_video)->capture_default_str();
  gen_cmd->add_option("--imbalance-exponent", gen.spec.class_frequency_exponent, "Class frequency ~ (c+1)^-x")
      ->capture_default_str();
  gen_cmd->add_option("--noise", gen.spec.noise_std, "Frame noise standard deviation")->capture_default_str();
  gen_cmd->add_option("--validate-fraction", gen.validate_fraction)->capture_default_str();
  gen_cmd->add_option("--test-fraction", gen.test_fraction)->capture_default_str();

  // train
  std::map<std::string, std::string> train_flags;
  std::string resume;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  auto flag = [&](CLI::App* cmd, const std::string& name, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        name, [&train_flags, key](const std::string& v) { train_flags[key] = v; }, help);
  };
  flag(train_cmd, "--data", "data_dir", "Directory holding train.fgr / validate.fgr");
  flag(train_cmd, "--model", "model", "bof | lstm | lstm-moe");
  flag(train_cmd, "--steps", "steps", "Training steps");
  flag(train_cmd, "--batch-size", "batch_size", "Batch size");
  flag(train_cmd, "--eval-every", "eval_every", "Evaluate on validate.fgr every N steps");
  flag(train_cmd, "--skip-frames", "skip_frames", "Leading frames dropped per video");
  flag(train_cmd, "--top-n", "top_n", "Predictions per video pooled by GAP");
  flag(train_cmd, "--lr", "lr", "Base learning rate");
  flag(train_cmd, "--lr-decay-every", "lr_decay_every_samples", "Decay the learning rate every N samples");
  flag(train_cmd, "--lr-decay-factor", "lr_decay_factor", "Step decay factor");
  flag(train_cmd, "--penalty", "penalty", "none | inverse-frequency");
  flag(train_cmd, "--penalty-cap", "penalty_cap", "Upper bound on per-class penalty");
  flag(train_cmd, "--max-frames", "@max_frames", "Frames per sample after skipping");
  flag(train_cmd, "--hidden", "@hidden", "Hidden width (FC for bof, LSTM otherwise)");
  flag(train_cmd, "--layers", "@num_layers", "LSTM layers (lstm)");
  flag(train_cmd, "--residual", "@residual", "Residual connections (lstm): true/false");
  flag(train_cmd, "--dropout", "@dropout", "Dropout probability");
  flag(train_cmd, "--experts", "@num_experts", "Number of experts (lstm-moe)");
  flag(train_cmd, "--active-experts", "@active_experts", "Experts per sample (lstm-moe)");
  flag(train_cmd, "--expert-hidden", "@expert_hidden", "Expert hidden width (lstm-moe)");
  flag(train_cmd, "--w-importance", "@w_importance", "Importance loss weight (lstm-moe)");
  flag(train_cmd, "--w-load", "@w_load", "Load loss weight (lstm-moe)");
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from");

  // eval
  EvalOptions eval;
  std::string eval_checkpoint, eval_data, eval_predictions;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint (or a predictions file) on a dataset");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file");
  eval_cmd->add_option("--data", eval_data, "Dataset file (.fgr)")->required();
  eval_cmd->add_option("--from-predictions", eval_predictions, "Re-score an exported predictions file");
  eval_cmd->add_option("--skip-frames", eval.skip_frames)->capture_default_str();
  eval_cmd->add_option("--batch-size", eval.batch_size)->capture_default_str();
  eval_cmd->add_option("--top-n", eval.top_n)->capture_default_str();

  // gradcheck
  GradcheckCommandOptions gcheck;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check of miniature models");
  grad_cmd->add_option("--model", gcheck.model, "all | bof | lstm | lstm-moe")->capture_default_str();
  grad_cmd->add_option("--tolerance", gcheck.tolerance, "Maximum relative error")->capture_default_str();
  grad_cmd->add_option("--inject-sign-bug", gcheck.inject_sign_bug, "Negate one parameter's gradient (testing)");

  // stats
  std::string stats_data;
  auto* stats_cmd = app.add_subcommand("stats", "Label statistics of a dataset");
  stats_cmd->add_option("--data", stats_data, "Dataset file (.fgr)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*gen_cmd) {
    gen.spec.seed = seed;
    gen.out_dir = out_opt->count() ? out_dir : "data";
    return cmd_gen_data(gen, out, err);
  }

  if (*train_cmd) {
    ExperimentConfig config;
    try {
      if (!config_path.empty()) config = experiment_from(parse_key_values(read_file(config_path)));
      KeyValues overrides;
      if (auto it = train_flags.find("model"); it != train_flags.end()) overrides["model"] = it->second;
      apply_overrides(config, overrides);
      const ModelKind kind = kind_of(config.model);
      for (const auto& [key, value] : train_flags) {
        if (key == "model") continue;
        if (key[0] != '@') {
          overrides[key] = value;
          continue;
        }
        std::string field = key.substr(1);
        if (field == "hidden")
          field = kind == ModelKind::kBoF ? "fc_hidden" : kind == ModelKind::kSimpleLstm ? "hidden_size" : "lstm_hidden";
        if (field == "dropout" && kind == ModelKind::kBoF) {
          overrides["model.dropout_input"] = value;
          overrides["model.dropout_fc1"] = value;
          continue;
        }
        overrides["model." + field] = value;
      }
      if (seed_opt->count()) overrides["seed"] = std::to_string(seed);
      if (out_opt->count()) overrides["out_dir"] = out_dir;
      apply_overrides(config, overrides);
    } catch (const std::exception& e) {
      err << "train: " << e.what() << '\n';
      return kExitUsage;
    }
    std::optional<std::filesystem::path> resume_path;
    if (!resume.empty()) resume_path = resume;
    return cmd_train(config, resume_path, out, err);
  }

  if (*eval_cmd) {
    if (eval_checkpoint.empty() && eval_predictions.empty()) {
      err << "eval: one of --checkpoint or --from-predictions is required\n";
      return kExitUsage;
    }
    eval.checkpoint = eval_checkpoint;
    eval.data = eval_data;
    if (!eval_predictions.empty()) eval.from_predictions = eval_predictions;
    if (out_opt->count()) eval.out_dir = out_dir;
    return cmd_eval(eval, out, err);
  }

  if (*grad_cmd) {
    gcheck.seed = seed;
    return cmd_gradcheck(gcheck, out, err);
  }

  if (*stats_cmd) return cmd_stats(stats_data, out, err);
  return kExitUsage;
}

}  // namespace framecls
