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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "framecls/types.hpp"

namespace framecls {

struct Prediction {
  std::string video_id;
  Vector scores;            // [num_classes]
  std::vector<int> labels;  // ground truth
};

using PredictionSet = std::vector<Prediction>;

inline constexpr int kDefaultTopN = 20;

/// Index of the highest score; the lowest index wins ties.
int top_class(const Vector& scores);

/// Fraction of samples whose top-scoring class is a ground-truth label.
double hit_at_1(const PredictionSet& predictions);

/// Global average precision over the pooled top-N (class, score) pairs of every sample.
/// The pooled list is ordered by score desc, then video_id, then class index; each
/// correct pair adds precision-so-far / M where M counts all ground-truth positives.
double gap(const PredictionSet& predictions, int top_n_per_video = kDefaultTopN);

struct ClassReport {
  std::vector<std::optional<double>> average_precision;  // absent when the class has no positives
  std::vector<std::int64_t> positives;
  std::vector<double> top1_frequency;  // share of samples whose argmax is the class
};

ClassReport per_class_report(const PredictionSet& predictions, int num_classes);

struct EvalResult {
  double hit_at_1 = 0.0;
  double gap = 0.0;
  std::size_t n_samples = 0;
  ClassReport per_class;
};

EvalResult evaluate(const PredictionSet& predictions, int num_classes, int top_n_per_video = kDefaultTopN);

/// One line per sample: video_id followed by class:score pairs (6 decimals), whitespace separated.
void write_predictions(std::ostream& out, const PredictionSet& predictions);
/// Parses the predictions format. Labels are left empty; missing classes score 0.
PredictionSet read_predictions(std::istream& in, int num_classes);

/// Rounds scores to the 6 decimal places used by the predictions file.
Vector quantize_scores(const Vector& scores);

}  // namespace framecls
