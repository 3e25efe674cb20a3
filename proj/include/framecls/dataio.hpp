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
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "framecls/binary_io.hpp"
#include "framecls/types.hpp"

namespace framecls {

inline constexpr int kRgbFeatureSize = 1024;
inline constexpr int kAudioFeatureSize = 128;
inline constexpr int kDefaultFeatureSize = kRgbFeatureSize + kAudioFeatureSize;
inline constexpr int kMaxRecordFrames = 360;

/// One video: id, ground-truth label set, and per-frame features (rgb followed by audio).
struct FrameRecord {
  std::string video_id;
  std::vector<int> labels;
  FrameMatrix frames;  // [num_frames, feature_size]

  bool operator==(const FrameRecord& other) const {
    return video_id == other.video_id && labels == other.labels && frames.rows() == other.frames.rows() &&
           frames.cols() == other.frames.cols() && frames == other.frames;
  }
};

/// A record collection plus the header values shared by every record.
struct Dataset {
  int num_classes = 0;
  int feature_size = kDefaultFeatureSize;
  std::vector<FrameRecord> records;
};

class RecordError : public std::invalid_argument {
 public:
  RecordError(std::size_t index, const std::string& why)
      : std::invalid_argument("record " + std::to_string(index) + ": " + why), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Returns an empty string when the record is valid, otherwise the first violation.
std::string validate_record(const FrameRecord& record, int num_classes, int feature_size);

/// Writes the FGR1 stream. Throws RecordError naming the first invalid record.
std::size_t write_records(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_records(const std::filesystem::path& path);

struct SyntheticSpec {
  int num_classes = 16;
  int num_videos = 1000;
  int min_frames = 30;
  int max_frames = 60;
  int feature_size = 64;
  int min_labels_per_video = 1;
  int max_labels_per_video = 1;
  double class_frequency_exponent = 0.0;
  // Per-entry standard deviation of frame noise around the planted class signatures.
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};

/// Deterministic corpus: frames = sum of label signatures + Gaussian noise, labels
/// drawn with probability proportional to (c + 1)^-exponent.
Dataset generate_synthetic(const SyntheticSpec& spec);

struct Batch {
  Sequence features;          // [batch, max_frames, feature_size]
  Matrix labels;              // [batch, num_classes], entries in {0, 1}
  std::vector<Index> valid_len;
  std::vector<std::string> video_ids;

  Index size() const { return features.batch; }
};

struct BatchOptions {
  int max_frames = 90;
  int skip_frames = 20;
  int batch_size = 32;
  bool drop_remainder = false;
};

/// Frames left after dropping min(skip, n - 1) leading frames and truncating to max_frames.
Index surviving_frames(Index num_frames, int max_frames, int skip_frames);

std::vector<Batch> make_batches(const Dataset& dataset, const BatchOptions& options,
                                std::optional<std::uint64_t> shuffle_seed = std::nullopt);

/// Builds a single batch from the given record indices in order.
Batch make_batch(const Dataset& dataset, const std::vector<std::size_t>& indices, const BatchOptions& options);

struct LabelStats {
  std::vector<std::int64_t> counts;
  std::vector<double> percentages;          // share of all label occurrences, in percent
  std::vector<double> cumulative_coverage;  // over counts sorted descending, ends at 1
  std::int64_t total = 0;

  /// max / min over all classes; infinity when some class never occurs.
  double max_min_ratio() const;
};

LabelStats label_stats(const std::vector<FrameRecord>& records, int num_classes);

}  // namespace framecls
