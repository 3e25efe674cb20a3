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

#include "framecls/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace framecls {
namespace {

constexpr char kMagic[4] = {'F', 'G', 'R', '1'};

}  // namespace

std::string validate_record(const FrameRecord& record, int num_classes, int feature_size) {
  if (record.video_id.size() > std::numeric_limits<std::uint16_t>::max()) return "video_id too long";
  if (record.labels.empty()) return "label set is empty";
  if (record.labels.size() > std::numeric_limits<std::uint16_t>::max()) return "too many labels";
  std::unordered_set<int> seen;
  for (int label : record.labels) {
    if (label < 0 || label >= num_classes) return "label " + std::to_string(label) + " out of range";
    if (!seen.insert(label).second) return "duplicate label " + std::to_string(label);
  }
  if (record.frames.rows() < 1 || record.frames.rows() > kMaxRecordFrames)
    return "frame count " + std::to_string(record.frames.rows()) + " outside [1, 360]";
  if (record.frames.cols() != feature_size)
    return "feature vectors have " + std::to_string(record.frames.cols()) + " entries, expected " +
           std::to_string(feature_size);
  if (!record.frames.allFinite()) return "non-finite feature value";
  return {};
}

std::size_t write_records(const Dataset& dataset, const std::filesystem::path& path) {
  if (dataset.num_classes < 0 || dataset.feature_size < 1)
    throw std::invalid_argument("dataset header must have num_classes >= 0 and feature_size >= 1");
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    std::string why = validate_record(dataset.records[i], dataset.num_classes, dataset.feature_size);
    if (!why.empty()) throw RecordError(i, why);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  BinaryWriter w(out);
  out.write(kMagic, 4);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dataset.num_classes));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dataset.feature_size));
  for (const FrameRecord& r : dataset.records) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(r.video_id.size()));
    w.put_bytes(r.video_id);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(r.labels.size()));
    for (int label : r.labels) w.put<std::uint32_t>(static_cast<std::uint32_t>(label));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(r.frames.rows()));
    w.put_array(r.frames.data(), static_cast<std::size_t>(r.frames.size()));
  }
  out.flush();
  if (!out) throw std::runtime_error("I/O failure while writing " + path.string());
  return dataset.records.size();
}

Dataset read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  BinaryReader r(in);

  std::string magic = r.get_bytes(4, "magic");
  if (magic != std::string(kMagic, 4)) throw FormatError("bad magic (expected FGR1)", 0);

  Dataset ds;
  ds.num_classes = static_cast<int>(r.get<std::uint32_t>("num_classes"));
  std::uint64_t fs_offset = r.offset();
  ds.feature_size = static_cast<int>(r.get<std::uint32_t>("feature_size"));
  if (ds.feature_size < 1) throw FormatError("feature_size must be positive", fs_offset);

  while (!r.at_end()) {
    std::uint64_t start = r.offset();
    FrameRecord rec;
    auto id_len = r.get<std::uint16_t>("id_len");
    rec.video_id = r.get_bytes(id_len, "video_id");
    auto num_labels = r.get<std::uint16_t>("num_labels");
    rec.labels.resize(num_labels);
    for (auto& label : rec.labels) label = static_cast<int>(r.get<std::uint32_t>("label"));
    auto num_frames = r.get<std::uint16_t>("num_frames");
    if (num_frames < 1 || num_frames > kMaxRecordFrames)
      throw FormatError("frame count " + std::to_string(num_frames) + " outside [1, 360]", r.offset() - 2);
    rec.frames.resize(num_frames, ds.feature_size);
    r.get_array(rec.frames.data(), static_cast<std::size_t>(rec.frames.size()), "frame features");
    std::string why = validate_record(rec, ds.num_classes, ds.feature_size);
    if (!why.empty()) throw FormatError("invalid record (" + why + ")", start);
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
  if (spec.num_videos < 0) throw std::invalid_argument("num_videos must be >= 0");
  if (spec.feature_size < 1) throw std::invalid_argument("feature_size must be >= 1");
  if (spec.min_frames < 1 || spec.max_frames > kMaxRecordFrames || spec.min_frames > spec.max_frames)
    throw std::invalid_argument("frames range must satisfy 1 <= min <= max <= 360");
  if (spec.min_labels_per_video < 1 || spec.min_labels_per_video > spec.max_labels_per_video)
    throw std::invalid_argument("labels_per_video range must satisfy 1 <= min <= max");
  if (spec.max_labels_per_video > spec.num_classes)
    throw std::invalid_argument("labels_per_video range exceeds num_classes");
  if (!(spec.class_frequency_exponent >= 0.0)) throw std::invalid_argument("class_frequency_exponent must be >= 0");
  if (!(spec.noise_std >= 0.0)) throw std::invalid_argument("noise_std must be >= 0");

  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix signatures(spec.num_classes, spec.feature_size);
  for (Index i = 0; i < signatures.size(); ++i) signatures.data()[i] = normal(rng);

  std::vector<double> class_weight(spec.num_classes);
  for (int c = 0; c < spec.num_classes; ++c) class_weight[c] = std::pow(c + 1.0, -spec.class_frequency_exponent);

  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.feature_size = spec.feature_size;
  ds.records.reserve(spec.num_videos);

  std::uniform_int_distribution<int> label_count(spec.min_labels_per_video, spec.max_labels_per_video);
  std::uniform_int_distribution<int> frame_count(spec.min_frames, spec.max_frames);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int v = 0; v < spec.num_videos; ++v) {
    FrameRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "vid%07d", v);
    rec.video_id = id;

    // Weighted sampling without replacement.
    std::vector<double> remaining = class_weight;
    int m = label_count(rng);
    for (int j = 0; j < m; ++j) {
      double total = std::accumulate(remaining.begin(), remaining.end(), 0.0);
      double u = unit(rng) * total;
      int pick = spec.num_classes - 1;
      for (int c = 0; c < spec.num_classes; ++c) {
        if (remaining[c] <= 0.0) continue;
        if (u < remaining[c]) {
          pick = c;
          break;
        }
        u -= remaining[c];
      }
      while (remaining[pick] <= 0.0) --pick;
      remaining[pick] = 0.0;
      rec.labels.push_back(pick);
    }
    std::sort(rec.labels.begin(), rec.labels.end());

    RowVector mean = RowVector::Zero(spec.feature_size);
    for (int c : rec.labels) mean += signatures.row(c);

    int n = frame_count(rng);
    rec.frames.resize(n, spec.feature_size);
    for (int t = 0; t < n; ++t)
      for (int f = 0; f < spec.feature_size; ++f)
        rec.frames(t, f) = static_cast<float>(mean(f) + spec.noise_std * normal(rng));
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

Index surviving_frames(Index num_frames, int max_frames, int skip_frames) {
  Index skip = std::min<Index>(skip_frames, num_frames - 1);
  return std::min<Index>(num_frames - skip, max_frames);
}

Batch make_batch(const Dataset& dataset, const std::vector<std::size_t>& indices, const BatchOptions& options) {
  if (options.max_frames < 1) throw std::invalid_argument("max_frames must be >= 1");
  if (options.skip_frames < 0) throw std::invalid_argument("skip_frames must be >= 0");

  const Index b_size = static_cast<Index>(indices.size());
  Batch batch;
  batch.features = Sequence(b_size, options.max_frames, dataset.feature_size);
  batch.labels = Matrix::Zero(b_size, dataset.num_classes);
  batch.valid_len.resize(b_size);
  batch.video_ids.resize(b_size);

  for (Index b = 0; b < b_size; ++b) {
    const FrameRecord& rec = dataset.records.at(indices[b]);
    const Index n = rec.frames.rows();
    const Index skip = std::min<Index>(options.skip_frames, n - 1);
    const Index len = surviving_frames(n, options.max_frames, options.skip_frames);
    for (Index t = 0; t < len; ++t) batch.features.at(b, t) = rec.frames.row(skip + t).cast<double>();
    batch.valid_len[b] = len;
    batch.video_ids[b] = rec.video_id;
    for (int label : rec.labels) batch.labels(b, label) = 1.0;
  }
  return batch;
}

std::vector<Batch> make_batches(const Dataset& dataset, const BatchOptions& options,
                                std::optional<std::uint64_t> shuffle_seed) {
  if (options.batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (options.max_frames < 1) throw std::invalid_argument("max_frames must be >= 1");
  if (options.skip_frames < 0) throw std::invalid_argument("skip_frames must be >= 0");

  std::vector<std::size_t> order(dataset.records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<Batch> batches;
  const std::size_t bs = static_cast<std::size_t>(options.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    std::size_t end = std::min(order.size(), start + bs);
    if (end - start < bs && options.drop_remainder) break;
    std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
    batches.push_back(make_batch(dataset, idx, options));
  }
  return batches;
}

double LabelStats::max_min_ratio() const {
  if (counts.empty()) return 0.0;
  auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*lo == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(*hi) / static_cast<double>(*lo);
}

LabelStats label_stats(const std::vector<FrameRecord>& records, int num_classes) {
  LabelStats stats;
  stats.counts.assign(num_classes, 0);
  for (const FrameRecord& r : records)
    for (int label : r.labels) {
      if (label < 0 || label >= num_classes) throw std::invalid_argument("label out of range in label_stats");
      ++stats.counts[label];
    }
  stats.total = std::accumulate(stats.counts.begin(), stats.counts.end(), std::int64_t{0});
  stats.percentages.assign(num_classes, 0.0);
  if (stats.total == 0) return stats;

  for (int c = 0; c < num_classes; ++c)
    stats.percentages[c] = 100.0 * static_cast<double>(stats.counts[c]) / static_cast<double>(stats.total);

  std::vector<std::int64_t> sorted = stats.counts;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::int64_t running = 0;
  stats.cumulative_coverage.reserve(num_classes);
  for (std::int64_t count : sorted) {
    running += count;
    stats.cumulative_coverage.push_back(static_cast<double>(running) / static_cast<double>(stats.total));
  }
  return stats;
}

}  // namespace framecls
