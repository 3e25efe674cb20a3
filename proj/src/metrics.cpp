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

#include "framecls/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace framecls {
namespace {

bool contains(const std::vector<int>& labels, int c) { return std::find(labels.begin(), labels.end(), c) != labels.end(); }

// Class indices sorted by score desc, class asc.
std::vector<int> ranked_classes(const Vector& scores) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) > scores(b); });
  return order;
}

}  // namespace

int top_class(const Vector& scores) {
  if (scores.size() == 0) throw std::invalid_argument("top_class: empty score vector");
  int best = 0;
  for (Index c = 1; c < scores.size(); ++c)
    if (scores(c) > scores(best)) best = static_cast<int>(c);
  return best;
}

double hit_at_1(const PredictionSet& predictions) {
  if (predictions.empty()) throw std::invalid_argument("hit_at_1: empty prediction set");
  std::size_t hits = 0;
  for (const Prediction& p : predictions) hits += contains(p.labels, top_class(p.scores)) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double gap(const PredictionSet& predictions, int top_n_per_video) {
  if (top_n_per_video < 1) throw std::invalid_argument("gap: top_n_per_video must be >= 1");

  struct Entry {
    double score;
    std::size_t sample;
    int cls;
    bool correct;
  };
  std::vector<Entry> pooled;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Prediction& p = predictions[i];
    positives += p.labels.size();
    std::vector<int> order = ranked_classes(p.scores);
    const std::size_t keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(top_n_per_video));
    for (std::size_t r = 0; r < keep; ++r)
      pooled.push_back({p.scores(order[r]), i, order[r], contains(p.labels, order[r])});
  }
  if (positives == 0) throw std::invalid_argument("gap: no ground-truth positives");

  std::sort(pooled.begin(), pooled.end(), [&](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    const std::string& va = predictions[a.sample].video_id;
    const std::string& vb = predictions[b.sample].video_id;
    if (va != vb) return va < vb;
    if (a.cls != b.cls) return a.cls < b.cls;
    return a.sample < b.sample;
  });

  double total = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    if (!pooled[i].correct) continue;
    ++correct;
    total += static_cast<double>(correct) / static_cast<double>(i + 1);
  }
  return total / static_cast<double>(positives);
}

ClassReport per_class_report(const PredictionSet& predictions, int num_classes) {
  ClassReport report;
  report.average_precision.assign(num_classes, std::nullopt);
  report.positives.assign(num_classes, 0);
  report.top1_frequency.assign(num_classes, 0.0);
  if (predictions.empty()) return report;

  for (const Prediction& p : predictions) {
    for (int c : p.labels) ++report.positives.at(c);
    report.top1_frequency.at(top_class(p.scores)) += 1.0;
  }
  for (double& f : report.top1_frequency) f /= static_cast<double>(predictions.size());

  std::vector<std::size_t> order(predictions.size());
  for (int c = 0; c < num_classes; ++c) {
    if (report.positives[c] == 0) continue;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double sa = predictions[a].scores(c);
      const double sb = predictions[b].scores(c);
      if (sa != sb) return sa > sb;
      if (predictions[a].video_id != predictions[b].video_id) return predictions[a].video_id < predictions[b].video_id;
      return a < b;
    });
    double sum = 0.0;
    std::int64_t hits = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (!contains(predictions[order[r]].labels, c)) continue;
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    report.average_precision[c] = sum / static_cast<double>(report.positives[c]);
  }
  return report;
}

EvalResult evaluate(const PredictionSet& predictions, int num_classes, int top_n_per_video) {
  EvalResult result;
  result.n_samples = predictions.size();
  result.hit_at_1 = hit_at_1(predictions);
  result.gap = gap(predictions, top_n_per_video);
  result.per_class = per_class_report(predictions, num_classes);
  return result;
}

void write_predictions(std::ostream& out, const PredictionSet& predictions) {
  char buf[64];
  for (const Prediction& p : predictions) {
    out << p.video_id;
    for (Index c = 0; c < p.scores.size(); ++c) {
      std::snprintf(buf, sizeof(buf), " %d:%.6f", static_cast<int>(c), p.scores(c));
      out << buf;
    }
    out << '\n';
  }
}

PredictionSet read_predictions(std::istream& in, int num_classes) {
  PredictionSet set;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    Prediction p;
    if (!(fields >> p.video_id)) continue;
    p.scores = Vector::Zero(num_classes);
    std::string pair;
    while (fields >> pair) {
      const auto colon = pair.find(':');
      if (colon == std::string::npos)
        throw std::invalid_argument("predictions line " + std::to_string(line_no) + ": expected class:score");
      const int c = std::stoi(pair.substr(0, colon));
      if (c < 0 || c >= num_classes)
        throw std::invalid_argument("predictions line " + std::to_string(line_no) + ": class out of range");
      p.scores(c) = std::stod(pair.substr(colon + 1));
    }
    set.push_back(std::move(p));
  }
  return set;
}

Vector quantize_scores(const Vector& scores) {
  Vector q(scores.size());
  char buf[64];
  for (Index c = 0; c < scores.size(); ++c) {
    std::snprintf(buf, sizeof(buf), "%.6f", scores(c));
    q(c) = std::strtod(buf, nullptr);
  }
  return q;
}

}  // namespace framecls
