// FLARES range-view LiDAR toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "flares/error.hpp"
#include "flares/pcio.hpp"

namespace flares::metrics {

/// C x C confusion counts, rows ground truth, columns prediction. Points
/// whose ground truth is the ignore class are never counted, so the matrix
/// total equals the number of evaluated points. Matrices over frames add.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::uint32_t ignore_id = pcio::kNoIgnore;
  std::vector<std::uint64_t> counts;  // row-major C x C

  ConfusionMatrix() = default;
  ConfusionMatrix(std::size_t num_classes, std::uint32_t ignore)
      : classes(num_classes), ignore_id(ignore), counts(num_classes * num_classes, 0) {}

  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts[gt * classes + pred]; }
  std::uint64_t& at(std::size_t gt, std::size_t pred) { return counts[gt * classes + pred]; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto c : counts) t += c;
    return t;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.classes != classes || other.ignore_id != ignore_id)
      throw Error("metrics", "cannot add confusion matrices with different class setups");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    return *this;
  }
};

inline ConfusionMatrix confusion(const std::vector<std::uint32_t>& pred,
                                 const std::vector<std::uint32_t>& gt, std::size_t num_classes,
                                 std::uint32_t ignore_id = pcio::kNoIgnore) {
  if (pred.size() != gt.size())
    throw Error("metrics", "prediction and ground truth lengths differ: " +
                               std::to_string(pred.size()) + " vs " + std::to_string(gt.size()));
  ConfusionMatrix m(num_classes, ignore_id);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::uint32_t g = gt[i];
    if (g == ignore_id) continue;
    const std::uint32_t p = pred[i];
    if (g >= num_classes)
      throw Error("metrics", "ground truth label " + std::to_string(g) + " >= " +
                                 std::to_string(num_classes) + " classes");
    if (p >= num_classes)
      throw Error("metrics", "predicted label " + std::to_string(p) + " >= " +
                                 std::to_string(num_classes) + " classes");
    ++m.at(g, p);
  }
  return m;
}

struct ClassScore {
  double iou = std::numeric_limits<double>::quiet_NaN();
  double acc = std::numeric_limits<double>::quiet_NaN();
  bool in_miou = false;  // TP + FP + FN > 0 and not the ignore class
  bool in_macc = false;  // additionally TP + FN > 0
};

struct SegScores {
  std::vector<ClassScore> per_class;
  double miou = 0.0;
  double macc = 0.0;
  double overall_acc = 0.0;  // diagonal / total over evaluated points
};

/// IoU_c = TP / (TP + FP + FN), Acc_c = TP / (TP + FN). Classes absent from
/// both prediction and ground truth are excluded from the means rather than
/// scored zero; the ignore class never participates.
inline SegScores scores(const ConfusionMatrix& m) {
  const std::size_t c = m.classes;
  SegScores out;
  out.per_class.resize(c);
  std::vector<std::uint64_t> row_sum(c, 0), col_sum(c, 0);
  std::uint64_t diag = 0, total = 0;
  for (std::size_t g = 0; g < c; ++g) {
    for (std::size_t p = 0; p < c; ++p) {
      const std::uint64_t n = m.at(g, p);
      row_sum[g] += n;
      col_sum[p] += n;
      total += n;
      if (g == p) diag += n;
    }
  }
  double iou_sum = 0.0, acc_sum = 0.0;
  std::size_t iou_n = 0, acc_n = 0;
  for (std::size_t k = 0; k < c; ++k) {
    if (k == m.ignore_id) continue;
    const std::uint64_t tp = m.at(k, k);
    const std::uint64_t fn = row_sum[k] - tp;
    const std::uint64_t fp = col_sum[k] - tp;
    auto& s = out.per_class[k];
    if (tp + fp + fn > 0) {
      s.iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
      s.in_miou = true;
      iou_sum += s.iou;
      ++iou_n;
    }
    if (tp + fn > 0) {
      s.acc = static_cast<double>(tp) / static_cast<double>(tp + fn);
      s.in_macc = true;
      acc_sum += s.acc;
      ++acc_n;
    }
  }
  out.miou = iou_n ? iou_sum / iou_n : 0.0;
  out.macc = acc_n ? acc_sum / acc_n : 0.0;
  out.overall_acc = total ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;
  return out;
}

// --- latency benchmarking ----------------------------------------------------

struct BenchStage {
  std::string name;
  std::function<void()> run;
};

struct StageTiming {
  std::string name;
  double mean_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
};

struct BenchReport {
  int warmup_iters = 0;
  int measured_iters = 0;
  std::vector<StageTiming> stages;
  std::vector<std::pair<std::string, std::string>> config;  // echoed settings
};

/// Runs all stages warmup_iters times untimed, then measured_iters times with
/// per-stage wall-clock timing. Stages must be deterministic and side-effect
/// free on their inputs; the report echoes whatever configuration pairs the
/// caller passes (N, H, W, k, ...).
inline BenchReport bench(const std::vector<BenchStage>& stages, int warmup_iters = 100,
                         int measured_iters = 100,
                         std::vector<std::pair<std::string, std::string>> config_echo = {}) {
  if (measured_iters < 1) throw Error("metrics", "measured_iters must be >= 1");
  if (warmup_iters < 0) throw Error("metrics", "warmup_iters must be >= 0");
  using clock = std::chrono::steady_clock;
  BenchReport report;
  report.warmup_iters = warmup_iters;
  report.measured_iters = measured_iters;
  report.config = std::move(config_echo);
  for (int i = 0; i < warmup_iters; ++i)
    for (const auto& stage : stages) stage.run();
  std::vector<double> sums(stages.size(), 0.0);
  std::vector<double> mins(stages.size(), std::numeric_limits<double>::infinity());
  std::vector<double> maxs(stages.size(), 0.0);
  for (int i = 0; i < measured_iters; ++i) {
    for (std::size_t s = 0; s < stages.size(); ++s) {
      const auto t0 = clock::now();
      stages[s].run();
      const auto t1 = clock::now();
      const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      sums[s] += ms;
      mins[s] = std::min(mins[s], ms);
      maxs[s] = std::max(maxs[s], ms);
    }
  }
  for (std::size_t s = 0; s < stages.size(); ++s)
    report.stages.push_back({stages[s].name, sums[s] / measured_iters, mins[s], maxs[s]});
  return report;
}

inline BenchReport bench(const std::string& name, const std::function<void()>& stage,
                         int warmup_iters = 100, int measured_iters = 100,
                         std::vector<std::pair<std::string, std::string>> config_echo = {}) {
  return bench(std::vector<BenchStage>{{name, stage}}, warmup_iters, measured_iters,
               std::move(config_echo));
}

}  // namespace flares::metrics
