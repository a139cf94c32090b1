// FLARES range-view LiDAR toolkit
// SPDX-License-Identifier: Apache-2.0

#include "flares/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "flares/random.hpp"

using namespace flares;

TEST(Confusion, PerfectPredictionIsDiagonal) {
  const std::vector<std::uint32_t> labels{0, 1, 2, 1, 0};
  const auto m = metrics::confusion(labels, labels, 3);
  for (std::size_t g = 0; g < 3; ++g)
    for (std::size_t p = 0; p < 3; ++p)
      EXPECT_EQ(m.at(g, p), g == p ? (g == 0 ? 2u : g == 1 ? 2u : 1u) : 0u);
  EXPECT_EQ(m.total(), 5u);
}

TEST(Confusion, AllIgnoredGivesZeroMatrix) {
  const std::vector<std::uint32_t> gt{2, 2, 2};
  const std::vector<std::uint32_t> pred{0, 1, 2};
  const auto m = metrics::confusion(pred, gt, 3, /*ignore_id=*/2);
  EXPECT_EQ(m.total(), 0u);
}

TEST(Confusion, HandComputedCase) {
  // pred [0,0,1,1], gt [0,1,1,1] -> [[1,0],[1,2]]
  const auto m = metrics::confusion({0, 0, 1, 1}, {0, 1, 1, 1}, 2);
  EXPECT_EQ(m.at(0, 0), 1u);
  EXPECT_EQ(m.at(0, 1), 0u);
  EXPECT_EQ(m.at(1, 0), 1u);
  EXPECT_EQ(m.at(1, 1), 2u);
}

TEST(Confusion, RejectsOutOfRangeLabels) {
  EXPECT_THROW(metrics::confusion({2}, {0}, 2), Error);
  EXPECT_THROW(metrics::confusion({0}, {2}, 2), Error);
  EXPECT_THROW(metrics::confusion({0, 1}, {0}, 2), Error);
}

TEST(Scores, DiagonalMatrixScoresOne) {
  const std::vector<std::uint32_t> labels{0, 1, 2, 2};
  const auto s = metrics::scores(metrics::confusion(labels, labels, 3));
  EXPECT_DOUBLE_EQ(s.miou, 1.0);
  EXPECT_DOUBLE_EQ(s.macc, 1.0);
  EXPECT_DOUBLE_EQ(s.overall_acc, 1.0);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(s.per_class[c].iou, 1.0);
}

TEST(Scores, HandComputedMiou) {
  const auto m = metrics::confusion({0, 0, 1, 1}, {0, 1, 1, 1}, 2);
  const auto s = metrics::scores(m);
  EXPECT_NEAR(s.per_class[0].iou, 0.5, 1e-12);
  EXPECT_NEAR(s.per_class[1].iou, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.miou, 7.0 / 12.0, 1e-12);
  EXPECT_NEAR(s.per_class[0].acc, 1.0, 1e-12);
  EXPECT_NEAR(s.per_class[1].acc, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.overall_acc, 0.75, 1e-12);
}

TEST(Scores, EmptyClassExcludedFromMeans) {
  // class 2 never appears in gt or pred
  const auto m = metrics::confusion({0, 1}, {0, 1}, 3);
  const auto s = metrics::scores(m);
  EXPECT_FALSE(s.per_class[2].in_miou);
  EXPECT_DOUBLE_EQ(s.miou, 1.0);
}

TEST(Scores, IgnoreClassNeverParticipates) {
  const auto m = metrics::confusion({0, 1, 0}, {0, 1, 2}, 3, /*ignore_id=*/2);
  const auto s = metrics::scores(m);
  EXPECT_FALSE(s.per_class[2].in_miou);
  EXPECT_DOUBLE_EQ(s.miou, 1.0);  // the gt=2 point was skipped entirely
}

TEST(Scores, RangeStaysInUnitInterval) {
  Rng rng(21);
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t n = 1 + rng.index(300);
    std::vector<std::uint32_t> pred(n), gt(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<std::uint32_t>(rng.index(5));
      gt[i] = static_cast<std::uint32_t>(rng.index(5));
    }
    const auto s = metrics::scores(metrics::confusion(pred, gt, 5));
    EXPECT_GE(s.miou, 0.0);
    EXPECT_LE(s.miou, 1.0);
    EXPECT_GE(s.macc, 0.0);
    EXPECT_LE(s.macc, 1.0);
    for (const auto& c : s.per_class) {
      if (c.in_miou) {
        EXPECT_GE(c.iou, 0.0);
        EXPECT_LE(c.iou, 1.0);
      }
    }
  }
}

TEST(Confusion, AdditiveAcrossSplits) {
  Rng rng(22);
  for (int iter = 0; iter < 100; ++iter) {
    const std::size_t n = 2 + rng.index(200);
    std::vector<std::uint32_t> pred(n), gt(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<std::uint32_t>(rng.index(4));
      gt[i] = static_cast<std::uint32_t>(rng.index(4));
    }
    const std::size_t cut = 1 + rng.index(n - 1);
    auto head = metrics::confusion({pred.begin(), pred.begin() + cut},
                                   {gt.begin(), gt.begin() + cut}, 4, 0);
    const auto tail = metrics::confusion({pred.begin() + cut, pred.end()},
                                         {gt.begin() + cut, gt.end()}, 4, 0);
    head += tail;
    const auto whole = metrics::confusion(pred, gt, 4, 0);
    EXPECT_EQ(head.counts, whole.counts);
  }
}

TEST(Confusion, PermutationInvariant) {
  Rng rng(23);
  const std::size_t n = 500;
  std::vector<std::uint32_t> pred(n), gt(n);
  for (std::size_t i = 0; i < n; ++i) {
    pred[i] = static_cast<std::uint32_t>(rng.index(4));
    gt[i] = static_cast<std::uint32_t>(rng.index(4));
  }
  const auto before = metrics::confusion(pred, gt, 4);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
  std::vector<std::uint32_t> pred_s(n), gt_s(n);
  for (std::size_t i = 0; i < n; ++i) {
    pred_s[i] = pred[order[i]];
    gt_s[i] = gt[order[i]];
  }
  const auto after = metrics::confusion(pred_s, gt_s, 4);
  EXPECT_EQ(before.counts, after.counts);
}

TEST(Bench, ConstantStageHasTightStats) {
  // ~0.3 ms of fixed arithmetic per call
  volatile double sink = 0.0;
  const auto report = metrics::bench(
      "stub",
      [&] {
        double acc = 0.0;
        for (int i = 1; i < 60000; ++i) acc += 1.0 / i;
        sink = acc;
      },
      10, 30, {{"kind", "stub"}});
  ASSERT_EQ(report.stages.size(), 1u);
  const auto& t = report.stages[0];
  EXPECT_GT(t.min_ms, 0.0);
  EXPECT_GE(t.mean_ms, t.min_ms);
  EXPECT_LE(t.mean_ms, t.max_ms);
  EXPECT_LT(t.max_ms, 50.0 * t.min_ms);  // loose: scheduler noise happens
}

TEST(Bench, ReportEchoesConfiguration) {
  const auto report = metrics::bench(
      "noop", [] {}, 0, 1, {{"N", "3"}, {"H", "64"}, {"W", "512"}, {"k", "3"}});
  EXPECT_EQ(report.warmup_iters, 0);
  EXPECT_EQ(report.measured_iters, 1);
  ASSERT_EQ(report.config.size(), 4u);
  EXPECT_EQ(report.config[0].first, "N");
  EXPECT_EQ(report.config[3].second, "3");
}

TEST(Bench, RejectsZeroIterations) {
  EXPECT_THROW(metrics::bench("x", [] {}, 0, 0), Error);
}
