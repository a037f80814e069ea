// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "dapnet/eval_metrics.hpp"

namespace dapnet {
namespace {

// Walks detections in rank order and tries every ground truth; the winner is
// the unmatched same-category one with the largest IoU above the threshold.
std::vector<bool> reference_flags(const std::vector<ScoredDetection>& dets, const std::vector<GroundTruth>& gts,
                                  double thr) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dets[a].score > dets[b].score; });
  std::vector<bool> used(gts.size(), false), flags;
  for (std::size_t i : order) {
    int winner = -1;
    double best = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].category != dets[i].category) continue;
      const double v = iou(dets[i].box, gts[g].box);
      if (v > thr && v > best) {
        best = v;
        winner = static_cast<int>(g);
      }
    }
    if (winner >= 0) used[static_cast<std::size_t>(winner)] = true;
    flags.push_back(winner >= 0);
  }
  return flags;
}

// Left-endpoint Riemann sum of the right-running-max envelope over [0, 1].
double riemann_ap(const std::vector<PrPoint>& curve, std::size_t steps) {
  double sum = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    const double r = (s + 0.5) / static_cast<double>(steps);
    double p = 0.0;
    for (const auto& pt : curve)
      if (pt.recall >= r) p = std::max(p, pt.precision);
    sum += p;
  }
  return sum / static_cast<double>(steps);
}

TEST(Matching, DetectionsEqualGroundTruth) {
  const std::vector<GroundTruth> gts{{1, {0, 0, 10, 10}}, {2, {20, 20, 40, 30}}, {1, {50, 0, 60, 10}}};
  std::vector<ScoredDetection> dets;
  for (std::size_t i = 0; i < gts.size(); ++i) dets.push_back({gts[i].box, gts[i].category, 0.1 * (i + 1)});
  const auto m = match_detections(dets, gts);
  EXPECT_EQ(m.tp, 3u);
  EXPECT_EQ(m.fp, 0u);
  EXPECT_EQ(m.fn, 0u);
}

TEST(Matching, DuplicateIsFalsePositive) {
  const std::vector<GroundTruth> gts{{1, {0, 0, 10, 10}}};
  const std::vector<ScoredDetection> dets{{{0, 0, 10, 10}, 1, 0.9}, {{0, 0, 10, 11}, 1, 0.8}};
  const auto m = match_detections(dets, gts);
  EXPECT_EQ(m.tp, 1u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 0u);
  EXPECT_TRUE(m.detections[0].true_positive);
  EXPECT_FALSE(m.detections[1].true_positive);
}

TEST(Matching, WrongCategoryNeverMatches) {
  const std::vector<GroundTruth> gts{{1, {0, 0, 10, 10}}};
  const std::vector<ScoredDetection> dets{{{0, 0, 10, 10}, 2, 0.9}};
  const auto m = match_detections(dets, gts);
  EXPECT_EQ(m.tp, 0u);
  EXPECT_EQ(m.fn, 1u);
}

TEST(Matching, AgreesWithExhaustiveReference) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> pos(0.0, 60.0), size(10.0, 30.0), jitter(-6.0, 6.0), score(0.0, 1.0);
  std::uniform_int_distribution<int> cat(1, 2), pick(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<GroundTruth> gts;
    for (int g = 0; g < 5; ++g) {
      const double x = pos(rng), y = pos(rng);
      gts.push_back({cat(rng), {x, y, x + size(rng), y + size(rng)}});
    }
    std::vector<ScoredDetection> dets;
    for (int d = 0; d < 20; ++d) {
      const Box& b = gts[static_cast<std::size_t>(pick(rng))].box;
      dets.push_back({{b.x_min + jitter(rng), b.y_min + jitter(rng), b.x_max + jitter(rng), b.y_max + jitter(rng)},
                      cat(rng), score(rng)});
    }
    const auto m = match_detections(dets, gts, 0.5);
    const auto ref = reference_flags(dets, gts, 0.5);
    ASSERT_EQ(m.detections.size(), ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_EQ(m.detections[k].true_positive, ref[k]);
    EXPECT_EQ(m.tp + m.fp, dets.size());
    EXPECT_EQ(m.fn, gts.size() - m.tp);
    EXPECT_LE(m.tp, gts.size());

    // Permuting the input (with distinct scores) leaves the flags unchanged.
    std::vector<ScoredDetection> shuffled = dets;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto m2 = match_detections(shuffled, gts, 0.5);
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_EQ(m2.detections[k].true_positive, ref[k]);
  }
}

TEST(Matching, ThresholdOutOfRange) {
  EXPECT_THROW(match_detections({}, {}, 0.0), InvariantError);
  EXPECT_THROW(match_detections({}, {}, 1.0), InvariantError);
}

TEST(PrCurve, WorkedSequence) {
  const std::vector<bool> flags{true, false, true};
  const auto curve = precision_recall_curve(flags, 2);
  ASSERT_EQ(curve.size(), 3u);
  EXPECT_EQ(curve[0], (PrPoint{0.5, 1.0}));
  EXPECT_EQ(curve[1], (PrPoint{0.5, 0.5}));
  EXPECT_EQ(curve[2], (PrPoint{1.0, 2.0 / 3.0}));
}

TEST(PrCurve, AllTruePositivesEndAtOne) {
  const std::vector<bool> flags(4, true);
  const auto curve = precision_recall_curve(flags, 4);
  EXPECT_EQ(curve.back(), (PrPoint{1.0, 1.0}));
  EXPECT_THROW(precision_recall_curve(flags, 0), InvariantError);
}

TEST(AveragePrecision, WorkedValue) {
  const std::vector<PrPoint> curve{{0.5, 1.0}, {0.5, 0.5}, {1.0, 2.0 / 3.0}};
  EXPECT_NEAR(average_precision(curve), 5.0 / 6.0, 1e-12);
  EXPECT_EQ(average_precision(std::vector<PrPoint>{}), 0.0);
  const std::vector<PrPoint> perfect{{0.5, 1.0}, {1.0, 1.0}};
  EXPECT_EQ(average_precision(perfect), 1.0);
  EXPECT_EQ(average_precision(perfect, ApInterpolation::kElevenPoint), 1.0);
}

TEST(AveragePrecision, ElevenPointWorkedValue) {
  const std::vector<PrPoint> curve{{0.5, 1.0}, {0.5, 0.5}, {1.0, 2.0 / 3.0}};
  EXPECT_NEAR(average_precision(curve, ApInterpolation::kElevenPoint), (6.0 + 5.0 * 2.0 / 3.0) / 11.0, 1e-15);
}

TEST(AveragePrecision, MatchesRiemannSum) {
  std::mt19937_64 rng(77);
  std::bernoulli_distribution tp(0.5);
  std::uniform_int_distribution<int> len(1, 40);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<bool> flags(static_cast<std::size_t>(len(rng)));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) hits += (flags[i] = tp(rng));
    const std::size_t gts = hits + static_cast<std::size_t>(trial % 3) + (hits == 0);
    const auto curve = precision_recall_curve(flags, gts);
    // Recall values are multiples of 1/gts, so a grid that is a multiple of
    // gts makes the midpoint rule exact.
    EXPECT_NEAR(average_precision(curve), riemann_ap(curve, 840 * gts), 1e-9);
  }
}

TEST(AveragePrecision, TrailingFalsePositiveNeverIncreases) {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution tp(0.6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<bool> flags(10);
    for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = tp(rng);
    const double before = average_precision(precision_recall_curve(flags, 12));
    flags.push_back(false);
    EXPECT_LE(average_precision(precision_recall_curve(flags, 12)), before);
  }
}

TEST(AveragePrecision, InvariantUnderMonotoneRescaling) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0), jitter(-3.0, 3.0);
  std::vector<GroundTruth> gts;
  std::vector<ScoredDetection> dets;
  for (int i = 0; i < 15; ++i) {
    const double x = 40.0 * i;
    gts.push_back({1, {x, 0, x + 20, 20}});
    dets.push_back({{x + jitter(rng), jitter(rng), x + 20 + jitter(rng), 20 + jitter(rng)}, 1, u(rng)});
    dets.push_back({{x + 100, 100, x + 120, 120}, 1, u(rng)});
  }
  const std::vector<EvalImage> a{{dets, gts}};
  auto rescaled = dets;
  for (auto& d : rescaled) d.score = d.score * d.score * d.score / 7.0;
  const std::vector<EvalImage> b{{rescaled, gts}};
  EXPECT_EQ(evaluate(a).map, evaluate(b).map);
}

TEST(MeanAp, Cases) {
  EXPECT_EQ(mean_ap(std::vector<double>{0.4}), 0.4);
  EXPECT_EQ(mean_ap(std::vector<double>{1.0, 0.5}), 0.75);
  const std::vector<double> ten{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double s = 0.0;
  for (double v : ten) s += v;
  EXPECT_DOUBLE_EQ(mean_ap(ten), s / 10.0);
  EXPECT_THROW(mean_ap(std::vector<double>{}), InvariantError);
}

TEST(Evaluate, PerfectDetectionsAcrossImages) {
  std::vector<EvalImage> images(3);
  for (std::size_t im = 0; im < images.size(); ++im)
    for (int c = 1; c <= 4; ++c) {
      const Box b{10.0 * c, 5.0 * im, 10.0 * c + 8, 5.0 * im + 4};
      images[im].ground_truths.push_back({c, b});
      images[im].detections.push_back({b, c, 0.3});
    }
  const auto report = evaluate(images);
  EXPECT_EQ(report.categories.size(), 4u);
  EXPECT_EQ(report.map, 1.0);
}

TEST(Evaluate, CategoriesWithoutGroundTruthAreExcluded) {
  std::vector<EvalImage> images(1);
  images[0].ground_truths.push_back({1, {0, 0, 10, 10}});
  images[0].detections.push_back({{0, 0, 10, 10}, 1, 0.9});
  images[0].detections.push_back({{50, 50, 60, 60}, 3, 0.95});
  const auto report = evaluate(images);
  ASSERT_EQ(report.categories.size(), 1u);
  EXPECT_EQ(report.categories[0].category, 1);
  EXPECT_EQ(report.map, 1.0);
}

TEST(Evaluate, RecallNondecreasingAndBounded) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(0.0, 200.0), score(0.0, 1.0);
  std::uniform_int_distribution<int> cat(1, 3);
  std::vector<EvalImage> images(5);
  for (auto& im : images)
    for (int i = 0; i < 30; ++i) {
      const double x = pos(rng), y = pos(rng);
      const Box b{x, y, x + 15, y + 15};
      if (i % 2 == 0) im.ground_truths.push_back({cat(rng), b});
      im.detections.push_back({{x + 2, y, x + 17, y + 15}, cat(rng), score(rng)});
    }
  const auto report = evaluate(images);
  std::vector<double> aps;
  for (const auto& c : report.categories) {
    double prev = 0.0;
    for (const auto& p : c.curve) {
      EXPECT_GE(p.recall, prev);
      EXPECT_LE(p.recall, 1.0);
      EXPECT_GE(p.precision, 0.0);
      EXPECT_LE(p.precision, 1.0);
      prev = p.recall;
    }
    aps.push_back(c.ap);
  }
  EXPECT_DOUBLE_EQ(report.map, mean_ap(aps));
}

}  // namespace
}  // namespace dapnet
