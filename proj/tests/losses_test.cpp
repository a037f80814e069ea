// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "dapnet/losses.hpp"

namespace dapnet {
namespace {

ValueGrad smooth_l1_vec(std::span<const double> x) { return smooth_l1(x[0]); }

TEST(SmoothL1, Branches) {
  auto z = smooth_l1(0.0);
  EXPECT_EQ(z.value, 0.0);
  EXPECT_EQ(z.grad[0], 0.0);
  auto q = smooth_l1(0.5);
  EXPECT_DOUBLE_EQ(q.value, 0.125);
  EXPECT_DOUBLE_EQ(q.grad[0], 0.5);
  auto l = smooth_l1(2.0);
  EXPECT_DOUBLE_EQ(l.value, 1.5);
  EXPECT_DOUBLE_EQ(l.grad[0], 1.0);
  EXPECT_DOUBLE_EQ(smooth_l1(-2.0).grad[0], -1.0);
}

TEST(SmoothL1, ContinuouslyDifferentiableAtTransition) {
  for (double s : {1.0, -1.0}) {
    const double below = s * std::nextafter(1.0, 0.0);
    EXPECT_NEAR(smooth_l1(below).value, 0.5, 1e-15);
    EXPECT_DOUBLE_EQ(smooth_l1(s).value, 0.5);
    EXPECT_NEAR(smooth_l1(below).grad[0], s, 1e-15);
    EXPECT_DOUBLE_EQ(smooth_l1(s).grad[0], s);
  }
}

TEST(SoftmaxCe, UniformLogitsGiveLogK) {
  for (std::size_t k : {2u, 3u, 11u}) {
    const std::vector<double> logits(k, 0.7);
    EXPECT_NEAR(softmax_ce(logits, 0).value, std::log(static_cast<double>(k)), 1e-15);
  }
}

TEST(SoftmaxCe, ConfidentCorrectLabel) {
  // 50-digit reference: log(1 + 2 e^-10).
  const std::vector<double> logits{10, 0, 0};
  EXPECT_NEAR(softmax_ce(logits, 0).value, 9.0795737467244446e-05, 1e-18);
}

TEST(SoftmaxCe, GradientSumsToZeroAndSurvivesExtremes) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 50.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> logits(6);
    for (double& v : logits) v = n(rng);
    const auto r = softmax_ce(logits, static_cast<std::size_t>(i % 6));
    EXPECT_TRUE(std::isfinite(r.value));
    EXPECT_GE(r.value, 0.0);
    EXPECT_NEAR(std::accumulate(r.grad.begin(), r.grad.end(), 0.0), 0.0, 1e-12);
  }
  const std::vector<double> huge{1e300, -1e300};
  EXPECT_EQ(softmax_ce(huge, 0).value, 0.0);
}

TEST(SoftmaxCe, Errors) {
  EXPECT_THROW(softmax_ce(std::vector<double>{}, 0), InvariantError);
  EXPECT_THROW(softmax_ce(std::vector<double>{1.0, 2.0}, 2), InvariantError);
}

TEST(BinaryLogLoss, MatchesTwoClassSoftmax) {
  const std::vector<double> equal{0.3, 0.3};
  EXPECT_NEAR(binary_log_loss(equal, 0).value, std::log(2.0), 1e-15);
  EXPECT_NEAR(binary_log_loss(equal, 1).value, std::log(2.0), 1e-15);
  const std::vector<double> s{3, 0};
  EXPECT_NEAR(binary_log_loss(s, 1).value, 3.0485873515737421, 1e-14);
  EXPECT_EQ(binary_log_loss(s, 1).value, softmax_ce(s, 1).value);
  EXPECT_THROW(binary_log_loss(std::vector<double>{1.0, 2.0, 3.0}, 0), InvariantError);
}

TEST(FiniteDiff, SmoothL1) {
  const std::vector<double> x{0.3};
  EXPECT_LT(finite_diff_check(smooth_l1_vec, x, 1e-5), 1e-6);
}

TEST(FiniteDiff, SoftmaxCeRandom) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(5);
    for (double& v : x) v = n(rng);
    const std::size_t label = static_cast<std::size_t>(i % 5);
    EXPECT_LT(finite_diff_check([&](std::span<const double> z) { return softmax_ce(z, label); }, x, 1e-5), 1e-5);
  }
}

TEST(FiniteDiff, LinearIsExact) {
  const std::vector<double> x{1.7};
  auto linear = [](std::span<const double> z) { return ValueGrad{3.0 * z[0], {3.0}}; };
  EXPECT_LT(finite_diff_check(linear, x, 1e-5), 1e-10);
}

TEST(FiniteDiff, DetectsWrongGradient) {
  const std::vector<double> x{0.3};
  auto wrong = [](std::span<const double> z) { return ValueGrad{z[0] * z[0], {1.0}}; };
  EXPECT_GT(finite_diff_check(wrong, x, 1e-5), 1e-3);
}

TEST(FiniteDiff, Errors) {
  const std::vector<double> x{0.5};
  auto nan_fn = [](std::span<const double> z) { return ValueGrad{z[0] > 0.5 ? NAN : 0.0, {0.0}}; };
  EXPECT_THROW(finite_diff_check(nan_fn, x, 1e-5), InvariantError);
  EXPECT_THROW(finite_diff_check(smooth_l1_vec, x, 0.0), InvariantError);
}

}  // namespace
}  // namespace dapnet
