// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "dapnet/errors.hpp"

namespace dapnet {

/// A loss value together with its gradient with respect to the inputs.
struct ValueGrad {
  double value = 0.0;
  std::vector<double> grad;
};

/// Fast R-CNN robust loss with the transition at |x| = 1.
inline ValueGrad smooth_l1(double x) {
  const double ax = std::abs(x);
  if (ax < 1.0) return {0.5 * x * x, {x}};
  return {ax - 0.5, {x > 0.0 ? 1.0 : -1.0}};
}

/// Max-subtracted softmax.
inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvariantError("softmax: empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

/// -log softmax(logits)[label], gradient softmax - onehot(label).
inline ValueGrad softmax_ce(std::span<const double> logits, std::size_t label) {
  if (logits.empty()) throw InvariantError("softmax_ce: empty logits");
  if (label >= logits.size()) throw InvariantError("softmax_ce: label out of range");
  const auto top = std::max_element(logits.begin(), logits.end());
  const double m = *top;
  // Sum the non-maximal terms separately so log1p keeps near-zero losses exact.
  double rest = 0.0;
  for (auto it = logits.begin(); it != logits.end(); ++it)
    if (it != top) rest += std::exp(*it - m);
  const double log_z = std::log1p(rest);
  ValueGrad out;
  out.value = std::max(0.0, log_z - (logits[label] - m));
  out.grad.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) out.grad[c] = std::exp(logits[c] - m - log_z);
  out.grad[label] -= 1.0;
  return out;
}

/// Two-class log loss. `scores` holds exactly two logits; `label` indexes them.
inline ValueGrad binary_log_loss(std::span<const double> scores, std::size_t label) {
  if (scores.size() != 2) throw InvariantError("binary_log_loss: expected exactly two scores");
  return softmax_ce(scores, label);
}

template <typename F>
concept DifferentiableScalar = requires(F f, std::span<const double> x) {
  { f(x) } -> std::convertible_to<ValueGrad>;
};

/// Central-difference gradient check. Returns
///   max_i |analytic_i - numeric_i| / max(1, |analytic_i|).
template <DifferentiableScalar F>
double finite_diff_check(F&& f, std::span<const double> x, double eps = 1e-5) {
  if (!(eps > 0.0)) throw InvariantError("finite_diff_check: eps must be > 0");
  const ValueGrad at = f(x);
  if (!std::isfinite(at.value)) throw InvariantError("finite_diff_check: non-finite value at x");
  if (at.grad.size() != x.size()) throw InvariantError("finite_diff_check: gradient length mismatch");

  std::vector<double> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double plus = f(std::span<const double>(probe)).value;
    probe[i] = orig - eps;
    const double minus = f(std::span<const double>(probe)).value;
    probe[i] = orig;
    if (!std::isfinite(plus) || !std::isfinite(minus))
      throw InvariantError("finite_diff_check: non-finite value near x");
    const double numeric = (plus - minus) / (2.0 * eps);
    const double analytic = at.grad[i];
    worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
  }
  return worst;
}

}  // namespace dapnet
