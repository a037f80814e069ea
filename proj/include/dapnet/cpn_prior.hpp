// SPDX-License-Identifier: Apache-2.0
#pragma once

// Category prior decision logic: per-(category, level) training labels for
// count regression, the multi-task count loss, and test-time count decoding.
// Categories here are 0-based object classes (no background slot); callers
// that label detections with 1-based categories map category k to index k-1.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dapnet/detail/random.hpp"
#include "dapnet/errors.hpp"
#include "dapnet/losses.hpp"

namespace dapnet {

/// Reference object counts the regression is anchored to.
struct BaseLevels {
  std::vector<int> values;

  static BaseLevels standard() { return {{1, 2, 4, 8, 16, 24, 32, 48, 64}}; }

  std::size_t size() const { return values.size(); }
  int operator[](std::size_t e) const { return values[e]; }

  void validate() const {
    if (values.empty()) throw InvariantError("base levels: at least one level required");
    for (std::size_t e = 0; e < values.size(); ++e) {
      if (values[e] < 1) throw InvariantError("base levels: every level must be >= 1");
      if (e > 0 && values[e] <= values[e - 1]) throw InvariantError("base levels: must be strictly increasing");
    }
  }
};

/// Per-category object counts, indexed by 0-based category.
struct CategoryCounts {
  std::vector<double> values;

  CategoryCounts() = default;
  explicit CategoryCounts(std::vector<double> v) : values(std::move(v)) {}
  explicit CategoryCounts(std::size_t num_categories) : values(num_categories, 0.0) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t c) { return values[c]; }
  double operator[](std::size_t c) const { return values[c]; }
};

enum class LevelStatus { kUnsampled, kPositive, kNegative, kIgnored };

inline const char* to_string(LevelStatus s) {
  switch (s) {
    case LevelStatus::kPositive: return "positive";
    case LevelStatus::kNegative: return "negative";
    case LevelStatus::kIgnored: return "ignored";
    case LevelStatus::kUnsampled: return "unsampled";
  }
  return "unsampled";
}

struct LevelLabel {
  LevelStatus status = LevelStatus::kUnsampled;
  double diff = 0.0;
  double target = 0.0;  // log-count offset; meaningful only for positives
};

/// Training labels for a C x E grid of (category, level) cells.
struct CountLevelAssignment {
  std::size_t num_categories = 0;
  std::size_t num_levels = 0;
  std::vector<LevelLabel> cells;  // row-major: category, then level

  const LevelLabel& at(std::size_t c, std::size_t e) const { return cells[c * num_levels + e]; }
  LevelLabel& at(std::size_t c, std::size_t e) { return cells[c * num_levels + e]; }

  std::size_t count(LevelStatus s) const {
    std::size_t n = 0;
    for (const auto& cell : cells) n += cell.status == s;
    return n;
  }
  std::size_t num_positive() const { return count(LevelStatus::kPositive); }
  std::size_t num_negative() const { return count(LevelStatus::kNegative); }
};

/// Raw CPN outputs: for each (category, level) an object logit, a
/// not-object logit, and a log-count regression value.
struct CpnPrediction {
  static constexpr std::size_t kChannels = 3;

  std::size_t num_categories = 0;
  std::size_t num_levels = 0;
  std::vector<double> data;  // C x E x 3

  CpnPrediction() = default;
  CpnPrediction(std::size_t c, std::size_t e) : num_categories(c), num_levels(e), data(c * e * kChannels, 0.0) {}

  static CpnPrediction from_flat(std::size_t c, std::size_t e, std::span<const double> flat) {
    if (flat.size() != c * e * kChannels) throw InvariantError("cpn prediction: flat size mismatch");
    CpnPrediction p(c, e);
    std::copy(flat.begin(), flat.end(), p.data.begin());
    return p;
  }

  std::size_t offset(std::size_t c, std::size_t e) const { return (c * num_levels + e) * kChannels; }
  double& object_score(std::size_t c, std::size_t e) { return data[offset(c, e)]; }
  double& background_score(std::size_t c, std::size_t e) { return data[offset(c, e) + 1]; }
  double& regression(std::size_t c, std::size_t e) { return data[offset(c, e) + 2]; }
  double object_score(std::size_t c, std::size_t e) const { return data[offset(c, e)]; }
  double background_score(std::size_t c, std::size_t e) const { return data[offset(c, e) + 1]; }
  double regression(std::size_t c, std::size_t e) const { return data[offset(c, e) + 2]; }

  /// Softmax probability of the object class for one cell.
  double object_probability(std::size_t c, std::size_t e) const {
    return 1.0 / (1.0 + std::exp(background_score(c, e) - object_score(c, e)));
  }
};

/// (G - B/2)(2B - G) / B^2. Positive exactly when B/2 < G < 2B.
inline double level_diff(double gt_count, double base) {
  return (gt_count - base / 2.0) * (base * 2.0 - gt_count) / (base * base);
}

/// True when G/B lies in [1/4, 1/2] or [2, 4] (closed bands).
inline bool in_ignore_band(double gt_count, double base) {
  const bool low = 4.0 * gt_count >= base && 2.0 * gt_count <= base;
  const bool high = gt_count >= 2.0 * base && gt_count <= 4.0 * base;
  return low || high;
}

inline double encode_count(double gt_count, double base) {
  if (!(gt_count >= 1.0)) throw InvariantError("encode_count: ground-truth count must be >= 1");
  if (!(base >= 1.0)) throw InvariantError("encode_count: base must be >= 1");
  return std::log(gt_count / base);
}

inline double decode_count(double offset, double base) { return base * std::exp(offset); }

/// Labels every (category, level) cell. Levels with positive diff are
/// positives for categories present in the image; levels in an ignore band
/// are ignored; every other cell (absent categories included) joins the
/// negative pool, from which min(neg_ratio * #positives, pool) cells are
/// drawn uniformly under `seed`.
inline CountLevelAssignment assign_count_levels(const CategoryCounts& gt_counts, const BaseLevels& levels,
                                                std::uint64_t seed, std::size_t neg_ratio = 3) {
  levels.validate();
  for (double g : gt_counts.values) {
    if (!std::isfinite(g) || g < 0.0) throw InvariantError("assign_count_levels: counts must be finite and >= 0");
    if (g != std::floor(g)) throw InvariantError("assign_count_levels: non-integral count " + std::to_string(g));
  }

  CountLevelAssignment out;
  out.num_categories = gt_counts.size();
  out.num_levels = levels.size();
  out.cells.resize(out.num_categories * out.num_levels);

  std::vector<std::size_t> pool;
  std::size_t positives = 0;
  for (std::size_t c = 0; c < out.num_categories; ++c) {
    const double g = gt_counts[c];
    for (std::size_t e = 0; e < out.num_levels; ++e) {
      const double b = levels[e];
      LevelLabel& cell = out.at(c, e);
      cell.diff = level_diff(g, b);
      if (g > 0.0 && in_ignore_band(g, b)) {
        cell.status = LevelStatus::kIgnored;
      } else if (g > 0.0 && cell.diff > 0.0) {
        cell.status = LevelStatus::kPositive;
        cell.target = encode_count(g, b);
        ++positives;
      } else {
        pool.push_back(c * out.num_levels + e);
      }
    }
  }

  detail::Rng rng(seed);
  for (std::size_t k : detail::sample_without_replacement(pool.size(), neg_ratio * positives, rng))
    out.cells[pool[k]].status = LevelStatus::kNegative;
  return out;
}

/// Classification log loss averaged over sampled cells plus alpha times the
/// smooth-L1 count regression averaged over positive cells. The gradient is
/// laid out like CpnPrediction::data.
inline ValueGrad cpn_loss(const CpnPrediction& pred, const CountLevelAssignment& assign, double alpha = 1.0) {
  if (pred.num_categories != assign.num_categories || pred.num_levels != assign.num_levels)
    throw InvariantError("cpn_loss: prediction and assignment shapes differ");
  if (!(alpha >= 0.0)) throw InvariantError("cpn_loss: alpha must be >= 0");
  const std::size_t n_pos = assign.num_positive();
  const std::size_t n_cls = n_pos + assign.num_negative();
  if (n_cls == 0) throw InvariantError("cpn_loss: no positive or negative cells to normalize over");

  ValueGrad out;
  out.grad.assign(pred.data.size(), 0.0);
  double cls_sum = 0.0;
  double reg_sum = 0.0;
  for (std::size_t c = 0; c < pred.num_categories; ++c) {
    for (std::size_t e = 0; e < pred.num_levels; ++e) {
      const LevelLabel& cell = assign.at(c, e);
      if (cell.status != LevelStatus::kPositive && cell.status != LevelStatus::kNegative) continue;
      const std::size_t o = pred.offset(c, e);
      const std::array<double, 2> scores{pred.data[o], pred.data[o + 1]};
      const ValueGrad cls = binary_log_loss(scores, cell.status == LevelStatus::kPositive ? 0 : 1);
      cls_sum += cls.value;
      out.grad[o] += cls.grad[0] / static_cast<double>(n_cls);
      out.grad[o + 1] += cls.grad[1] / static_cast<double>(n_cls);
      if (cell.status == LevelStatus::kPositive) {
        const ValueGrad reg = smooth_l1(pred.data[o + 2] - cell.target);
        reg_sum += reg.value;
        out.grad[o + 2] += alpha * reg.grad[0] / static_cast<double>(n_pos);
      }
    }
  }
  out.value = cls_sum / static_cast<double>(n_cls);
  if (n_pos > 0) out.value += alpha * reg_sum / static_cast<double>(n_pos);
  return out;
}

/// Per category: mean decoded count over levels whose object probability
/// exceeds `score_threshold`, or 0 when none does.
inline CategoryCounts predict_counts(const CpnPrediction& pred, const BaseLevels& levels,
                                     double score_threshold = 0.7) {
  if (!(score_threshold > 0.0 && score_threshold < 1.0))
    throw InvariantError("predict_counts: threshold must lie in (0, 1)");
  if (pred.num_levels != levels.size()) throw InvariantError("predict_counts: level count mismatch");
  CategoryCounts counts(pred.num_categories);
  for (std::size_t c = 0; c < pred.num_categories; ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t e = 0; e < pred.num_levels; ++e) {
      if (pred.object_probability(c, e) > score_threshold) {
        sum += decode_count(pred.regression(c, e), levels[e]);
        ++n;
      }
    }
    counts[c] = n > 0 ? sum / static_cast<double>(n) : 0.0;
  }
  return counts;
}

}  // namespace dapnet
