// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dapnet/detail/random.hpp"
#include "dapnet/detection.hpp"
#include "dapnet/errors.hpp"
#include "dapnet/geometry.hpp"
#include "dapnet/losses.hpp"

namespace dapnet {

struct AnchorLabel {
  Category category = kBackground;
  std::optional<std::size_t> matched_gt;
  BoxOffsets offsets;  // regression target, positives only
  bool sampled = false;
  double max_iou = 0.0;

  bool positive() const { return category != kBackground; }
};

struct AnchorLabelParams {
  double pos_iou = 0.5;
  double neg_iou = 0.3;
  std::size_t neg_ratio = 3;
  // Also mark each ground truth's best anchor positive, even below pos_iou.
  bool match_best_anchor = false;

  void validate() const {
    if (!(pos_iou > 0.0 && pos_iou < 1.0) || !(neg_iou > 0.0 && neg_iou < 1.0))
      throw InvariantError("label_anchors: IoU thresholds must lie in (0, 1)");
    if (neg_iou > pos_iou) throw InvariantError("label_anchors: neg_iou must not exceed pos_iou");
  }
};

/// Multi-class anchor labeling. An anchor whose best IoU exceeds pos_iou
/// takes the category of that ground truth (lowest index on ties); anchors
/// below neg_iou against every ground truth form the negative pool, of which
/// min(neg_ratio * #positives, pool) are sampled under `seed`. Anchors in
/// between stay unsampled.
inline std::vector<AnchorLabel> label_anchors(std::span<const Box> anchors, std::span<const GroundTruth> gts,
                                              const AnchorLabelParams& params, std::uint64_t seed) {
  if (anchors.empty()) throw InvariantError("label_anchors: empty anchor list");
  params.validate();

  std::vector<AnchorLabel> labels(anchors.size());
  std::vector<std::size_t> pool;
  std::size_t positives = 0;

  auto make_positive = [&](std::size_t a, std::size_t g) {
    labels[a].category = gts[g].category;
    labels[a].matched_gt = g;
    labels[a].offsets = encode_box(anchors[a], gts[g].box);
    labels[a].sampled = true;
    ++positives;
  };

  for (std::size_t a = 0; a < anchors.size(); ++a) {
    double best = 0.0;
    std::optional<std::size_t> best_gt;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = iou(anchors[a], gts[g].box);
      if (!best_gt || v > best) {
        best = v;
        best_gt = g;
      }
    }
    labels[a].max_iou = best;
    if (best_gt && best > params.pos_iou) make_positive(a, *best_gt);
  }

  if (params.match_best_anchor) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      double best = 0.0;
      std::optional<std::size_t> best_anchor;
      for (std::size_t a = 0; a < anchors.size(); ++a) {
        const double v = iou(anchors[a], gts[g].box);
        if (v > best) {
          best = v;
          best_anchor = a;
        }
      }
      if (best_anchor && !labels[*best_anchor].positive()) make_positive(*best_anchor, g);
    }
  }

  for (std::size_t a = 0; a < anchors.size(); ++a)
    if (!labels[a].positive() && labels[a].max_iou < params.neg_iou) pool.push_back(a);

  detail::Rng rng(seed);
  for (std::size_t k : detail::sample_without_replacement(pool.size(), params.neg_ratio * positives, rng))
    labels[pool[k]].sampled = true;
  return labels;
}

/// Per-anchor class logits (C+1 wide, background first) and box offsets.
/// Flat layout used for gradients: all scores row-major, then all offsets.
struct FrpnPrediction {
  std::size_t num_anchors = 0;
  std::size_t num_classes = 0;  // including background
  std::vector<double> scores;   // num_anchors x num_classes
  std::vector<BoxOffsets> offsets;

  FrpnPrediction() = default;
  FrpnPrediction(std::size_t anchors, std::size_t classes)
      : num_anchors(anchors), num_classes(classes), scores(anchors * classes, 0.0), offsets(anchors) {}

  std::span<const double> class_scores(std::size_t a) const {
    return std::span<const double>(scores).subspan(a * num_classes, num_classes);
  }
  std::span<double> class_scores(std::size_t a) { return std::span<double>(scores).subspan(a * num_classes, num_classes); }

  std::size_t flat_size() const { return num_anchors * (num_classes + 4); }

  std::vector<double> flatten() const {
    std::vector<double> flat(scores);
    flat.reserve(flat_size());
    for (const auto& o : offsets) flat.insert(flat.end(), {o.dx, o.dy, o.dw, o.dh});
    return flat;
  }

  static FrpnPrediction from_flat(std::size_t anchors, std::size_t classes, std::span<const double> flat) {
    FrpnPrediction p(anchors, classes);
    if (flat.size() != p.flat_size()) throw InvariantError("frpn prediction: flat size mismatch");
    std::copy_n(flat.begin(), anchors * classes, p.scores.begin());
    auto rest = flat.subspan(anchors * classes);
    for (std::size_t a = 0; a < anchors; ++a)
      p.offsets[a] = {rest[4 * a], rest[4 * a + 1], rest[4 * a + 2], rest[4 * a + 3]};
    return p;
  }
};

namespace detail {

inline std::size_t matched_count(const FrpnPrediction& pred, std::span<const AnchorLabel> labels) {
  if (pred.num_anchors != labels.size()) throw InvariantError("frpn loss: prediction does not cover every anchor");
  std::size_t m = 0;
  for (const auto& l : labels) {
    if (l.positive()) {
      if (static_cast<std::size_t>(l.category) >= pred.num_classes)
        throw InvariantError("frpn loss: label category exceeds score width");
      ++m;
    }
  }
  if (m == 0) throw InvariantError("frpn loss: no matched anchors (M == 0)");
  return m;
}

}  // namespace detail

/// Softmax cross-entropy over sampled positives (their category) and sampled
/// negatives (background), normalized by the number of matched anchors M.
inline ValueGrad frpn_cls_loss(const FrpnPrediction& pred, std::span<const AnchorLabel> labels) {
  const double m = static_cast<double>(detail::matched_count(pred, labels));
  ValueGrad out;
  out.grad.assign(pred.flat_size(), 0.0);
  double sum = 0.0;
  for (std::size_t a = 0; a < labels.size(); ++a) {
    if (!labels[a].sampled) continue;
    const ValueGrad ce = softmax_ce(pred.class_scores(a), static_cast<std::size_t>(labels[a].category));
    sum += ce.value;
    for (std::size_t k = 0; k < pred.num_classes; ++k) out.grad[a * pred.num_classes + k] = ce.grad[k] / m;
  }
  out.value = sum / m;
  return out;
}

/// Smooth-L1 over the four offset components of every positive anchor,
/// normalized by M.
inline ValueGrad frpn_reg_loss(const FrpnPrediction& pred, std::span<const AnchorLabel> labels) {
  const double m = static_cast<double>(detail::matched_count(pred, labels));
  ValueGrad out;
  out.grad.assign(pred.flat_size(), 0.0);
  const std::size_t base = pred.num_anchors * pred.num_classes;
  double sum = 0.0;
  for (std::size_t a = 0; a < labels.size(); ++a) {
    if (!labels[a].positive()) continue;
    const BoxOffsets& p = pred.offsets[a];
    const BoxOffsets& t = labels[a].offsets;
    const std::array<double, 4> diff{p.dx - t.dx, p.dy - t.dy, p.dw - t.dw, p.dh - t.dh};
    for (std::size_t i = 0; i < 4; ++i) {
      const ValueGrad s = smooth_l1(diff[i]);
      sum += s.value;
      out.grad[base + 4 * a + i] = s.grad[0] / m;
    }
  }
  out.value = sum / m;
  return out;
}

/// cls + reg / beta. beta = 0.5 doubles the regression weight.
inline ValueGrad frpn_loss(const FrpnPrediction& pred, std::span<const AnchorLabel> labels, double beta = 0.5) {
  if (!(beta > 0.0)) throw InvariantError("frpn_loss: beta must be > 0");
  ValueGrad cls = frpn_cls_loss(pred, labels);
  const ValueGrad reg = frpn_reg_loss(pred, labels);
  cls.value += reg.value / beta;
  for (std::size_t i = 0; i < cls.grad.size(); ++i) cls.grad[i] += reg.grad[i] / beta;
  return cls;
}

}  // namespace dapnet
