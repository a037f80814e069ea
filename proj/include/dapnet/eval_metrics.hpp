// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <ranges>
#include <span>
#include <tuple>
#include <vector>

#include "dapnet/detection.hpp"
#include "dapnet/errors.hpp"
#include "dapnet/geometry.hpp"

namespace dapnet {

struct MatchedDetection {
  std::size_t index = 0;  // position in the caller's detection list
  Category category = 1;
  double score = 0.0;
  bool true_positive = false;
  std::optional<std::size_t> gt_index;
};

struct MatchResult {
  std::vector<MatchedDetection> detections;  // score-descending
  std::vector<bool> gt_matched;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Greedy matching in descending score order (ties by index). A detection is
/// a true positive when its best-overlapping unmatched ground truth of the
/// same category has IoU above `iou_thresh`; that ground truth is consumed.
/// Everything else, including duplicates on consumed ground truths, is FP.
inline MatchResult match_detections(std::span<const ScoredDetection> dets, std::span<const GroundTruth> gts,
                                    double iou_thresh = 0.5) {
  if (!(iou_thresh > 0.0 && iou_thresh < 1.0)) throw InvariantError("match_detections: iou_thresh must lie in (0, 1)");
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  MatchResult out;
  out.gt_matched.assign(gts.size(), false);
  out.detections.reserve(dets.size());
  for (std::size_t i : order) {
    MatchedDetection m{i, dets[i].category, dets[i].score, false, std::nullopt};
    double best = iou_thresh;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (out.gt_matched[g] || gts[g].category != dets[i].category) continue;
      const double v = iou(dets[i].box, gts[g].box);
      if (v > best) {
        best = v;
        m.gt_index = g;
      }
    }
    if (m.gt_index) {
      m.true_positive = true;
      out.gt_matched[*m.gt_index] = true;
      ++out.tp;
    } else {
      ++out.fp;
    }
    out.detections.push_back(m);
  }
  out.fn = gts.size() - out.tp;
  return out;
}

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;

  friend bool operator==(const PrPoint&, const PrPoint&) = default;
};

/// One point per ranked detection: recall_k = TP_k / num_gts,
/// precision_k = TP_k / k. `ranked_tp` holds TP flags in rank order.
template <std::ranges::input_range R>
  requires std::convertible_to<std::ranges::range_value_t<R>, bool>
std::vector<PrPoint> precision_recall_curve(const R& ranked_tp, std::size_t num_gts) {
  if (num_gts == 0) throw InvariantError("precision_recall_curve: no ground truths, recall undefined");
  std::vector<PrPoint> curve;
  std::size_t tp = 0;
  std::size_t k = 0;
  for (const auto& flag : ranked_tp) {
    tp += static_cast<bool>(flag) ? 1 : 0;
    ++k;
    curve.push_back({static_cast<double>(tp) / static_cast<double>(num_gts),
                     static_cast<double>(tp) / static_cast<double>(k)});
  }
  return curve;
}

inline std::vector<PrPoint> precision_recall_curve(const MatchResult& match) {
  std::vector<bool> flags;
  flags.reserve(match.detections.size());
  for (const auto& d : match.detections) flags.push_back(d.true_positive);
  return precision_recall_curve(flags, match.gt_matched.size());
}

enum class ApInterpolation { kAllPoint, kElevenPoint };

/// Area under the precision envelope (running maximum from the right).
inline double average_precision(std::span<const PrPoint> curve, ApInterpolation mode = ApInterpolation::kAllPoint) {
  if (curve.empty()) return 0.0;
  std::vector<double> envelope(curve.size());
  double running = 0.0;
  for (std::size_t k = curve.size(); k-- > 0;) {
    running = std::max(running, curve[k].precision);
    envelope[k] = running;
  }
  if (mode == ApInterpolation::kElevenPoint) {
    double sum = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double r = t / 10.0;
      double best = 0.0;
      for (std::size_t k = 0; k < curve.size(); ++k)
        if (curve[k].recall >= r) best = std::max(best, curve[k].precision);
      sum += best;
    }
    return sum / 11.0;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    ap += (curve[k].recall - prev_recall) * envelope[k];
    prev_recall = curve[k].recall;
  }
  return std::clamp(ap, 0.0, 1.0);
}

inline double mean_ap(std::span<const double> aps) {
  if (aps.empty()) throw InvariantError("mean_ap: no categories with ground truth");
  return std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
}

struct CategoryReport {
  Category category = 1;
  std::size_t num_gt = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<PrPoint> curve;
  double ap = 0.0;
};

struct EvalReport {
  std::vector<CategoryReport> categories;  // ascending category, only those with ground truth
  double map = 0.0;
};

struct EvalImage {
  std::vector<ScoredDetection> detections;
  std::vector<GroundTruth> ground_truths;
};

/// Dataset-level evaluation. Detections are matched per image, then ranked
/// per category across images (score descending, ties by image then rank).
/// Categories without any ground truth are left out of the report and mAP.
inline EvalReport evaluate(std::span<const EvalImage> images, double iou_thresh = 0.5,
                           ApInterpolation mode = ApInterpolation::kAllPoint) {
  struct Ranked {
    double score;
    std::size_t image;
    std::size_t rank;
    bool tp;
  };
  std::map<Category, std::vector<Ranked>> ranked;
  std::map<Category, std::size_t> num_gt;

  for (std::size_t im = 0; im < images.size(); ++im) {
    for (const auto& g : images[im].ground_truths) ++num_gt[g.category];
    const MatchResult m = match_detections(images[im].detections, images[im].ground_truths, iou_thresh);
    for (std::size_t r = 0; r < m.detections.size(); ++r) {
      const auto& d = m.detections[r];
      ranked[d.category].push_back({d.score, im, r, d.true_positive});
    }
  }

  EvalReport report;
  std::vector<double> aps;
  for (const auto& [category, n] : num_gt) {
    auto& list = ranked[category];
    std::sort(list.begin(), list.end(), [](const Ranked& a, const Ranked& b) {
      if (a.score != b.score) return a.score > b.score;
      return std::tie(a.image, a.rank) < std::tie(b.image, b.rank);
    });
    std::vector<bool> flags;
    CategoryReport cr;
    cr.category = category;
    cr.num_gt = n;
    for (const auto& r : list) {
      flags.push_back(r.tp);
      r.tp ? ++cr.tp : ++cr.fp;
    }
    cr.fn = n - cr.tp;
    cr.curve = precision_recall_curve(flags, n);
    cr.ap = average_precision(cr.curve, mode);
    aps.push_back(cr.ap);
    report.categories.push_back(std::move(cr));
  }
  report.map = mean_ap(aps);
  return report;
}

}  // namespace dapnet
