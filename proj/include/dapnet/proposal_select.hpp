// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "dapnet/cpn_prior.hpp"
#include "dapnet/detection.hpp"
#include "dapnet/errors.hpp"
#include "dapnet/geometry.hpp"
#include "dapnet/losses.hpp"

namespace dapnet {

/// A proposal before filtering: box plus C+1 class logits (background first).
struct RawProposal {
  Box box;
  std::vector<double> class_scores;
};

/// Drops background-argmax proposals and proposals not inside the image.
/// Survivors carry their argmax category and its softmax probability.
inline std::vector<ScoredDetection> score_filter(std::span<const RawProposal> raw, double image_w, double image_h) {
  std::vector<ScoredDetection> out;
  for (const auto& p : raw) {
    if (p.class_scores.empty()) continue;
    const auto best = std::max_element(p.class_scores.begin(), p.class_scores.end());
    const auto category = static_cast<Category>(std::distance(p.class_scores.begin(), best));
    if (category == kBackground) continue;
    if (!is_inside(p.box, image_w, image_h)) continue;
    out.push_back({p.box, category, softmax(p.class_scores)[static_cast<std::size_t>(category)]});
  }
  return out;
}

struct NmsThresholds {
  double default_threshold = 0.3;
  std::map<Category, double> per_category;

  double of(Category c) const {
    auto it = per_category.find(c);
    return it == per_category.end() ? default_threshold : it->second;
  }
};

namespace detail {

/// Indices sorted by score descending, ties by lower index.
inline std::vector<std::size_t> score_order(std::span<const ScoredDetection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

}  // namespace detail

/// Greedy NMS run independently inside every category. Returns the kept
/// indices in ascending order.
inline std::vector<std::size_t> category_nms_indices(std::span<const ScoredDetection> dets,
                                                     const NmsThresholds& thresholds = {}) {
  std::map<Category, std::vector<std::size_t>> by_category;
  for (std::size_t i : detail::score_order(dets)) by_category[dets[i].category].push_back(i);

  std::vector<std::size_t> keep;
  for (const auto& [category, order] : by_category) {
    const double thr = thresholds.of(category);
    std::vector<bool> suppressed(order.size(), false);
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (suppressed[i]) continue;
      keep.push_back(order[i]);
      const Box& kept = dets[order[i]].box;
      for (std::size_t j = i + 1; j < order.size(); ++j)
        if (!suppressed[j] && iou(kept, dets[order[j]].box) > thr) suppressed[j] = true;
    }
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

/// Same as category_nms_indices, returning the kept detections in input order.
inline std::vector<ScoredDetection> category_nms(std::span<const ScoredDetection> dets,
                                                 const NmsThresholds& thresholds = {}) {
  std::vector<ScoredDetection> out;
  for (std::size_t i : category_nms_indices(dets, thresholds)) out.push_back(dets[i]);
  return out;
}

/// Proposal cap per 1-based category; categories outside the table get the floor.
struct CategoryBudget {
  std::vector<std::size_t> per_category;
  std::size_t floor = 100;

  std::size_t of(Category c) const {
    if (c >= 1 && static_cast<std::size_t>(c) <= per_category.size()) return per_category[c - 1];
    return floor;
  }

  std::size_t total() const { return std::accumulate(per_category.begin(), per_category.end(), std::size_t{0}); }

  static CategoryBudget fixed(std::size_t num_categories, std::size_t per_category_cap) {
    return {std::vector<std::size_t>(num_categories, per_category_cap), per_category_cap};
  }
};

/// budget_c = max(base, round_half_up(count_c) * pos_factor).
inline CategoryBudget adaptive_budget(const CategoryCounts& counts, double pos_factor = 100.0,
                                      std::size_t base = 100) {
  if (!(pos_factor >= 1.0)) throw InvariantError("adaptive_budget: pos_factor must be >= 1");
  CategoryBudget budget{std::vector<std::size_t>(counts.size()), base};
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double count = counts[c];
    if (!std::isfinite(count) || count < 0.0) throw InvariantError("adaptive_budget: counts must be finite and >= 0");
    const double scaled = std::floor(count + 0.5) * pos_factor;
    budget.per_category[c] = std::max(base, static_cast<std::size_t>(std::llround(scaled)));
  }
  return budget;
}

/// Keeps the top-budget detections of every category. Output is ordered by
/// category, then by descending score (ties by lower input index).
inline std::vector<ScoredDetection> select_proposals(std::span<const ScoredDetection> dets,
                                                     const CategoryBudget& budget) {
  std::map<Category, std::vector<std::size_t>> by_category;
  for (std::size_t i : detail::score_order(dets)) by_category[dets[i].category].push_back(i);

  std::vector<ScoredDetection> out;
  for (const auto& [category, order] : by_category) {
    const std::size_t n = std::min(order.size(), budget.of(category));
    for (std::size_t k = 0; k < n; ++k) out.push_back(dets[order[k]]);
  }
  return out;
}

}  // namespace dapnet
