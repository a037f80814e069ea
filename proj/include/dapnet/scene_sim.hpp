// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic scenes with sparse and dense per-category counts, a noisy
// pseudo-detector, and a perfect stand-in for the category prior network.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dapnet/cpn_prior.hpp"
#include "dapnet/detail/random.hpp"
#include "dapnet/detection.hpp"
#include "dapnet/errors.hpp"
#include "dapnet/geometry.hpp"

namespace dapnet {

struct CategorySpec {
  std::string name;
  int min_count = 0;
  int max_count = 0;
  double min_size = 16.0;  // box side range in pixels
  double max_size = 64.0;
};

struct SceneSpec {
  double image_w = 1000.0;
  double image_h = 1000.0;
  std::vector<CategorySpec> categories;  // category k+1 is categories[k]
  double max_overlap_iou = 0.2;
  std::size_t max_retries = 10000;

  std::size_t num_categories() const { return categories.size(); }

  void validate() const {
    if (!(image_w > 0.0 && image_h > 0.0)) throw InvariantError("scene spec: image dimensions must be > 0");
    if (!(max_overlap_iou >= 0.0 && max_overlap_iou <= 1.0))
      throw InvariantError("scene spec: max_overlap_iou must lie in [0, 1]");
    for (const auto& c : categories) {
      if (c.min_count < 0 || c.min_count > c.max_count)
        throw InvariantError("scene spec: bad count range for category '" + c.name + "'");
      if (!(c.min_size > 0.0) || c.min_size > c.max_size)
        throw InvariantError("scene spec: bad size range for category '" + c.name + "'");
      if (c.max_size > image_w || c.max_size > image_h)
        throw InvariantError("scene spec: category '" + c.name + "' boxes do not fit in the image");
    }
  }

  /// Per-image count ranges of the ten-class VHR remote sensing benchmark
  /// (airplane up to 31, storage tank 6..63, ground track field exactly 1,
  /// vehicle 2..48, ...). Box sizes are synthetic.
  static SceneSpec nwpu_vhr10() {
    SceneSpec s;
    s.categories = {
        {"airplane", 1, 31, 30.0, 60.0},         {"ship", 1, 15, 20.0, 50.0},
        {"storage_tank", 6, 63, 15.0, 35.0},     {"baseball_diamond", 1, 8, 40.0, 80.0},
        {"tennis_court", 1, 24, 25.0, 50.0},     {"basketball_court", 1, 6, 35.0, 70.0},
        {"ground_track_field", 1, 1, 150.0, 280.0}, {"harbor", 3, 18, 35.0, 80.0},
        {"bridge", 1, 5, 50.0, 120.0},           {"vehicle", 2, 48, 10.0, 25.0},
    };
    return s;
  }
};

struct Scene {
  double image_w = 0.0;
  double image_h = 0.0;
  std::vector<GroundTruth> objects;
  CategoryCounts counts;  // counts[k] is the number of objects of category k+1
};

/// Draws a count per category uniformly in its range and places boxes by
/// rejection until every pairwise IoU is within the overlap policy.
inline Scene sample_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  detail::Rng rng(seed);
  Scene scene{spec.image_w, spec.image_h, {}, CategoryCounts(spec.num_categories())};

  std::vector<int> draws(spec.num_categories());
  for (std::size_t k = 0; k < spec.num_categories(); ++k)
    draws[k] = static_cast<int>(rng.between(spec.categories[k].min_count, spec.categories[k].max_count));

  // Largest boxes first so dense small categories fill the gaps.
  std::vector<std::size_t> order(spec.num_categories());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return spec.categories[a].max_size > spec.categories[b].max_size;
  });

  for (std::size_t k : order) {
    const CategorySpec& cat = spec.categories[k];
    for (int n = 0; n < draws[k]; ++n) {
      bool placed = false;
      for (std::size_t attempt = 0; attempt < spec.max_retries && !placed; ++attempt) {
        const double w = rng.uniform(cat.min_size, cat.max_size);
        const double h = rng.uniform(cat.min_size, cat.max_size);
        const double x = rng.uniform(0.0, spec.image_w - w);
        const double y = rng.uniform(0.0, spec.image_h - h);
        const Box box{x, y, x + w, y + h};
        placed = std::all_of(scene.objects.begin(), scene.objects.end(),
                             [&](const GroundTruth& g) { return iou(box, g.box) <= spec.max_overlap_iou; });
        if (placed) scene.objects.push_back({static_cast<Category>(k + 1), box});
      }
      if (!placed)
        throw PlacementError("sample_scene: could not place object " + std::to_string(n + 1) + " of category '" +
                             cat.name + "' within the retry bound");
    }
    scene.counts[k] = draws[k];
  }
  std::stable_sort(scene.objects.begin(), scene.objects.end(),
                   [](const GroundTruth& a, const GroundTruth& b) { return a.category < b.category; });
  return scene;
}

struct ScoreRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct NoiseSpec {
  double jitter_stddev = 0.0;        // per-coordinate, pixels
  ScoreRange true_score{0.6, 1.0};   // uniform draw for boxes on objects
  ScoreRange spurious_score{0.0, 0.6};
  double false_positive_rate = 0.0;  // per object, chance of one extra spurious box
  double miss_rate = 0.0;            // per object, chance of emitting nothing
  std::size_t candidates_per_object = 1;
  std::size_t extra_spurious = 0;    // spurious boxes per image, categories drawn from the scene

  void validate() const {
    if (!(jitter_stddev >= 0.0)) throw InvariantError("noise spec: jitter_stddev must be >= 0");
    if (!(false_positive_rate >= 0.0 && false_positive_rate <= 1.0) || !(miss_rate >= 0.0 && miss_rate <= 1.0))
      throw InvariantError("noise spec: rates must lie in [0, 1]");
    for (const ScoreRange& r : {true_score, spurious_score})
      if (!(r.lo >= 0.0 && r.lo <= r.hi && r.hi <= 1.0)) throw InvariantError("noise spec: score ranges must lie in [0, 1]");
    if (candidates_per_object == 0) throw InvariantError("noise spec: candidates_per_object must be >= 1");
  }
};

/// Pseudo-detector over a scene's ground truth. Jittered boxes are clamped
/// to the image so they survive containment filtering.
inline std::vector<ScoredDetection> perturb_detections(const Scene& scene, const NoiseSpec& noise, std::uint64_t seed) {
  noise.validate();
  detail::Rng rng(seed);
  std::vector<ScoredDetection> out;

  auto clamp_box = [&](Box b) {
    b.x_min = std::clamp(b.x_min, 0.0, scene.image_w - 1.0);
    b.y_min = std::clamp(b.y_min, 0.0, scene.image_h - 1.0);
    b.x_max = std::clamp(b.x_max, b.x_min + 1.0, scene.image_w);
    b.y_max = std::clamp(b.y_max, b.y_min + 1.0, scene.image_h);
    return b;
  };
  auto spurious = [&](Category category, double w, double h) {
    w = std::min(w, scene.image_w);
    h = std::min(h, scene.image_h);
    const double x = rng.uniform(0.0, scene.image_w - w);
    const double y = rng.uniform(0.0, scene.image_h - h);
    out.push_back({Box{x, y, x + w, y + h}, category, rng.uniform(noise.spurious_score.lo, noise.spurious_score.hi)});
  };

  for (const GroundTruth& g : scene.objects) {
    if (!rng.bernoulli(noise.miss_rate)) {
      for (std::size_t k = 0; k < noise.candidates_per_object; ++k) {
        Box b = g.box;
        if (noise.jitter_stddev > 0.0) {
          b.x_min += noise.jitter_stddev * rng.normal();
          b.y_min += noise.jitter_stddev * rng.normal();
          b.x_max += noise.jitter_stddev * rng.normal();
          b.y_max += noise.jitter_stddev * rng.normal();
          b = clamp_box(b);
        }
        out.push_back({b, g.category, rng.uniform(noise.true_score.lo, noise.true_score.hi)});
      }
    }
    if (rng.bernoulli(noise.false_positive_rate)) spurious(g.category, g.box.width(), g.box.height());
  }
  if (!scene.objects.empty()) {
    for (std::size_t k = 0; k < noise.extra_spurious; ++k) {
      const GroundTruth& like = scene.objects[rng.below(scene.objects.size())];
      spurious(like.category, like.box.width(), like.box.height());
    }
  }
  return out;
}

/// Perfect prior-network output: positive cells get object probability 1
/// and their exact log-count target; every other cell gets probability 0.
inline CpnPrediction oracle_cpn_prediction(const CategoryCounts& counts, const BaseLevels& levels) {
  constexpr double kLogit = 40.0;
  const CountLevelAssignment assign = assign_count_levels(counts, levels, 0);
  CpnPrediction pred(counts.size(), levels.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t e = 0; e < levels.size(); ++e) {
      const LevelLabel& cell = assign.at(c, e);
      const bool positive = cell.status == LevelStatus::kPositive;
      pred.object_score(c, e) = positive ? kLogit : -kLogit;
      pred.background_score(c, e) = positive ? -kLogit : kLogit;
      pred.regression(c, e) = positive ? cell.target : 0.0;
    }
  }
  return pred;
}

}  // namespace dapnet
