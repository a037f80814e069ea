// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <future>
#include <thread>
#include <vector>

#include "dapnet/config.hpp"
#include "dapnet/cpn_prior.hpp"
#include "dapnet/detail/random.hpp"
#include "dapnet/eval_metrics.hpp"
#include "dapnet/proposal_select.hpp"
#include "dapnet/scene_sim.hpp"

namespace dapnet {

struct PipelineImage {
  Scene scene;
  CategoryCounts predicted_counts;
  CategoryBudget budget;
  std::size_t num_candidates = 0;
  std::vector<ScoredDetection> selected;
};

struct PipelineResult {
  std::vector<PipelineImage> images;
  EvalReport report;
};

/// One synthetic image: scene -> oracle prior -> counts -> budget ->
/// pseudo-detections -> (category NMS) -> per-category selection.
inline PipelineImage run_pipeline_image(const RunConfig& cfg, std::uint64_t image_seed) {
  PipelineImage out;
  out.scene = sample_scene(cfg.scene, detail::mix_seed(image_seed, 0));
  const CpnPrediction prior = oracle_cpn_prediction(out.scene.counts, cfg.levels);
  out.predicted_counts = predict_counts(prior, cfg.levels, cfg.cpn_score_threshold);
  out.budget = adaptive_budget(out.predicted_counts, cfg.pos_factor, cfg.base_budget);

  std::vector<ScoredDetection> dets = perturb_detections(out.scene, cfg.noise, detail::mix_seed(image_seed, 1));
  out.num_candidates = dets.size();
  if (cfg.apply_nms) dets = category_nms(dets, cfg.nms);
  out.selected = select_proposals(dets, out.budget);
  return out;
}

/// Runs `num_images` independent images (seeded from `seed`) on up to
/// `threads` workers and evaluates the selected detections. Output does not
/// depend on the thread count.
inline PipelineResult run_pipeline(const RunConfig& cfg, std::uint64_t seed, std::size_t num_images,
                                   std::size_t threads = 0) {
  cfg.validate();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(num_images, 1));

  PipelineResult result;
  result.images.resize(num_images);
  std::vector<std::future<void>> workers;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.push_back(std::async(std::launch::async, [&, t] {
      for (std::size_t i = t; i < num_images; i += threads)
        result.images[i] = run_pipeline_image(cfg, detail::mix_seed(seed, i));
    }));
  }
  for (auto& w : workers) w.get();

  std::vector<EvalImage> eval(num_images);
  for (std::size_t i = 0; i < num_images; ++i)
    eval[i] = {result.images[i].selected, result.images[i].scene.objects};
  result.report = evaluate(eval, cfg.eval_iou, cfg.interpolation);
  return result;
}

}  // namespace dapnet
