// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "dapnet/cpn_prior.hpp"
#include "dapnet/errors.hpp"
#include "dapnet/eval_metrics.hpp"
#include "dapnet/frpn_assign.hpp"
#include "dapnet/geometry.hpp"
#include "dapnet/proposal_select.hpp"
#include "dapnet/scene_sim.hpp"

namespace dapnet {

/// Every tunable constant of a run. Defaults are the reference settings.
struct RunConfig {
  SceneSpec scene = SceneSpec::nwpu_vhr10();
  NoiseSpec noise;
  BaseLevels levels = BaseLevels::standard();
  double cpn_score_threshold = 0.7;
  std::size_t cpn_neg_ratio = 3;
  double alpha = 1.0;

  AnchorSpec anchors = AnchorSpec::standard();
  AnchorLabelParams anchor_labels;  // 0.5 / 0.3 / 3, no best-anchor fallback
  double beta = 0.5;

  NmsThresholds nms;  // 0.3 for every category
  bool apply_nms = true;
  double pos_factor = 100.0;
  std::size_t base_budget = 100;

  double eval_iou = 0.5;
  ApInterpolation interpolation = ApInterpolation::kAllPoint;

  std::optional<std::uint64_t> seed;

  void validate() const {
    scene.validate();
    noise.validate();
    levels.validate();
    anchors.validate();
    anchor_labels.validate();
    if (!(cpn_score_threshold > 0.0 && cpn_score_threshold < 1.0))
      throw InvariantError("config: cpn_score_threshold must lie in (0, 1)");
    if (!(alpha >= 0.0)) throw InvariantError("config: alpha must be >= 0");
    if (!(beta > 0.0)) throw InvariantError("config: beta must be > 0");
    if (!(pos_factor >= 1.0)) throw InvariantError("config: pos_factor must be >= 1");
    if (!(eval_iou > 0.0 && eval_iou < 1.0)) throw InvariantError("config: eval_iou must lie in (0, 1)");
    auto check_nms = [](double t) {
      if (!(t > 0.0 && t < 1.0)) throw InvariantError("config: NMS thresholds must lie in (0, 1)");
    };
    check_nms(nms.default_threshold);
    for (const auto& [c, t] : nms.per_category) check_nms(t);
  }
};

}  // namespace dapnet
