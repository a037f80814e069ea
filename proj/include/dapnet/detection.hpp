// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dapnet/geometry.hpp"

namespace dapnet {

/// Object categories are 1-based; 0 is reserved for background.
using Category = int;
inline constexpr Category kBackground = 0;

struct GroundTruth {
  Category category = 1;
  Box box;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct ScoredDetection {
  Box box;
  Category category = 1;
  double score = 0.0;

  friend bool operator==(const ScoredDetection&, const ScoredDetection&) = default;
};

}  // namespace dapnet
