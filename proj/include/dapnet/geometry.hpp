// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dapnet/errors.hpp"

namespace dapnet {

/// Axis-aligned rectangle in continuous image coordinates (pixels).
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  bool valid() const {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
           std::isfinite(y_max) && x_min <= x_max && y_min <= y_max;
  }

  static Box from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Anchor tiling: every grid position gets |scales| * |ratios| anchors.
/// A ratio r means height:width = r:1.
struct AnchorSpec {
  std::vector<double> scales;
  std::vector<double> ratios;
  double stride = 16.0;

  std::size_t anchors_per_position() const { return scales.size() * ratios.size(); }

  /// Four scales (96, 128, 256, 512) and three ratios (1:1, 2:1, 1:2).
  static AnchorSpec standard() { return {{96.0, 128.0, 256.0, 512.0}, {1.0, 2.0, 0.5}, 16.0}; }

  void validate() const {
    if (scales.empty() || ratios.empty()) throw InvariantError("anchor spec: scales and ratios must be nonempty");
    for (double s : scales)
      if (!(s > 0.0)) throw InvariantError("anchor spec: scales must be > 0");
    for (double r : ratios)
      if (!(r > 0.0)) throw InvariantError("anchor spec: ratios must be > 0");
    if (!(stride > 0.0)) throw InvariantError("anchor spec: stride must be > 0");
  }
};

/// Center/size regression target of a box relative to an anchor.
struct BoxOffsets {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;

  friend bool operator==(const BoxOffsets&, const BoxOffsets&) = default;
};

inline double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

/// Intersection over union; 0 when the union is empty.
inline double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Row-major over grid positions, then scale-major, ratio-minor.
inline std::vector<Box> generate_anchors(std::size_t grid_w, std::size_t grid_h, const AnchorSpec& spec) {
  spec.validate();
  std::vector<Box> anchors;
  anchors.reserve(grid_w * grid_h * spec.anchors_per_position());
  for (std::size_t gy = 0; gy < grid_h; ++gy) {
    for (std::size_t gx = 0; gx < grid_w; ++gx) {
      const double cx = (static_cast<double>(gx) + 0.5) * spec.stride;
      const double cy = (static_cast<double>(gy) + 0.5) * spec.stride;
      for (double s : spec.scales) {
        for (double r : spec.ratios) {
          const double root = std::sqrt(r);
          anchors.push_back(Box::from_center(cx, cy, s / root, s * root));
        }
      }
    }
  }
  return anchors;
}

inline BoxOffsets encode_box(const Box& anchor, const Box& target) {
  if (!(anchor.width() > 0.0 && anchor.height() > 0.0))
    throw InvariantError("encode_box: anchor must have positive width and height");
  if (!(target.width() > 0.0 && target.height() > 0.0))
    throw InvariantError("encode_box: degenerate ground-truth box");
  return {(target.center_x() - anchor.center_x()) / anchor.width(),
          (target.center_y() - anchor.center_y()) / anchor.height(),
          std::log(target.width() / anchor.width()), std::log(target.height() / anchor.height())};
}

inline Box decode_box(const Box& anchor, const BoxOffsets& t) {
  const double w = anchor.width();
  const double h = anchor.height();
  return Box::from_center(anchor.center_x() + t.dx * w, anchor.center_y() + t.dy * h, w * std::exp(t.dw),
                          h * std::exp(t.dh));
}

/// Boundary-inclusive containment in a [0, image_w] x [0, image_h] image.
inline bool is_inside(const Box& b, double image_w, double image_h) {
  return b.x_min >= 0.0 && b.y_min >= 0.0 && b.x_max <= image_w && b.y_max <= image_h;
}

}  // namespace dapnet
