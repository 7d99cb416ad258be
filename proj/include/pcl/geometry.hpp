// Copyright 2026 The PCL Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PCL_GEOMETRY_HPP
#define PCL_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "pcl/error.hpp"

namespace pcl {

/// Axis-aligned box in continuous image coordinates.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 1.0;
  double y2 = 1.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }

  bool valid() const noexcept {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x1 < x2 && y1 < y2;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Throws ConfigError if `b` has non-positive area or non-finite coordinates.
inline const BBox& checked(const BBox& b) {
  if (!b.valid()) throw ConfigError("invalid box: requires finite x1 < x2, y1 < y2");
  return b;
}

/// Area of the intersection, 0 when disjoint.
inline double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

/// Continuous intersection-over-union. Symmetric, and exactly 1 for a == b.
inline double iou(const BBox& a, const BBox& b) noexcept {
  if (a == b) return 1.0;
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

/// A scored box for one object class (1-based).
struct Detection {
  BBox box;
  int class_id = 1;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Greedy non-maximum suppression over detections of a single class.
///
/// Output is sorted by descending score; equal scores keep input order.
/// A detection is dropped when its IoU with an already kept one exceeds
/// `threshold`.
inline std::vector<Detection> nms(std::span<const Detection> dets, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("nms threshold must lie in (0,1)");
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });

  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const Detection& d = dets[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return iou(k.box, d.box) > threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

}  // namespace pcl

#endif  // PCL_GEOMETRY_HPP
