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

#ifndef PCL_GROUNDTRUTH_HPP
#define PCL_GROUNDTRUTH_HPP

#include <vector>

#include "pcl/geometry.hpp"

namespace pcl {

/// An annotated object. Evaluation only; never reachable from trainer.hpp.
struct GroundTruth {
  BBox box;
  int class_id = 1;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

using ImageGroundTruth = std::vector<GroundTruth>;

}  // namespace pcl

#endif  // PCL_GROUNDTRUTH_HPP
