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

#ifndef PCL_IMAGE_HPP
#define PCL_IMAGE_HPP

#include <string>
#include <vector>

#include "pcl/geometry.hpp"
#include "pcl/model.hpp"

namespace pcl {

/// What training sees of an image: proposals, their raw features and the
/// image-level label vector. No object boxes.
struct TrainImage {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<int> labels;  // length C, entries 0/1
  std::vector<BBox> proposals;
  Matrix features;          // R x raw_dim

  int num_proposals() const { return static_cast<int>(proposals.size()); }
  bool has_positive() const {
    for (int y : labels)
      if (y == 1) return true;
    return false;
  }
};

}  // namespace pcl

#endif  // PCL_IMAGE_HPP
