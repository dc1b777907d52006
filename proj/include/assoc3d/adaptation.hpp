// Copyright 2026 The assoc3d Authors
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

#pragma once

#include <vector>

#include "assoc3d/tape.hpp"
#include "assoc3d/types.hpp"
#include "assoc3d/voxelizer.hpp"

namespace assoc3d::adapt {

using ad::Tensor;
using ad::Var;

/// [H, W] binary map at feature resolution. A pixel is set when a point of
/// `points` lying inside one of `boxes` falls in its footprint.
Tensor foreground_mask(const std::vector<Box3D>& boxes, const PointCloud& points, const voxel::GridConfig& grid,
                       std::size_t downsample);

/// offsets: [2N, H, W] -> [H, W], mean length of the N displacement pairs.
Tensor offset_length_map(const Tensor& offsets);

/// Product of the two maps divided by its maximum. An all-zero product stays
/// all-zero.
Tensor reweighting_map(const Tensor& offset_map, const Tensor& fg_mask);

/// Denominator of the association loss.
enum class PixelCount {
  kForeground,       // pixels of the foreground mask
  kReweightSupport,  // non-zero pixels of the reweighting map
};

/// Mean over counted pixels of |F_p - F_c|_2 * (1 + reweight). F_c is a
/// constant target; pixels outside the counted set contribute nothing.
/// Returns a zero scalar when no pixel is counted.
Var association_loss(const Var& perceptual, const Tensor& conceptual, const Tensor& reweight, const Tensor& fg_mask,
                     PixelCount count = PixelCount::kForeground);

}  // namespace assoc3d::adapt
