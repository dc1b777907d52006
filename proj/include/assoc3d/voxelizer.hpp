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

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "assoc3d/tensor.hpp"
#include "assoc3d/types.hpp"

namespace assoc3d::voxel {

/// Which points a full voxel keeps.
enum class CapPolicy { kFirstArrived, kRandom };

struct GridConfig {
  std::array<double, 3> range_min{0.0, -40.0, -3.0};
  std::array<double, 3> range_max{70.4, 40.0, 1.0};
  std::array<double, 3> voxel_size{0.05, 0.05, 0.1};
  std::size_t max_points_per_voxel = 5;
  CapPolicy cap_policy = CapPolicy::kFirstArrived;
  std::uint64_t cap_seed = 0;

  /// 1408 x 1600 x 40 grid over the usual front-view KITTI crop.
  static GridConfig kitti();
  /// 64 x 64 x 8 grid (0.2 m x 0.2 m x 0.5 m voxels) for desk-scale runs.
  static GridConfig mini();

  /// Voxel counts along x, y, z.
  std::array<std::size_t, 3> dims() const;
  /// Throws std::invalid_argument unless every axis divides evenly.
  void validate() const;
};

/// (ix, iy, iz)
using Coord = std::array<int, 3>;

/// Active sites of a voxel grid. features is [coords.size(), channels].
struct SparseVoxelTensor {
  std::vector<Coord> coords;
  ad::Tensor features;
  std::array<std::size_t, 3> spatial_shape{0, 0, 0};

  std::size_t size() const { return coords.size(); }
  std::size_t channels() const { return features.rank() == 2 ? features.dim(1) : 0; }
};

/// Row-major linear index of a coordinate; increasing in lexicographic order.
inline std::int64_t linear_index(const Coord& c, const std::array<std::size_t, 3>& shape) {
  return (static_cast<std::int64_t>(c[0]) * static_cast<std::int64_t>(shape[1]) + c[1]) *
             static_cast<std::int64_t>(shape[2]) +
         c[2];
}

/// Mean-xyz voxel features (3 channels), voxels sorted by coordinate. Points
/// outside the range are dropped; each voxel averages at most
/// max_points_per_voxel points.
SparseVoxelTensor voxelize(const PointCloud& cloud, const GridConfig& grid);

}  // namespace assoc3d::voxel
