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

#include "assoc3d/voxelizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace assoc3d::voxel {

GridConfig GridConfig::kitti() { return GridConfig{}; }

GridConfig GridConfig::mini() {
  GridConfig g;
  g.range_min = {0.0, -6.4, -3.0};
  g.range_max = {12.8, 6.4, 1.0};
  g.voxel_size = {0.2, 0.2, 0.5};
  return g;
}

std::array<std::size_t, 3> GridConfig::dims() const {
  std::array<std::size_t, 3> out{};
  for (int d = 0; d < 3; ++d) {
    out[d] = static_cast<std::size_t>(std::llround((range_max[d] - range_min[d]) / voxel_size[d]));
  }
  return out;
}

void GridConfig::validate() const {
  if (max_points_per_voxel < 1) throw std::invalid_argument("max_points_per_voxel must be >= 1");
  for (int d = 0; d < 3; ++d) {
    if (!(voxel_size[d] > 0.0) || !(range_max[d] > range_min[d])) {
      throw std::invalid_argument("grid axis " + std::to_string(d) + " has an empty range or voxel size");
    }
    const double cells = (range_max[d] - range_min[d]) / voxel_size[d];
    if (std::abs(cells - std::round(cells)) > 1e-6) {
      throw std::invalid_argument("grid axis " + std::to_string(d) + " range is not a whole number of voxels");
    }
  }
}

SparseVoxelTensor voxelize(const PointCloud& cloud, const GridConfig& grid) {
  grid.validate();
  const auto shape = grid.dims();

  struct Slot {
    Coord coord;
    std::size_t seen = 0;
    std::vector<std::size_t> kept;
  };
  std::unordered_map<std::int64_t, Slot> slots;
  std::mt19937_64 rng(grid.cap_seed);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud[i];
    const std::array<double, 3> xyz{p.x, p.y, p.z};
    Coord c{};
    bool inside = true;
    for (int d = 0; d < 3 && inside; ++d) {
      if (!(xyz[d] >= grid.range_min[d] && xyz[d] < grid.range_max[d])) {
        inside = false;
        break;
      }
      const auto idx = static_cast<long>(std::floor((xyz[d] - grid.range_min[d]) / grid.voxel_size[d]));
      if (idx < 0 || idx >= static_cast<long>(shape[d])) inside = false;
      c[d] = static_cast<int>(idx);
    }
    if (!inside) continue;
    Slot& slot = slots[linear_index(c, shape)];
    slot.coord = c;
    ++slot.seen;
    if (slot.kept.size() < grid.max_points_per_voxel) {
      slot.kept.push_back(i);
    } else if (grid.cap_policy == CapPolicy::kRandom) {
      // Reservoir sampling keeps a uniform subset of everything seen.
      std::uniform_int_distribution<std::size_t> pick(0, slot.seen - 1);
      const std::size_t j = pick(rng);
      if (j < slot.kept.size()) slot.kept[j] = i;
    }
  }

  std::vector<std::int64_t> keys;
  keys.reserve(slots.size());
  for (const auto& [key, slot] : slots) keys.push_back(key);
  std::sort(keys.begin(), keys.end());

  SparseVoxelTensor out;
  out.spatial_shape = shape;
  out.coords.reserve(keys.size());
  out.features = ad::Tensor({keys.size(), 3}, 0.0);
  for (std::size_t v = 0; v < keys.size(); ++v) {
    const Slot& slot = slots.at(keys[v]);
    out.coords.push_back(slot.coord);
    std::vector<std::size_t> kept = slot.kept;
    std::sort(kept.begin(), kept.end());
    double sx = 0.0;
    double sy = 0.0;
    double sz = 0.0;
    for (std::size_t idx : kept) {
      sx += cloud[idx].x;
      sy += cloud[idx].y;
      sz += cloud[idx].z;
    }
    const double n = static_cast<double>(kept.size());
    out.features[v * 3 + 0] = sx / n;
    out.features[v * 3 + 1] = sy / n;
    out.features[v * 3 + 2] = sz / n;
  }
  return out;
}

}  // namespace assoc3d::voxel
