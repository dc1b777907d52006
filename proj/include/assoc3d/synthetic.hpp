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

#include <cstdint>
#include <vector>

#include "assoc3d/kitti_io.hpp"
#include "assoc3d/voxelizer.hpp"

namespace assoc3d::synth {

/// Procedural scenes of box-shaped cars on a flat ground seen from a sensor
/// at the origin.
struct SyntheticConfig {
  std::size_t scenes = 10;
  std::uint64_t seed = 7;
  voxel::GridConfig grid = voxel::GridConfig::mini();
  std::size_t min_cars = 1;
  std::size_t max_cars = 3;
  double ground_z = -1.75;
  /// Surface samples per square metre at `reference_range` metres.
  double density = 60.0;
  double reference_range = 5.0;
  std::size_t ground_points = 1200;
  /// Remove points hidden behind other cars.
  bool shadowing = true;
  /// Per car: chance of random thinning and of a cut-away occluder.
  double sparsity_probability = 0.0;
  double occlusion_probability = 0.0;
};

/// Samples on the faces of `car` that face the origin, inset 1 cm.
PointCloud sample_car(const Box3D& car, double density, double reference_range, std::uint64_t seed);

/// True when the open segment from the origin to `p` passes through `box`.
bool segment_hits_box(const Point& p, const Box3D& box);

io::Scene generate_scene(const SyntheticConfig& config, std::size_t index);
std::vector<io::Scene> generate_dataset(const SyntheticConfig& config);

}  // namespace assoc3d::synth
