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

#include "assoc3d/detection_head.hpp"
#include "assoc3d/kitti_io.hpp"
#include "assoc3d/network.hpp"

namespace assoc3d {

/// Everything needed to run the network and turn its maps into boxes.
struct DetectorConfig {
  net::NetworkConfig network = net::NetworkConfig::for_grid(voxel::GridConfig::kitti());
  head::AnchorConfig anchors;
  head::FocalParams focal;
  head::DecodeParams decode;

  std::vector<head::Anchor> make_anchors() const;
};

/// Boxes that take part in training and evaluation: not ignored and centred
/// inside the grid's BEV range.
std::vector<Box3D> active_boxes(const io::Scene& scene, const voxel::GridConfig& grid);

/// Inference on one cloud with frozen parameters.
std::vector<head::Detection> detect(const ad::ParameterSet& params, const PointCloud& cloud,
                                    const DetectorConfig& config, net::Branch branch);

/// Branch implied by a parameter set (PFE sets carry the offset layer).
net::Branch branch_of(const ad::ParameterSet& params);

}  // namespace assoc3d
