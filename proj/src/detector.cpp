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

#include "assoc3d/detector.hpp"

namespace assoc3d {

std::vector<head::Anchor> DetectorConfig::make_anchors() const {
  return head::generate_anchors(network.feature_height(), network.feature_width(), network.grid,
                                network.downsample(), anchors);
}

std::vector<Box3D> active_boxes(const io::Scene& scene, const voxel::GridConfig& grid) {
  std::vector<Box3D> out;
  for (const auto& obj : scene.objects) {
    if (obj.ignore) continue;
    const Box3D& b = obj.box;
    if (b.cx >= grid.range_min[0] && b.cx < grid.range_max[0] && b.cy >= grid.range_min[1] &&
        b.cy < grid.range_max[1]) {
      out.push_back(b);
    }
  }
  return out;
}

std::vector<head::Detection> detect(const ad::ParameterSet& params, const PointCloud& cloud,
                                    const DetectorConfig& config, net::Branch branch) {
  ad::Tape tape;
  const auto vars = net::bind(tape, params, false);
  const auto out = net::forward(tape, cloud, vars, config.network, branch);
  return head::decode_detections(out.cls_map.value(), out.reg_map.value(), config.make_anchors(), config.anchors,
                                 config.decode);
}

net::Branch branch_of(const ad::ParameterSet& params) {
  return params.count("adapt.offset.weight") ? net::Branch::kPfe : net::Branch::kCfg;
}

}  // namespace assoc3d
