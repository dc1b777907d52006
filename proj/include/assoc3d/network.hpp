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
#include <map>
#include <string>
#include <vector>

#include "assoc3d/checkpoint.hpp"
#include "assoc3d/sparse_conv.hpp"
#include "assoc3d/tape.hpp"
#include "assoc3d/types.hpp"
#include "assoc3d/voxelizer.hpp"

namespace assoc3d::net {

using ad::ParameterSet;
using ad::Tape;
using ad::Var;

enum class Branch { kPfe, kCfg };

struct StageConfig {
  std::size_t channels = 16;
  /// Downsampling convolution closing the stage (strided mode).
  sparse::KernelSpec down;
};

struct NetworkConfig {
  voxel::GridConfig grid = voxel::GridConfig::kitti();
  std::size_t point_feature_channels = 128;
  std::vector<StageConfig> stages;
  std::size_t deform_kernel = 5;
  std::size_t adapt_channels = 128;
  std::size_t head_channels = 128;
  std::size_t anchors_per_location = 2;
  /// Prior probability used to initialise the classification bias.
  double cls_prior = 0.01;

  /// Stage layout that downsamples x/y by 8 and leaves a small z extent.
  static NetworkConfig for_grid(const voxel::GridConfig& grid);

  /// Grid extent after every backbone stage, (x, y, z).
  sparse::Extent backbone_extent() const;
  std::size_t bev_channels() const;
  std::size_t feature_height() const;
  std::size_t feature_width() const;
  /// Ratio of the voxel grid to the feature map along x and y.
  std::size_t downsample() const;
  void validate() const;
};

/// Parameter names and shapes for one branch, in initialisation order.
std::vector<std::pair<std::string, ad::Shape>> parameter_layout(const NetworkConfig& config, Branch branch);

/// He-normal weights, zero biases, prior-initialised classification bias and
/// a zero offset branch.
ParameterSet init_parameters(const NetworkConfig& config, Branch branch, std::uint64_t seed);

/// Leaves on `tape` for every tensor in `params`.
std::map<std::string, Var> bind(Tape& tape, const ParameterSet& params, bool requires_grad);

struct ForwardOutput {
  Var cls_map;        // [A, H, W]
  Var reg_map;        // [7A, H, W]
  Var adapt_feature;  // [adapt_channels, H, W], post-ReLU
  Var offsets;        // [2*k*k, H, W]; invalid for the CFG branch
  std::size_t voxel_count = 0;
};

ForwardOutput forward(Tape& tape, const PointCloud& cloud, const std::map<std::string, Var>& params,
                      const NetworkConfig& config, Branch branch);

inline ForwardOutput pfe_forward(Tape& tape, const PointCloud& cloud, const std::map<std::string, Var>& params,
                                 const NetworkConfig& config) {
  return forward(tape, cloud, params, config, Branch::kPfe);
}

inline ForwardOutput cfg_forward(Tape& tape, const PointCloud& cloud, const std::map<std::string, Var>& params,
                                 const NetworkConfig& config) {
  return forward(tape, cloud, params, config, Branch::kCfg);
}

}  // namespace assoc3d::net
