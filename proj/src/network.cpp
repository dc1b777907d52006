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

#include "assoc3d/network.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>

#include "assoc3d/ops.hpp"

namespace assoc3d::net {

using ad::Shape;
using ad::Tensor;

NetworkConfig NetworkConfig::for_grid(const voxel::GridConfig& grid) {
  NetworkConfig cfg;
  cfg.grid = grid;
  const auto dims = grid.dims();
  std::size_t z = dims[2];
  const std::size_t channels[4] = {16, 32, 64, 128};
  for (int i = 0; i < 4; ++i) {
    StageConfig stage;
    stage.channels = channels[i];
    stage.down.mode = sparse::ConvMode::kStrided;
    if (i < 3) {
      stage.down.size = {3, 3, 3};
      stage.down.stride = {2, 2, 2};
      stage.down.padding = {1, 1, 1};
      z = (z + 2 - 3) / 2 + 1;
    } else if (z >= 3) {
      stage.down.size = {3, 3, 3};
      stage.down.stride = {1, 1, 2};
      stage.down.padding = {1, 1, 0};
    } else {
      stage.down.size = {3, 3, 1};
      stage.down.stride = {1, 1, 1};
      stage.down.padding = {1, 1, 0};
    }
    cfg.stages.push_back(stage);
  }
  return cfg;
}

sparse::Extent NetworkConfig::backbone_extent() const {
  sparse::Extent e = grid.dims();
  for (const auto& s : stages) e = sparse::output_extent(e, s.down);
  return e;
}

std::size_t NetworkConfig::bev_channels() const {
  if (stages.empty()) throw std::invalid_argument("network needs at least one backbone stage");
  return stages.back().channels * backbone_extent()[2];
}

std::size_t NetworkConfig::feature_height() const { return backbone_extent()[1]; }
std::size_t NetworkConfig::feature_width() const { return backbone_extent()[0]; }

std::size_t NetworkConfig::downsample() const {
  const auto dims = grid.dims();
  const auto e = backbone_extent();
  if (e[0] == 0 || e[1] == 0 || dims[0] % e[0] != 0 || dims[1] % e[1] != 0 || dims[0] / e[0] != dims[1] / e[1]) {
    throw std::invalid_argument("backbone must downsample x and y by the same integer factor");
  }
  return dims[0] / e[0];
}

void NetworkConfig::validate() const {
  grid.validate();
  if (stages.empty()) throw std::invalid_argument("network needs at least one backbone stage");
  if (deform_kernel % 2 == 0) throw std::invalid_argument("deformable kernel must be odd");
  if (anchors_per_location == 0 || adapt_channels == 0 || head_channels == 0) {
    throw std::invalid_argument("network channel counts must be positive");
  }
  if (!(cls_prior > 0.0 && cls_prior < 1.0)) throw std::invalid_argument("cls_prior must lie in (0, 1)");
  (void)downsample();
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const NetworkConfig& config, Branch branch) {
  std::vector<std::pair<std::string, Shape>> out;
  auto conv3 = [](std::size_t cout, std::size_t cin, const std::array<int, 3>& k) {
    return Shape{cout, cin, static_cast<std::size_t>(k[0]), static_cast<std::size_t>(k[1]),
                 static_cast<std::size_t>(k[2])};
  };
  out.emplace_back("vfe.weight", Shape{config.point_feature_channels, 3});
  out.emplace_back("vfe.bias", Shape{config.point_feature_channels});
  std::size_t cin = config.point_feature_channels;
  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const auto& st = config.stages[i];
    const std::string p = "backbone.s" + std::to_string(i + 1) + ".";
    out.emplace_back(p + "sub1.weight", conv3(st.channels, cin, {3, 3, 3}));
    out.emplace_back(p + "sub1.bias", Shape{st.channels});
    out.emplace_back(p + "sub2.weight", conv3(st.channels, st.channels, {3, 3, 3}));
    out.emplace_back(p + "sub2.bias", Shape{st.channels});
    out.emplace_back(p + "down.weight", conv3(st.channels, st.channels, st.down.size));
    out.emplace_back(p + "down.bias", Shape{st.channels});
    cin = st.channels;
  }
  const std::size_t k = config.deform_kernel;
  const std::size_t bev = config.bev_channels();
  if (branch == Branch::kPfe) {
    out.emplace_back("adapt.offset.weight", Shape{2 * k * k, bev, k, k});
    out.emplace_back("adapt.offset.bias", Shape{2 * k * k});
  }
  out.emplace_back("adapt.weight", Shape{config.adapt_channels, bev, k, k});
  out.emplace_back("adapt.bias", Shape{config.adapt_channels});
  const std::size_t a = config.anchors_per_location;
  out.emplace_back("head.conv.weight", Shape{config.head_channels, config.adapt_channels, 3, 3});
  out.emplace_back("head.conv.bias", Shape{config.head_channels});
  out.emplace_back("head.cls.weight", Shape{a, config.head_channels, 1, 1});
  out.emplace_back("head.cls.bias", Shape{a});
  out.emplace_back("head.reg.weight", Shape{7 * a, config.head_channels, 1, 1});
  out.emplace_back("head.reg.bias", Shape{7 * a});
  return out;
}

ParameterSet init_parameters(const NetworkConfig& config, Branch branch, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ParameterSet params;
  for (const auto& [name, shape] : parameter_layout(config, branch)) {
    Tensor t(shape, 0.0);
    const bool is_bias = name.size() > 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
    if (name == "head.cls.bias") {
      t.fill(-std::log((1.0 - config.cls_prior) / config.cls_prior));
    } else if (!is_bias && name.rfind("adapt.offset.", 0) != 0) {
      std::size_t fan_in = 1;
      for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
      const bool head_out = name == "head.cls.weight" || name == "head.reg.weight";
      const double stddev = head_out ? 0.01 : std::sqrt(2.0 / static_cast<double>(fan_in));
      std::normal_distribution<double> normal(0.0, stddev);
      for (double& v : t.values()) v = normal(rng);
    }
    params.emplace(name, std::move(t));
  }
  return params;
}

std::map<std::string, Var> bind(Tape& tape, const ParameterSet& params, bool requires_grad) {
  std::map<std::string, Var> vars;
  for (const auto& [name, t] : params) vars.emplace(name, tape.leaf(t, requires_grad));
  return vars;
}

namespace {

const Var& param(const std::map<std::string, Var>& params, const std::string& name) {
  const auto it = params.find(name);
  if (it == params.end()) throw std::invalid_argument("missing network parameter '" + name + "'");
  return it->second;
}

}  // namespace

ForwardOutput forward(Tape& tape, const PointCloud& cloud, const std::map<std::string, Var>& params,
                      const NetworkConfig& config, Branch branch) {
  const auto vox = voxel::voxelize(cloud, config.grid);
  ForwardOutput out;
  out.voxel_count = vox.size();

  Var h = ad::relu(ad::linear(tape.constant(vox.features), param(params, "vfe.weight"), param(params, "vfe.bias")));
  std::vector<sparse::Coord> coords = vox.coords;
  sparse::Extent extent = vox.spatial_shape;
  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const std::string p = "backbone.s" + std::to_string(i + 1) + ".";
    auto sub = std::make_shared<const sparse::Rulebook>(sparse::build_rulebook(coords, extent, sparse::KernelSpec{}));
    h = ad::relu(sparse::sparse_conv(h, param(params, p + "sub1.weight"), param(params, p + "sub1.bias"), sub));
    h = ad::relu(sparse::sparse_conv(h, param(params, p + "sub2.weight"), param(params, p + "sub2.bias"), sub));
    auto down =
        std::make_shared<const sparse::Rulebook>(sparse::build_rulebook(coords, extent, config.stages[i].down));
    h = ad::relu(sparse::sparse_conv(h, param(params, p + "down.weight"), param(params, p + "down.bias"), down));
    coords = down->out_coords;
    extent = down->out_extent;
  }
  const Var bev = sparse::squeeze_height(sparse::to_dense(h, coords, extent));
  if (bev.shape()[0] != config.bev_channels()) throw ad::ShapeError("backbone output does not match bev_channels");

  const ad::Conv2dOptions same{1, config.deform_kernel / 2};
  if (branch == Branch::kPfe) {
    out.offsets = ad::conv2d(bev, param(params, "adapt.offset.weight"), param(params, "adapt.offset.bias"), same);
    out.adapt_feature = ad::relu(
        ad::deform_conv2d(bev, param(params, "adapt.weight"), out.offsets, param(params, "adapt.bias"), same));
  } else {
    out.adapt_feature = ad::relu(ad::conv2d(bev, param(params, "adapt.weight"), param(params, "adapt.bias"), same));
  }
  const Var trunk = ad::relu(
      ad::conv2d(out.adapt_feature, param(params, "head.conv.weight"), param(params, "head.conv.bias"), {1, 1}));
  out.cls_map = ad::conv2d(trunk, param(params, "head.cls.weight"), param(params, "head.cls.bias"));
  out.reg_map = ad::conv2d(trunk, param(params, "head.reg.weight"), param(params, "head.reg.bias"));
  return out;
}

}  // namespace assoc3d::net
