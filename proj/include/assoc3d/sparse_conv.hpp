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
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "assoc3d/tape.hpp"
#include "assoc3d/voxelizer.hpp"

namespace assoc3d::sparse {

using voxel::Coord;
using voxel::SparseVoxelTensor;
using Extent = std::array<std::size_t, 3>;

enum class ConvMode {
  kSubmanifold,  // output sites == input sites, kernel centered
  kStrided,      // output sites = every downsampled location hit by an input
};

struct KernelSpec {
  std::array<int, 3> size{3, 3, 3};
  std::array<int, 3> stride{1, 1, 1};
  std::array<int, 3> padding{1, 1, 1};
  ConvMode mode = ConvMode::kSubmanifold;

  int volume() const { return size[0] * size[1] * size[2]; }
  /// Flattened tap index, x slowest, matching the weight layout.
  int tap(int kx, int ky, int kz) const { return (kx * size[1] + ky) * size[2] + kz; }
};

/// Output grid extent. Submanifold convolutions keep the input extent.
Extent output_extent(const Extent& in, const KernelSpec& spec);

/// Gather/scatter plan for one convolution over one coordinate set.
struct Rulebook {
  KernelSpec spec;
  Extent in_extent{};
  Extent out_extent{};
  std::size_t in_count = 0;
  std::uint64_t in_signature = 0;
  std::vector<Coord> out_coords;
  /// pairs[k] lists (input row, output row) for kernel tap k.
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> pairs;

  std::size_t pair_count() const;
};

/// Hash of a coordinate list; used to reject a rulebook built for a
/// different input.
std::uint64_t coord_signature(const std::vector<Coord>& coords);

/// Throws std::invalid_argument for stride < 1 or an even submanifold kernel.
Rulebook build_rulebook(const std::vector<Coord>& coords, const Extent& extent, const KernelSpec& spec);

/// weight: [Cout, Cin, kx, ky, kz]; bias: [Cout] or empty.
SparseVoxelTensor sparse_conv_forward(const SparseVoxelTensor& input, const ad::Tensor& weight,
                                      const ad::Tensor& bias, const Rulebook& rulebook);

struct SparseConvGrads {
  ad::Tensor input;
  ad::Tensor weight;
  ad::Tensor bias;
};

/// Exact transpose of the forward gather/scatter. Throws std::logic_error when
/// the rulebook was built for a different coordinate set.
SparseConvGrads sparse_conv_backward(const ad::Tensor& grad_out, const SparseVoxelTensor& input,
                                     const ad::Tensor& weight, const Rulebook& rulebook);

/// Taped convolution over the feature rows [N, Cin] of the rulebook's input.
ad::Var sparse_conv(const ad::Var& features, const ad::Var& weight, const std::optional<ad::Var>& bias,
                    std::shared_ptr<const Rulebook> rulebook);

/// [C, Z, Y, X], zero away from active sites.
ad::Tensor to_dense(const SparseVoxelTensor& input);
ad::Var to_dense(const ad::Var& features, const std::vector<Coord>& coords, const Extent& extent);

/// Sites where any channel is non-zero, in coordinate order.
SparseVoxelTensor to_sparse(const ad::Tensor& dense);

/// [C, Z, Y, X] -> [C*Z, Y, X]; element (c, z, y, x) lands in channel c*Z + z.
ad::Tensor squeeze_height(const ad::Tensor& dense);
ad::Var squeeze_height(const ad::Var& dense);

}  // namespace assoc3d::sparse
