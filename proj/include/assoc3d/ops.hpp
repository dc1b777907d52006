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

#include <optional>
#include <vector>

#include "assoc3d/tape.hpp"

namespace assoc3d::ad {

// Elementwise. Operands of add/sub/mul must share a shape.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var reshape(const Var& a, Shape shape);

/// Sum / mean over all elements; result has shape [1].
Var sum(const Var& a);
Var mean(const Var& a);

/// Sum of the elementwise Huber penalty (transition at 1) of a.
Var smooth_l1_sum(const Var& a);

/// x: [N, Cin], weight: [Cout, Cin], bias: [Cout] -> [N, Cout]
Var linear(const Var& x, const Var& weight, const std::optional<Var>& bias);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Cross-correlation. input: [Cin, H, W], weight: [Cout, Cin, kH, kW],
/// bias: [Cout] -> [Cout, Ho, Wo].
Var conv2d(const Var& input, const Var& weight, const std::optional<Var>& bias, Conv2dOptions opt = {});

/// Deformable cross-correlation. offsets: [2*kH*kW, Ho, Wo]; channel 2k is
/// the row (y) displacement of tap k and channel 2k+1 the column (x)
/// displacement, taps ordered row-major over the kernel window.
Var deform_conv2d(const Var& input, const Var& weight, const Var& offsets, const std::optional<Var>& bias,
                  Conv2dOptions opt = {});

/// Bilinear interpolation of every channel of map [C, H, W] at continuous
/// (x = column, y = row) with zero padding outside the grid.
std::vector<double> bilinear_sample(const Tensor& map, double x, double y);

}  // namespace assoc3d::ad
