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

#include "assoc3d/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "assoc3d/geometry.hpp"

namespace assoc3d::adapt {

Tensor foreground_mask(const std::vector<Box3D>& boxes, const PointCloud& points, const voxel::GridConfig& grid,
                       std::size_t downsample) {
  grid.validate();
  const auto dims = grid.dims();
  if (downsample == 0 || dims[0] % downsample != 0 || dims[1] % downsample != 0) {
    throw std::invalid_argument("downsample factor must divide the grid's BEV dimensions");
  }
  const std::size_t W = dims[0] / downsample;
  const std::size_t H = dims[1] / downsample;
  Tensor mask({H, W}, 0.0);
  const double px = grid.voxel_size[0] * static_cast<double>(downsample);
  const double py = grid.voxel_size[1] * static_cast<double>(downsample);
  for (const Point& p : points) {
    if (!(p.x >= grid.range_min[0] && p.x < grid.range_max[0] && p.y >= grid.range_min[1] &&
          p.y < grid.range_max[1])) {
      continue;
    }
    const auto ix = static_cast<long>(std::floor((p.x - grid.range_min[0]) / px));
    const auto iy = static_cast<long>(std::floor((p.y - grid.range_min[1]) / py));
    if (ix < 0 || iy < 0 || ix >= static_cast<long>(W) || iy >= static_cast<long>(H)) continue;
    double& cell = mask[static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)];
    if (cell != 0.0) continue;
    for (const Box3D& b : boxes) {
      if (geom::point_in_box(p, b)) {
        cell = 1.0;
        break;
      }
    }
  }
  return mask;
}

Tensor offset_length_map(const Tensor& offsets) {
  if (offsets.rank() != 3 || offsets.dim(0) == 0 || offsets.dim(0) % 2 != 0) {
    throw ad::ShapeError("offset map must be [2N, H, W] with N >= 1, got " + ad::shape_string(offsets.shape()));
  }
  const std::size_t n = offsets.dim(0) / 2;
  const std::size_t hw = offsets.dim(1) * offsets.dim(2);
  Tensor out({offsets.dim(1), offsets.dim(2)}, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double* dy = offsets.data() + (2 * k) * hw;
    const double* dx = offsets.data() + (2 * k + 1) * hw;
    for (std::size_t i = 0; i < hw; ++i) out[i] += std::hypot(dx[i], dy[i]);
  }
  for (double& v : out.values()) v /= static_cast<double>(n);
  return out;
}

Tensor reweighting_map(const Tensor& offset_map, const Tensor& fg_mask) {
  if (offset_map.shape() != fg_mask.shape()) throw ad::ShapeError("offset map and mask shapes differ");
  Tensor out = offset_map;
  double peak = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] *= fg_mask[i];
    peak = std::max(peak, out[i]);
  }
  if (peak > 0.0) {
    for (double& v : out.values()) v = std::max(v, 0.0) / peak;
  } else {
    out.fill(0.0);
  }
  return out;
}

Var association_loss(const Var& perceptual, const Tensor& conceptual, const Tensor& reweight, const Tensor& fg_mask,
                     PixelCount count) {
  const Tensor& fp = perceptual.value();
  if (fp.shape() != conceptual.shape() || fp.rank() != 3) {
    throw ad::ShapeError("association features must share a [C, H, W] shape: " + ad::shape_string(fp.shape()) +
                         " vs " + ad::shape_string(conceptual.shape()));
  }
  const std::size_t C = fp.dim(0);
  const std::size_t hw = fp.dim(1) * fp.dim(2);
  if (reweight.numel() != hw || fg_mask.numel() != hw) throw ad::ShapeError("association maps must be [H, W]");

  std::vector<std::size_t> pixels;
  for (std::size_t i = 0; i < hw; ++i) {
    const bool counted = count == PixelCount::kForeground ? fg_mask[i] != 0.0 : reweight[i] != 0.0;
    if (counted) pixels.push_back(i);
  }
  // Per-pixel norm and the coefficient (1 + r) / P, kept for backward.
  std::vector<double> norms(pixels.size(), 0.0);
  std::vector<double> coeff(pixels.size(), 0.0);
  double loss = 0.0;
  const double inv_p = pixels.empty() ? 0.0 : 1.0 / static_cast<double>(pixels.size());
  for (std::size_t j = 0; j < pixels.size(); ++j) {
    const std::size_t i = pixels[j];
    double sq = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double d = fp[c * hw + i] - conceptual[c * hw + i];
      sq += d * d;
    }
    norms[j] = std::sqrt(sq);
    coeff[j] = (1.0 + reweight[i]) * inv_p;
    loss += norms[j] * coeff[j];
  }

  return perceptual.tape()->record(
      Tensor::scalar(loss), {perceptual},
      [conceptual, pixels = std::move(pixels), norms = std::move(norms), coeff = std::move(coeff), C,
       hw](const ad::BackwardContext& ctx) {
        Tensor& g = *ctx.input_grads[0];
        const Tensor& x = *ctx.inputs[0];
        const double up = ctx.grad_out[0];
        for (std::size_t j = 0; j < pixels.size(); ++j) {
          if (norms[j] == 0.0) continue;
          const double s = up * coeff[j] / norms[j];
          const std::size_t i = pixels[j];
          for (std::size_t c = 0; c < C; ++c) g[c * hw + i] += s * (x[c * hw + i] - conceptual[c * hw + i]);
        }
      });
}

}  // namespace assoc3d::adapt
