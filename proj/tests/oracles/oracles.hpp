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

// Reference implementations used to check the library. They share only the
// plain data types with it and are written for clarity, not speed.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "assoc3d/types.hpp"

namespace oracle {

using assoc3d::Box3D;
using assoc3d::Point;
using assoc3d::PointCloud;

// ---------------------------------------------------------------- dense 3D conv

/// Dense volume [C][X][Y][Z].
struct Volume {
  std::size_t c = 0, x = 0, y = 0, z = 0;
  std::vector<double> data;

  Volume() = default;
  Volume(std::size_t c_, std::size_t x_, std::size_t y_, std::size_t z_)
      : c(c_), x(x_), y(y_), z(z_), data(c_ * x_ * y_ * z_, 0.0) {}
  double& at(std::size_t ci, std::size_t xi, std::size_t yi, std::size_t zi) {
    return data[((ci * x + xi) * y + yi) * z + zi];
  }
  double at(std::size_t ci, std::size_t xi, std::size_t yi, std::size_t zi) const {
    return data[((ci * x + xi) * y + yi) * z + zi];
  }
};

struct Conv3dGeometry {
  std::array<int, 3> kernel{3, 3, 3};
  std::array<int, 3> stride{1, 1, 1};
  std::array<int, 3> padding{1, 1, 1};
};

/// Cross-correlation with zero padding. weight is [Cout][Cin][kx][ky][kz].
Volume dense_conv3d(const Volume& input, const std::vector<double>& weight, std::size_t cout,
                    const std::vector<double>& bias, const Conv3dGeometry& g);

/// Output sites whose receptive field covers at least one active input site.
std::vector<std::array<int, 3>> dense_support(const std::vector<std::array<int, 3>>& active,
                                              const std::array<std::size_t, 3>& extent, const Conv3dGeometry& g);

// ---------------------------------------------------------------- 2D conv

/// Six nested loops. input [Cin][H][W], weight [Cout][Cin][kH][kW].
std::vector<double> conv2d_loops(const std::vector<double>& input, std::size_t cin, std::size_t h, std::size_t w,
                                 const std::vector<double>& weight, std::size_t cout, std::size_t kh, std::size_t kw,
                                 std::size_t stride, std::size_t padding);

/// Scalar bilinear interpolation of channel c with zero padding.
double bilinear(const std::vector<double>& map, std::size_t h, std::size_t w, std::size_t c, double x, double y);

/// Deformable conv computed tap by tap with `bilinear`. offsets [2*kh*kw][Ho][Wo],
/// channel 2k = dy, 2k+1 = dx.
std::vector<double> deform_conv2d_loops(const std::vector<double>& input, std::size_t cin, std::size_t h,
                                        std::size_t w, const std::vector<double>& weight, std::size_t cout,
                                        std::size_t kh, std::size_t kw, const std::vector<double>& offsets,
                                        std::size_t stride, std::size_t padding);

// ---------------------------------------------------------------- geometry

/// Monte-Carlo BEV IoU from `samples` uniform draws over the overlap of the
/// two boxes' circumscribed squares.
double monte_carlo_iou_bev(const Box3D& a, const Box3D& b, std::size_t samples, std::uint64_t seed);

/// Containment by explicit inverse rotation, faces included.
bool inside_box(const Point& p, const Box3D& b, double tol = 1e-9);

/// O(|a||b|) directed mean nearest distance.
double avg_closest_loops(const PointCloud& a, const PointCloud& b);

// ---------------------------------------------------------------- voxelizer

struct VoxelRef {
  std::array<int, 3> coord;
  std::array<double, 3> mean;
};

/// std::map accumulation of the first `cap` in-range points per voxel.
std::vector<VoxelRef> voxelize_map(const PointCloud& cloud, const std::array<double, 3>& lo,
                                   const std::array<double, 3>& hi, const std::array<double, 3>& size,
                                   std::size_t cap);

// ---------------------------------------------------------------- conceptual scenes

struct BankEntry {
  std::size_t scene = 0;
  std::size_t object = 0;
  double yaw = 0.0;
  std::size_t count = 0;
};

/// Candidate (scene, object) keys per bin from a plain ranking: count
/// descending, then scene, then object; top ceil(K n / 100) of each bin,
/// then drop those below `min_points`.
std::vector<std::vector<std::pair<std::size_t, std::size_t>>> rank_candidates(const std::vector<BankEntry>& entries,
                                                                              int groups, double top_percent,
                                                                              std::size_t min_points);

struct CandidateRef {
  std::pair<std::size_t, std::size_t> key;
  int bin = 0;
  Box3D box;
  PointCloud canonical;  // centred, unrotated
};

struct MatchRef {
  std::size_t index = 0;  // into the candidate list
  int bin = 0;
  double distance = 0.0;
  bool self = false;
};

/// Exhaustive search over every candidate: restrict to the nearest non-empty
/// bin, then take the smallest directed distance from the target points to
/// the candidate placed at the target pose (mean of both directions when
/// `symmetric`). Candidates are in bank order.
MatchRef brute_force_match(const Box3D& target, const PointCloud& target_points,
                           const std::optional<std::pair<std::size_t, std::size_t>>& target_key,
                           const std::vector<CandidateRef>& candidates, int groups, bool symmetric = false);

// ---------------------------------------------------------------- detection

/// Greedy suppression over a precomputed IoU matrix; indices by score
/// descending, lower index first on ties.
std::vector<std::size_t> reference_nms(const std::vector<double>& scores,
                                       const std::vector<std::vector<double>>& iou, double threshold);

/// Labels from an anchor-by-gt IoU matrix: 1 positive, 0 negative, -1 ignored.
std::vector<int> reference_labels(const std::vector<std::vector<double>>& iou, double pos, double neg);

/// Per-anchor loop of the negated sigmoid focal loss, normalized by
/// max(1, #positives). labels: 1, 0 or -1 (skipped).
double focal_loss_loop(const std::vector<double>& logits, const std::vector<int>& labels, double alpha, double gamma);

/// BEV center of feature cell (row, col).
std::array<double, 2> lattice_center(std::size_t row, std::size_t col, double x_min, double y_min, double pitch_x,
                                     double pitch_y);

// ---------------------------------------------------------------- adaptation

/// offsets [2N][H][W] -> [H][W] mean length.
std::vector<double> offset_length_loop(const std::vector<double>& offsets, std::size_t n, std::size_t h,
                                       std::size_t w);

/// (1/P) sum over foreground pixels of |Fp - Fc| (1 + r), P = #foreground.
double association_loss_loop(const std::vector<double>& fp, const std::vector<double>& fc, std::size_t c,
                             std::size_t h, std::size_t w, const std::vector<double>& reweight,
                             const std::vector<double>& fg);

/// Per-point rasterization: pixels holding a point that lies inside some box.
std::vector<double> foreground_raster(const std::vector<Box3D>& boxes, const PointCloud& points, double x_min,
                                      double y_min, double cell_x, double cell_y, std::size_t h, std::size_t w);

}  // namespace oracle
