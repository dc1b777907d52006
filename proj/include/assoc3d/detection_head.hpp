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
#include <vector>

#include "assoc3d/tape.hpp"
#include "assoc3d/types.hpp"
#include "assoc3d/voxelizer.hpp"

namespace assoc3d::head {

using ad::Tensor;
using ad::Var;
using Deltas = std::array<double, 7>;

/// Sign and denominator convention of the box residuals.
enum class BoxCoding {
  /// dx = (xa - xg) / da, dy = (ya - yg) / ha, dz = (za - zg) / da
  kAnchorMinusGt,
  /// dx = (xg - xa) / da, dy = (yg - ya) / da, dz = (zg - za) / ha
  kGtMinusAnchor,
};

struct AnchorConfig {
  double length = 3.9;
  double width = 1.6;
  double height = 1.56;
  double z_center = -1.0;
  std::vector<double> yaws{0.0, 1.5707963267948966};
  double positive_iou = 0.6;
  double negative_iou = 0.45;
  BoxCoding coding = BoxCoding::kAnchorMinusGt;
};

struct Anchor {
  Box3D box;
  std::size_t row = 0;  // feature-map y
  std::size_t col = 0;  // feature-map x
  std::size_t yaw_index = 0;
};

/// Index of anchor (a, y, x) is a*H*W + y*W + x, matching the [A, H, W]
/// classification map.
std::vector<Anchor> generate_anchors(std::size_t height, std::size_t width, const voxel::GridConfig& grid,
                                     std::size_t downsample, const AnchorConfig& config);

Deltas encode_box(const Box3D& anchor, const Box3D& gt, BoxCoding coding = BoxCoding::kAnchorMinusGt);
Box3D decode_box(const Box3D& anchor, const Deltas& deltas, BoxCoding coding = BoxCoding::kAnchorMinusGt);

/// The same BEV box with its yaw shifted by a multiple of pi into
/// [reference - pi/2, reference + pi/2).
Box3D fold_yaw(const Box3D& box, double reference);

enum class AnchorLabel : std::int8_t { kIgnored = -1, kNegative = 0, kPositive = 1 };

struct TargetAssignment {
  std::vector<AnchorLabel> labels;
  std::vector<int> matched_gt;  // -1 unless positive
  std::vector<Deltas> deltas;   // zero unless positive
  std::size_t positive_count() const;
};

/// Positives get the residuals of their matched box folded toward the anchor
/// yaw, so the yaw residual stays within [-pi/2, pi/2).
TargetAssignment assign_targets(const std::vector<Anchor>& anchors, const std::vector<Box3D>& gts,
                                const AnchorConfig& config);

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

/// Sigmoid focal loss over non-ignored anchors divided by max(1, #positives).
/// logits holds one value per anchor in anchor order.
Var focal_loss(const Var& logits, const std::vector<AnchorLabel>& labels, FocalParams params = {});

/// Huber (transition 1) residuals of positive anchors, summed over the seven
/// fields and divided by max(1, #positives). reg_map is [7A, H, W] with
/// channel a*7 + d holding field d of yaw slot a.
Var regression_loss(const Var& reg_map, const TargetAssignment& targets);

/// Elementwise Huber on two [N, 7] tensors, summed and divided by max(1, N).
double smooth_l1(const std::vector<Deltas>& pred, const std::vector<Deltas>& target);

Var cfg_total_loss(const Var& bbox, const Var& cls);
Var associate_total_loss(const Var& bbox, const Var& cls, const Var& assoc, double sigma);

/// Indices kept by greedy suppression, highest score first. A box is dropped
/// when its BEV IoU with a kept box exceeds `iou_threshold`.
std::vector<std::size_t> nms_bev(const std::vector<Box3D>& boxes, const std::vector<double>& scores,
                                 double iou_threshold = 0.1);

struct Detection {
  Box3D box;
  double score = 0.0;
};

struct DecodeParams {
  double score_threshold = 0.05;
  double nms_iou = 0.1;
  std::size_t max_candidates = 1000;
};

/// Sigmoid scores, threshold, decode and NMS. Output sorted by score.
std::vector<Detection> decode_detections(const Tensor& cls_map, const Tensor& reg_map,
                                         const std::vector<Anchor>& anchors, const AnchorConfig& config,
                                         const DecodeParams& params);

}  // namespace assoc3d::head
