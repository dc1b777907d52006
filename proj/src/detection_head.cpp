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

#include "assoc3d/detection_head.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "assoc3d/geometry.hpp"
#include "assoc3d/ops.hpp"

namespace assoc3d::head {

std::vector<Anchor> generate_anchors(std::size_t height, std::size_t width, const voxel::GridConfig& grid,
                                     std::size_t downsample, const AnchorConfig& config) {
  if (!(config.length > 0.0 && config.width > 0.0 && config.height > 0.0)) {
    throw std::invalid_argument("anchor dimensions must be positive");
  }
  const double px = grid.voxel_size[0] * static_cast<double>(downsample);
  const double py = grid.voxel_size[1] * static_cast<double>(downsample);
  std::vector<Anchor> anchors;
  anchors.reserve(config.yaws.size() * height * width);
  for (std::size_t a = 0; a < config.yaws.size(); ++a) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        Anchor an;
        an.box = Box3D{grid.range_min[0] + (static_cast<double>(x) + 0.5) * px,
                       grid.range_min[1] + (static_cast<double>(y) + 0.5) * py,
                       config.z_center,
                       config.length,
                       config.width,
                       config.height,
                       config.yaws[a]};
        an.row = y;
        an.col = x;
        an.yaw_index = a;
        anchors.push_back(an);
      }
    }
  }
  return anchors;
}

Deltas encode_box(const Box3D& a, const Box3D& g, BoxCoding coding) {
  const double da = std::sqrt(a.l * a.l + a.w * a.w);
  Deltas d{};
  if (coding == BoxCoding::kAnchorMinusGt) {
    d[0] = (a.cx - g.cx) / da;
    d[1] = (a.cy - g.cy) / a.h;
    d[2] = (a.cz - g.cz) / da;
  } else {
    d[0] = (g.cx - a.cx) / da;
    d[1] = (g.cy - a.cy) / da;
    d[2] = (g.cz - a.cz) / a.h;
  }
  d[3] = std::log(g.l / a.l);
  d[4] = std::log(g.w / a.w);
  d[5] = std::log(g.h / a.h);
  d[6] = g.yaw - a.yaw;
  return d;
}

Box3D decode_box(const Box3D& a, const Deltas& d, BoxCoding coding) {
  const double da = std::sqrt(a.l * a.l + a.w * a.w);
  Box3D g;
  if (coding == BoxCoding::kAnchorMinusGt) {
    g.cx = a.cx - d[0] * da;
    g.cy = a.cy - d[1] * a.h;
    g.cz = a.cz - d[2] * da;
  } else {
    g.cx = a.cx + d[0] * da;
    g.cy = a.cy + d[1] * da;
    g.cz = a.cz + d[2] * a.h;
  }
  g.l = a.l * std::exp(d[3]);
  g.w = a.w * std::exp(d[4]);
  g.h = a.h * std::exp(d[5]);
  g.yaw = normalize_angle(a.yaw + d[6]);
  return g;
}

Box3D fold_yaw(const Box3D& box, double reference) {
  Box3D out = box;
  double d = normalize_angle(box.yaw - reference);
  if (d >= std::numbers::pi / 2) d -= std::numbers::pi;
  if (d < -std::numbers::pi / 2) d += std::numbers::pi;
  out.yaw = reference + d;
  return out;
}

std::size_t TargetAssignment::positive_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), AnchorLabel::kPositive));
}

TargetAssignment assign_targets(const std::vector<Anchor>& anchors, const std::vector<Box3D>& gts,
                                const AnchorConfig& config) {
  const std::size_t n = anchors.size();
  TargetAssignment t;
  t.labels.assign(n, AnchorLabel::kNegative);
  t.matched_gt.assign(n, -1);
  t.deltas.assign(n, Deltas{});
  if (gts.empty()) return t;

  std::vector<double> best_iou(n, 0.0);
  std::vector<int> best_gt(n, -1);
  std::vector<double> gt_best(gts.size(), 0.0);
  std::vector<std::size_t> gt_arg(gts.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double iou = geom::rotated_iou_bev(anchors[i].box, gts[g]);
      if (iou > best_iou[i]) {
        best_iou[i] = iou;
        best_gt[i] = static_cast<int>(g);
      }
      if (iou > gt_best[g]) {
        gt_best[g] = iou;
        gt_arg[g] = i;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (best_iou[i] >= config.positive_iou) {
      t.labels[i] = AnchorLabel::kPositive;
      t.matched_gt[i] = best_gt[i];
    } else if (best_iou[i] >= config.negative_iou) {
      t.labels[i] = AnchorLabel::kIgnored;
    }
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (gt_best[g] <= 0.0) continue;
    t.labels[gt_arg[g]] = AnchorLabel::kPositive;
    t.matched_gt[gt_arg[g]] = static_cast<int>(g);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (t.labels[i] == AnchorLabel::kPositive) {
      const Box3D gt = fold_yaw(gts[static_cast<std::size_t>(t.matched_gt[i])], anchors[i].box.yaw);
      t.deltas[i] = encode_box(anchors[i].box, gt, config.coding);
    }
  }
  return t;
}

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double huber(double r) {
  const double a = std::abs(r);
  return a < 1.0 ? 0.5 * r * r : a - 0.5;
}

double huber_grad(double r) { return std::abs(r) < 1.0 ? r : (r > 0.0 ? 1.0 : -1.0); }

}  // namespace

Var focal_loss(const Var& logits, const std::vector<AnchorLabel>& labels, FocalParams params) {
  const Tensor& z = logits.value();
  if (z.numel() != labels.size()) throw ad::ShapeError("focal_loss: one label per logit required");
  std::size_t npos = 0;
  for (AnchorLabel l : labels) npos += l == AnchorLabel::kPositive ? 1 : 0;
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(npos, 1));

  // For s = +1 (positive) / -1 (negative) and u = s*z: p_t = sigmoid(u) and
  // -log p_t = softplus(-u).
  double total = 0.0;
  std::vector<double> dz(z.numel(), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == AnchorLabel::kIgnored) continue;
    const double s = labels[i] == AnchorLabel::kPositive ? 1.0 : -1.0;
    const double alpha_t = s > 0.0 ? params.alpha : 1.0 - params.alpha;
    const double u = s * z[i];
    const double p = sigmoid(u);
    const double q = sigmoid(-u);  // 1 - p_t without cancellation
    const double nll = softplus(-u);
    const double mod = std::pow(q, params.gamma);
    total += alpha_t * mod * nll;
    dz[i] = s * alpha_t * mod * (-params.gamma * p * nll - q) * norm;
  }
  return logits.tape()->record(Tensor::scalar(total * norm), {logits},
                               [dz = std::move(dz)](const ad::BackwardContext& ctx) {
                                 Tensor& g = *ctx.input_grads[0];
                                 const double up = ctx.grad_out[0];
                                 for (std::size_t i = 0; i < dz.size(); ++i) g[i] += up * dz[i];
                               });
}

Var regression_loss(const Var& reg_map, const TargetAssignment& targets) {
  const Tensor& r = reg_map.value();
  if (r.rank() != 3 || r.dim(0) % 7 != 0) throw ad::ShapeError("regression map must be [7A, H, W]");
  const std::size_t hw = r.dim(1) * r.dim(2);
  const std::size_t anchors = (r.dim(0) / 7) * hw;
  if (targets.labels.size() != anchors) throw ad::ShapeError("regression map does not match the anchor count");
  std::vector<std::size_t> index;  // flat reg_map index per (positive, field)
  std::vector<double> residual;
  for (std::size_t i = 0; i < anchors; ++i) {
    if (targets.labels[i] != AnchorLabel::kPositive) continue;
    const std::size_t a = i / hw;
    const std::size_t pix = i % hw;
    for (std::size_t d = 0; d < 7; ++d) {
      const std::size_t k = (a * 7 + d) * hw + pix;
      index.push_back(k);
      residual.push_back(r[k] - targets.deltas[i][d]);
    }
  }
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(index.size() / 7, 1));
  double total = 0.0;
  for (double e : residual) total += huber(e);
  return reg_map.tape()->record(Tensor::scalar(total * norm), {reg_map},
                                [index = std::move(index), residual = std::move(residual),
                                 norm](const ad::BackwardContext& ctx) {
                                  Tensor& g = *ctx.input_grads[0];
                                  const double up = ctx.grad_out[0] * norm;
                                  for (std::size_t j = 0; j < index.size(); ++j) {
                                    g[index[j]] += up * huber_grad(residual[j]);
                                  }
                                });
}

double smooth_l1(const std::vector<Deltas>& pred, const std::vector<Deltas>& target) {
  if (pred.size() != target.size()) throw std::invalid_argument("smooth_l1: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t d = 0; d < 7; ++d) total += huber(pred[i][d] - target[i][d]);
  }
  return total / static_cast<double>(std::max<std::size_t>(pred.size(), 1));
}

Var cfg_total_loss(const Var& bbox, const Var& cls) { return ad::add(bbox, cls); }

Var associate_total_loss(const Var& bbox, const Var& cls, const Var& assoc, double sigma) {
  return ad::add(ad::add(bbox, cls), ad::scale(assoc, sigma));
}

std::vector<std::size_t> nms_bev(const std::vector<Box3D>& boxes, const std::vector<double>& scores,
                                 double iou_threshold) {
  if (boxes.size() != scores.size()) throw std::invalid_argument("nms_bev: one score per box required");
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (geom::rotated_iou_bev(boxes[k], boxes[i]) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

std::vector<Detection> decode_detections(const Tensor& cls_map, const Tensor& reg_map,
                                         const std::vector<Anchor>& anchors, const AnchorConfig& config,
                                         const DecodeParams& params) {
  if (cls_map.numel() != anchors.size() || reg_map.numel() != anchors.size() * 7) {
    throw ad::ShapeError("decode_detections: maps do not match the anchors");
  }
  const std::size_t hw = cls_map.dim(1) * cls_map.dim(2);
  std::vector<std::size_t> cand;
  std::vector<double> score(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    score[i] = sigmoid(cls_map[i]);
    if (score[i] >= params.score_threshold) cand.push_back(i);
  }
  std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  if (cand.size() > params.max_candidates) cand.resize(params.max_candidates);

  std::vector<Box3D> boxes;
  std::vector<double> scores;
  for (std::size_t i : cand) {
    const std::size_t a = i / hw;
    const std::size_t pix = i % hw;
    Deltas d{};
    for (std::size_t f = 0; f < 7; ++f) d[f] = reg_map[(a * 7 + f) * hw + pix];
    // Untrained heads can emit huge size residuals; keep exp() finite.
    for (std::size_t f = 3; f < 6; ++f) d[f] = std::clamp(d[f], -8.0, 8.0);
    boxes.push_back(decode_box(anchors[i].box, d, config.coding));
    scores.push_back(score[i]);
  }
  std::vector<Detection> out;
  for (std::size_t k : nms_bev(boxes, scores, params.nms_iou)) out.push_back({boxes[k], scores[k]});
  return out;
}

}  // namespace assoc3d::head
