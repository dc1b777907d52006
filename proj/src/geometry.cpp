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

#include "assoc3d/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace assoc3d::geom {

std::array<Vec2, 4> box_corners_bev(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.l;
  const double hw = 0.5 * box.w;
  const std::array<Vec2, 4> local{{{-hl, -hw}, {hl, -hw}, {hl, hw}, {-hl, hw}}};
  std::array<Vec2, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {box.cx + c * local[i].x - s * local[i].y, box.cy + s * local[i].x + c * local[i].y};
  }
  return out;
}

double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    acc += p.x * q.y - q.x * p.y;
  }
  return 0.5 * acc;
}

namespace {

double cross(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

Vec2 segment_line_hit(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
  const double dp = cross(a, b, p);
  const double dq = cross(a, b, q);
  const double t = dp / (dp - dq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

}  // namespace

std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip) {
  std::vector<Vec2> out = subject;
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % clip.size()];
    std::vector<Vec2> in = std::move(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec2& p = in[i];
      const Vec2& q = in[(i + 1) % in.size()];
      const bool p_in = cross(a, b, p) >= 0.0;
      const bool q_in = cross(a, b, q) >= 0.0;
      if (p_in) out.push_back(p);
      if (p_in != q_in) out.push_back(segment_line_hit(p, q, a, b));
    }
  }
  return out;
}

Point to_box_frame(const Point& p, const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double dx = p.x - box.cx;
  const double dy = p.y - box.cy;
  return {c * dx + s * dy, -s * dx + c * dy, p.z - box.cz, p.intensity};
}

bool point_in_box(const Point& p, const Box3D& box, double tolerance) {
  const Point local = to_box_frame(p, box);
  return std::abs(local.x) <= 0.5 * box.l + tolerance && std::abs(local.y) <= 0.5 * box.w + tolerance &&
         std::abs(local.z) <= 0.5 * box.h + tolerance;
}

std::vector<std::size_t> points_in_box(const PointCloud& cloud, const Box3D& box) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (point_in_box(cloud[i], box)) out.push_back(i);
  }
  return out;
}

double bev_intersection_area(const Box3D& first, const Box3D& second) {
  // Fixed operand order keeps the clipped area exactly symmetric.
  const auto key = [](const Box3D& x) { return std::array{x.cx, x.cy, x.cz, x.l, x.w, x.h, x.yaw}; };
  const bool swap = key(second) < key(first);
  const Box3D& a = swap ? second : first;
  const Box3D& b = swap ? first : second;
  const double ra = 0.5 * std::hypot(a.l, a.w);
  const double rb = 0.5 * std::hypot(b.l, b.w);
  if (std::hypot(a.cx - b.cx, a.cy - b.cy) > ra + rb) return 0.0;
  const auto ca = box_corners_bev(a);
  const auto cb = box_corners_bev(b);
  const std::vector<Vec2> pa(ca.begin(), ca.end());
  const std::vector<Vec2> pb(cb.begin(), cb.end());
  return std::max(0.0, polygon_area(clip_convex(pa, pb)));
}

double rotated_iou_bev(const Box3D& a, const Box3D& b) {
  const double inter = bev_intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double area_a = a.l * a.w;
  const double area_b = b.l * b.w;
  const double uni = std::min(area_a, area_b) + std::max(area_a, area_b) - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double inter_bev = bev_intersection_area(a, b);
  const double top = std::min(a.cz + 0.5 * a.h, b.cz + 0.5 * b.h);
  const double bottom = std::max(a.cz - 0.5 * a.h, b.cz - 0.5 * b.h);
  const double dz = std::max(0.0, top - bottom);
  const double inter = inter_bev * dz;
  if (inter <= 0.0) return 0.0;
  const double va = a.volume();
  const double vb = b.volume();
  return std::clamp(inter / (std::min(va, vb) + std::max(va, vb) - inter), 0.0, 1.0);
}

NearestNeighborGrid::NearestNeighborGrid(const PointCloud& points, double cell_size,
                                         std::size_t brute_force_below)
    : points_(points), cell_(cell_size), brute_(points.size() < brute_force_below) {
  if (points.empty()) throw std::invalid_argument("nearest-neighbour grid over an empty cloud");
  if (brute_) return;
  lo_.fill(std::numeric_limits<long long>::max());
  hi_.fill(std::numeric_limits<long long>::min());
  std::vector<std::pair<long long, std::size_t>> entries;
  entries.reserve(points.size());
  std::vector<std::array<long long, 3>> cells(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& p = points[i];
    cells[i] = {static_cast<long long>(std::floor(p.x / cell_)),
                static_cast<long long>(std::floor(p.y / cell_)),
                static_cast<long long>(std::floor(p.z / cell_))};
    for (int d = 0; d < 3; ++d) {
      lo_[d] = std::min(lo_[d], cells[i][d]);
      hi_[d] = std::max(hi_[d], cells[i][d]);
    }
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    entries.emplace_back(key_of(cells[i][0], cells[i][1], cells[i][2]), i);
  }
  std::sort(entries.begin(), entries.end());
  for (const auto& [key, idx] : entries) {
    if (keys_.empty() || keys_.back() != key) {
      keys_.push_back(key);
      buckets_.emplace_back();
    }
    buckets_.back().push_back(idx);
  }
}

long long NearestNeighborGrid::key_of(long long ix, long long iy, long long iz) const {
  const long long ny = hi_[1] - lo_[1] + 1;
  const long long nz = hi_[2] - lo_[2] + 1;
  return ((ix - lo_[0]) * ny + (iy - lo_[1])) * nz + (iz - lo_[2]);
}

const std::vector<std::size_t>* NearestNeighborGrid::find(long long ix, long long iy, long long iz) const {
  if (ix < lo_[0] || ix > hi_[0] || iy < lo_[1] || iy > hi_[1] || iz < lo_[2] || iz > hi_[2]) {
    return nullptr;
  }
  const long long key = key_of(ix, iy, iz);
  const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || *it != key) return nullptr;
  return &buckets_[static_cast<std::size_t>(it - keys_.begin())];
}

namespace {

double squared_distance(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

double NearestNeighborGrid::nearest_squared(const Point& q) const {
  double best = std::numeric_limits<double>::infinity();
  if (brute_) {
    for (const Point& p : points_) best = std::min(best, squared_distance(q, p));
    return best;
  }
  const long long cx = static_cast<long long>(std::floor(q.x / cell_));
  const long long cy = static_cast<long long>(std::floor(q.y / cell_));
  const long long cz = static_cast<long long>(std::floor(q.z / cell_));
  // Rings needed before every occupied cell has been visited.
  const long long max_ring = std::max({std::abs(cx - lo_[0]), std::abs(cx - hi_[0]), std::abs(cy - lo_[1]),
                                       std::abs(cy - hi_[1]), std::abs(cz - lo_[2]), std::abs(cz - hi_[2])});
  for (long long r = 0; r <= max_ring; ++r) {
    for (long long ix = std::max(cx - r, lo_[0]); ix <= std::min(cx + r, hi_[0]); ++ix) {
      for (long long iy = std::max(cy - r, lo_[1]); iy <= std::min(cy + r, hi_[1]); ++iy) {
        const bool shell_xy = std::abs(ix - cx) == r || std::abs(iy - cy) == r;
        for (long long iz = std::max(cz - r, lo_[2]); iz <= std::min(cz + r, hi_[2]); ++iz) {
          if (!shell_xy && std::abs(iz - cz) != r) continue;
          if (const auto* bucket = find(ix, iy, iz)) {
            for (std::size_t idx : *bucket) best = std::min(best, squared_distance(q, points_[idx]));
          }
        }
      }
    }
    // Every unvisited cell lies at least r cells away along some axis.
    const double bound = static_cast<double>(r) * cell_;
    if (best <= bound * bound) break;
  }
  return best;
}

namespace {

double directed_mean(const PointCloud& a, const PointCloud& b) {
  const NearestNeighborGrid grid(b);
  double acc = 0.0;
  for (const Point& p : a) acc += std::sqrt(grid.nearest_squared(p));
  return acc / static_cast<double>(a.size());
}

}  // namespace

double avg_closest_point_distance(const PointCloud& a, const PointCloud& b, ClosestPointMode mode) {
  if (a.empty() || b.empty()) throw std::invalid_argument("closest-point distance needs two non-empty clouds");
  if (mode == ClosestPointMode::kDirected) return directed_mean(a, b);
  return 0.5 * (directed_mean(a, b) + directed_mean(b, a));
}

PointCloud transform_points(const PointCloud& points, const Pose& pose) {
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  PointCloud out;
  out.reserve(points.size());
  for (const Point& p : points) {
    out.push_back({c * p.x - s * p.y + pose.translation[0], s * p.x + c * p.y + pose.translation[1],
                   p.z + pose.translation[2], p.intensity});
  }
  return out;
}

Pose compose(const Pose& second, const Pose& first) {
  const double c = std::cos(second.yaw);
  const double s = std::sin(second.yaw);
  const auto& t = first.translation;
  Pose out;
  out.yaw = normalize_angle(first.yaw + second.yaw);
  out.translation = {c * t[0] - s * t[1] + second.translation[0], s * t[0] + c * t[1] + second.translation[1],
                     t[2] + second.translation[2]};
  return out;
}

Pose box_pose(const Box3D& box) { return Pose{box.yaw, {box.cx, box.cy, box.cz}}; }

}  // namespace assoc3d::geom
