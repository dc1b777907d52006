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
#include <cstddef>
#include <vector>

#include "assoc3d/types.hpp"

namespace assoc3d::geom {

/// Slack applied to box containment so that points placed exactly on a face
/// survive a forward/inverse rigid transform round trip.
inline constexpr double kContainmentTolerance = 1e-9;

/// Corners of the yaw-rotated l x w rectangle, counter-clockwise, starting at
/// the rear-right corner (-l/2, -w/2) of the box frame.
std::array<Vec2, 4> box_corners_bev(const Box3D& box);

/// Signed shoelace area; positive for counter-clockwise polygons.
double polygon_area(const std::vector<Vec2>& poly);

/// Clips the convex polygon `subject` against the convex CCW polygon `clip`.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip);

/// Point expressed in the box frame (origin at center, x along length).
Point to_box_frame(const Point& p, const Box3D& box);

bool point_in_box(const Point& p, const Box3D& box, double tolerance = kContainmentTolerance);

/// Indices of the points inside `box`, faces included, in cloud order.
std::vector<std::size_t> points_in_box(const PointCloud& cloud, const Box3D& box);

double bev_intersection_area(const Box3D& a, const Box3D& b);

/// Intersection over union of the bird's-eye-view rectangles.
double rotated_iou_bev(const Box3D& a, const Box3D& b);

/// BEV intersection times the vertical overlap, over the union volume.
double iou_3d(const Box3D& a, const Box3D& b);

enum class ClosestPointMode { kDirected, kSymmetric };

/// Mean over points of `a` of the distance to the nearest point of `b`.
/// kSymmetric averages both directions. Throws on an empty cloud.
double avg_closest_point_distance(const PointCloud& a, const PointCloud& b,
                                  ClosestPointMode mode = ClosestPointMode::kDirected);

/// Uniform hash grid over a fixed point set answering nearest-neighbour
/// queries. Sets smaller than `brute_force_below` are scanned linearly.
class NearestNeighborGrid {
 public:
  explicit NearestNeighborGrid(const PointCloud& points, double cell_size = 0.5,
                               std::size_t brute_force_below = 64);

  /// Squared distance to the closest stored point.
  double nearest_squared(const Point& q) const;

 private:
  long long key_of(long long ix, long long iy, long long iz) const;
  const std::vector<std::size_t>* find(long long ix, long long iy, long long iz) const;

  const PointCloud& points_;
  double cell_;
  bool brute_;
  std::array<long long, 3> lo_{};
  std::array<long long, 3> hi_{};
  std::vector<long long> keys_;                   // sorted
  std::vector<std::vector<std::size_t>> buckets_;  // parallel to keys_
};

/// Rotation about +z by pose.yaw, then translation. Intensity is kept.
PointCloud transform_points(const PointCloud& points, const Pose& pose);

/// The pose equivalent to applying `first` and then `second`.
Pose compose(const Pose& second, const Pose& first);

/// Pose mapping the box frame into the scene frame.
Pose box_pose(const Box3D& box);

}  // namespace assoc3d::geom
