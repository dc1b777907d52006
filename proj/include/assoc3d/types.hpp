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
#include <cmath>
#include <numbers>
#include <vector>

namespace assoc3d {

/// One LiDAR return. Coordinates in meters, sensor frame.
struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

using PointCloud = std::vector<Point>;

/// Wraps an angle into [-pi, pi).
inline double normalize_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (a >= -std::numbers::pi && a < std::numbers::pi) return a;
  double r = std::fmod(a + std::numbers::pi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  r -= std::numbers::pi;
  // fmod can round up to exactly pi for inputs a hair below an odd multiple.
  if (r >= std::numbers::pi) r -= kTwoPi;
  return r;
}

/// Oriented 3D box. (cx, cy, cz) is the geometric center; yaw rotates the
/// length axis away from +x towards +y.
struct Box3D {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double l = 1.0;
  double w = 1.0;
  double h = 1.0;
  double yaw = 0.0;

  bool valid() const {
    return l > 0.0 && w > 0.0 && h > 0.0 && std::isfinite(cx) && std::isfinite(cy) &&
           std::isfinite(cz) && yaw >= -std::numbers::pi && yaw < std::numbers::pi;
  }
  double volume() const { return l * w * h; }

  friend bool operator==(const Box3D&, const Box3D&) = default;
};

/// Yaw rotation about +z followed by a translation.
struct Pose {
  double yaw = 0.0;
  std::array<double, 3> translation{0.0, 0.0, 0.0};
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

}  // namespace assoc3d
