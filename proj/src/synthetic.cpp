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

#include "assoc3d/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "assoc3d/geometry.hpp"
#include "assoc3d/seeding.hpp"

namespace assoc3d::synth {

namespace {

constexpr double kInset = 0.01;

}  // namespace

PointCloud sample_car(const Box3D& car, double density, double reference_range, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Pose pose = geom::box_pose(car);
  const double hl = car.l / 2 - kInset;
  const double hw = car.w / 2 - kInset;
  const double hh = car.h / 2 - kInset;
  // Face: fixed axis, its sign, and the two spanned half-extents.
  struct Face {
    int axis;
    double sign;
  };
  const Face faces[] = {{0, 1.0}, {0, -1.0}, {1, 1.0}, {1, -1.0}, {2, 1.0}};
  const double half[3] = {hl, hw, hh};
  const double c = std::cos(car.yaw);
  const double s = std::sin(car.yaw);
  PointCloud out;
  for (const Face& f : faces) {
    double normal_local[3] = {0.0, 0.0, 0.0};
    normal_local[f.axis] = f.sign;
    const double nx = c * normal_local[0] - s * normal_local[1];
    const double ny = s * normal_local[0] + c * normal_local[1];
    const double nz = normal_local[2];
    double centre_local[3] = {0.0, 0.0, 0.0};
    centre_local[f.axis] = f.sign * half[f.axis];
    const PointCloud centre = geom::transform_points({{centre_local[0], centre_local[1], centre_local[2], 0.0}}, pose);
    const Point& fc = centre.front();
    if (nx * -fc.x + ny * -fc.y + nz * -fc.z <= 0.0) continue;
    const int u = (f.axis + 1) % 3;
    const int v = (f.axis + 2) % 3;
    const double area = 4.0 * half[u] * half[v];
    const double range = std::max(std::hypot(fc.x, fc.y, fc.z), 0.5);
    const double falloff = (reference_range / range) * (reference_range / range);
    const auto count = static_cast<std::size_t>(std::llround(density * area * falloff));
    PointCloud local;
    local.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      double q[3];
      q[f.axis] = f.sign * half[f.axis];
      q[u] = (2.0 * unit(rng) - 1.0) * half[u];
      q[v] = (2.0 * unit(rng) - 1.0) * half[v];
      local.push_back({q[0], q[1], q[2], 0.2 + 0.6 * unit(rng)});
    }
    const PointCloud placed = geom::transform_points(local, pose);
    out.insert(out.end(), placed.begin(), placed.end());
  }
  return out;
}

bool segment_hits_box(const Point& p, const Box3D& box) {
  const Point q = geom::to_box_frame(p, box);
  const Point o = geom::to_box_frame({0.0, 0.0, 0.0, 0.0}, box);
  const double a[3] = {o.x, o.y, o.z};
  const double d[3] = {q.x - o.x, q.y - o.y, q.z - o.z};
  const double half[3] = {box.l / 2, box.w / 2, box.h / 2};
  double t0 = 0.0;
  double t1 = 1.0 - 1e-9;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (a[k] < -half[k] || a[k] > half[k]) return false;
      continue;
    }
    double lo = (-half[k] - a[k]) / d[k];
    double hi = (half[k] - a[k]) / d[k];
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
    if (t0 > t1) return false;
  }
  return true;
}

io::Scene generate_scene(const SyntheticConfig& config, std::size_t index) {
  config.grid.validate();
  std::mt19937_64 rng(mix_seed(config.seed, index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const auto& lo = config.grid.range_min;
  const auto& hi = config.grid.range_max;

  io::Scene scene;
  char id[32];
  std::snprintf(id, sizeof(id), "scene_%03zu", index);
  scene.id = id;

  const std::size_t span = config.max_cars >= config.min_cars ? config.max_cars - config.min_cars : 0;
  const std::size_t want = config.min_cars + static_cast<std::size_t>(unit(rng) * static_cast<double>(span + 1));
  std::vector<Box3D> cars;
  for (std::size_t attempt = 0; attempt < 200 && cars.size() < want; ++attempt) {
    Box3D b;
    b.l = uniform(3.6, 4.3);
    b.w = uniform(1.5, 1.8);
    b.h = uniform(1.4, 1.6);
    b.yaw = uniform(-std::numbers::pi, std::numbers::pi);
    const double reach = std::hypot(b.l, b.w) / 2 + 0.2;
    b.cx = uniform(std::max(lo[0] + reach, 2.5), hi[0] - reach);
    b.cy = uniform(lo[1] + reach, hi[1] - reach);
    b.cz = config.ground_z + 0.05 + b.h / 2;
    Box3D grown = b;
    grown.l += 0.6;
    grown.w += 0.6;
    const bool clash = std::any_of(cars.begin(), cars.end(),
                                   [&](const Box3D& o) { return geom::bev_intersection_area(grown, o) > 0.0; });
    if (!clash) cars.push_back(b);
  }

  std::vector<PointCloud> per_car;
  for (std::size_t k = 0; k < cars.size(); ++k) {
    PointCloud pts = sample_car(cars[k], config.density, config.reference_range, rng());
    if (unit(rng) < config.sparsity_probability) {
      const double keep = uniform(0.15, 0.5);
      PointCloud kept;
      for (const Point& p : pts) {
        if (unit(rng) < keep) kept.push_back(p);
      }
      pts = std::move(kept);
    }
    if (unit(rng) < config.occlusion_probability) {
      // Cut away everything beyond a random plane across the car's length.
      const double cut = uniform(-0.25, 0.2) * cars[k].l;
      const double side = unit(rng) < 0.5 ? 1.0 : -1.0;
      PointCloud kept;
      for (const Point& p : pts) {
        if (side * geom::to_box_frame(p, cars[k]).x < cut) kept.push_back(p);
      }
      pts = std::move(kept);
    }
    per_car.push_back(std::move(pts));
  }

  auto visible = [&](const Point& p, std::size_t self) {
    if (!config.shadowing) return true;
    for (std::size_t k = 0; k < cars.size(); ++k) {
      if (k != self && segment_hits_box(p, cars[k])) return false;
    }
    return true;
  };
  std::normal_distribution<double> ground_noise(0.0, 0.02);
  for (std::size_t i = 0; i < config.ground_points; ++i) {
    const Point p{uniform(lo[0], hi[0]), uniform(lo[1], hi[1]), config.ground_z + ground_noise(rng),
                  0.1 * unit(rng)};
    if (visible(p, cars.size())) scene.points.push_back(p);
  }
  for (std::size_t k = 0; k < cars.size(); ++k) {
    for (const Point& p : per_car[k]) {
      if (visible(p, k)) scene.points.push_back(p);
    }
    io::ObjectAnnotation obj;
    obj.box = cars[k];
    scene.objects.push_back(obj);
  }
  io::count_points(scene.objects, scene.points);
  return scene;
}

std::vector<io::Scene> generate_dataset(const SyntheticConfig& config) {
  std::vector<io::Scene> out;
  out.reserve(config.scenes);
  for (std::size_t i = 0; i < config.scenes; ++i) out.push_back(generate_scene(config, i));
  return out;
}

}  // namespace assoc3d::synth
