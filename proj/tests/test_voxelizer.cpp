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

#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "assoc3d/voxelizer.hpp"
#include "oracles.hpp"

using namespace assoc3d;
using voxel::GridConfig;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, const GridConfig& g, double margin = 0.0) {
  PointCloud c;
  std::uniform_real_distribution<double> ux(g.range_min[0] + margin, g.range_max[0] - margin);
  std::uniform_real_distribution<double> uy(g.range_min[1] + margin, g.range_max[1] - margin);
  std::uniform_real_distribution<double> uz(g.range_min[2] + margin, g.range_max[2] - margin);
  for (std::size_t i = 0; i < n; ++i) c.push_back({ux(rng), uy(rng), uz(rng), 0.5});
  return c;
}

}  // namespace

TEST(GridConfig, DefaultsAndMini) {
  EXPECT_EQ(GridConfig::kitti().dims(), (std::array<std::size_t, 3>{1408, 1600, 40}));
  EXPECT_EQ(GridConfig::mini().dims(), (std::array<std::size_t, 3>{64, 64, 8}));
  EXPECT_EQ(GridConfig::kitti().max_points_per_voxel, 5u);
  GridConfig bad = GridConfig::mini();
  bad.voxel_size[0] = 0.3;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  GridConfig zero = GridConfig::mini();
  zero.max_points_per_voxel = 0;
  EXPECT_THROW(zero.validate(), std::invalid_argument);
}

TEST(Voxelize, SinglePoint) {
  const auto v = voxel::voxelize({{1.05, 0.33, -0.2, 0.9}}, GridConfig::mini());
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v.channels(), 3u);
  EXPECT_EQ(v.coords[0], (voxel::Coord{5, 33, 5}));
  EXPECT_EQ(v.features[0], 1.05);
  EXPECT_EQ(v.features[1], 0.33);
  EXPECT_EQ(v.features[2], -0.2);
}

TEST(Voxelize, CapKeepsFirstFiveInCloudOrder) {
  PointCloud c;
  for (int i = 0; i < 7; ++i) c.push_back({1.01 + 0.01 * i, 0.01, 0.01, 0});
  const auto v = voxel::voxelize(c, GridConfig::mini());
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NEAR(v.features[0], (1.01 + 1.02 + 1.03 + 1.04 + 1.05) / 5, 1e-12);
}

TEST(Voxelize, MatchesDictionaryOracle) {
  std::mt19937_64 rng(1);
  GridConfig g = GridConfig::mini();
  PointCloud c = random_cloud(rng, 200, g);
  // Out-of-range points are dropped.
  c.push_back({-1, 0, 0, 0});
  c.push_back({0, 0, 5, 0});
  // Crowd a few voxels so the cap matters.
  for (int i = 0; i < 30; ++i) c.push_back({3.01 + 0.001 * i, 0.05, 0.1, 0});
  const auto v = voxel::voxelize(c, g);
  const auto want = oracle::voxelize_map(c, g.range_min, g.range_max, g.voxel_size, g.max_points_per_voxel);
  ASSERT_EQ(v.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(v.coords[i], want[i].coord);
    for (int d = 0; d < 3; ++d) EXPECT_NEAR(v.features[i * 3 + d], want[i].mean[d], 1e-12);
  }
}

TEST(Voxelize, TranslationByOnePitch) {
  std::mt19937_64 rng(2);
  const GridConfig g = GridConfig::mini();
  const PointCloud c = random_cloud(rng, 150, g, 1.0);
  PointCloud shifted = c;
  for (auto& p : shifted) p.x += g.voxel_size[0];
  const auto a = voxel::voxelize(c, g), b = voxel::voxelize(shifted, g);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(b.coords[i][0], a.coords[i][0] + 1);
    EXPECT_EQ(b.coords[i][1], a.coords[i][1]);
    EXPECT_NEAR(b.features[i * 3], a.features[i * 3] + g.voxel_size[0], 1e-12);
  }
}

TEST(Voxelize, PermutationStableBelowCap) {
  std::mt19937_64 rng(3);
  const GridConfig g = GridConfig::mini();
  const PointCloud c = random_cloud(rng, 100, g);
  PointCloud p = c;
  std::shuffle(p.begin(), p.end(), rng);
  const auto a = voxel::voxelize(c, g), b = voxel::voxelize(p, g);
  ASSERT_EQ(a.coords, b.coords);
  for (std::size_t i = 0; i < a.features.numel(); ++i) EXPECT_NEAR(a.features[i], b.features[i], 1e-12);
}

TEST(Voxelize, CoordsUniqueSortedAndNonEmpty) {
  std::mt19937_64 rng(4);
  const GridConfig g = GridConfig::mini();
  const auto v = voxel::voxelize(random_cloud(rng, 2000, g), g);
  EXPECT_TRUE(std::is_sorted(v.coords.begin(), v.coords.end()));
  EXPECT_EQ(std::set<voxel::Coord>(v.coords.begin(), v.coords.end()).size(), v.size());
  EXPECT_EQ(v.features.dim(0), v.size());
  EXPECT_TRUE(voxel::voxelize({}, g).coords.empty());
}

TEST(Voxelize, RandomCapIsSeeded) {
  GridConfig g = GridConfig::mini();
  g.cap_policy = voxel::CapPolicy::kRandom;
  g.cap_seed = 11;
  PointCloud c;
  for (int i = 0; i < 20; ++i) c.push_back({1.01 + 0.009 * i, 0.01, 0.01, 0});
  const auto a = voxel::voxelize(c, g), b = voxel::voxelize(c, g);
  EXPECT_EQ(a.features, b.features);
}
