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

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "assoc3d/kitti_io.hpp"
#include "test_util.hpp"

namespace io = assoc3d::io;
using assoc3d::Box3D;
using assoc3d::Point;

namespace {

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Calibration of KITTI object training frame 000000.
constexpr const char* kFrameCalib =
    "P0: 7.215377e+02 0.000000e+00 6.095593e+02 0.000000e+00 0.000000e+00 7.215377e+02 1.728540e+02 "
    "0.000000e+00 0.000000e+00 0.000000e+00 1.000000e+00 0.000000e+00\n"
    "P2: 7.215377e+02 0.000000e+00 6.095593e+02 4.485728e+01 0.000000e+00 7.215377e+02 1.728540e+02 "
    "2.163791e-01 0.000000e+00 0.000000e+00 1.000000e+00 2.745884e-03\n"
    "R0_rect: 9.999239e-01 9.837760e-03 -7.445048e-03 -9.869795e-03 9.999421e-01 -4.278459e-03 "
    "7.402527e-03 4.351614e-03 9.999631e-01\n"
    "Tr_velo_to_cam: 7.533745e-03 -9.999714e-01 -6.166020e-04 -4.069766e-03 1.480249e-02 7.280733e-04 "
    "-9.998902e-01 -7.631618e-02 9.998621e-01 7.523790e-03 1.480755e-02 -2.717806e-01\n";

// Camera point -> velodyne through the inverse of R0 * [R | t], solved with
// Eigen rather than the library's own inversion.
Eigen::Vector3d cam_to_velo(const io::Calibration& c, const Eigen::Vector3d& cam) {
  Eigen::Matrix3d r0, r;
  Eigen::Vector3d t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      r0(i, j) = c.r0_rect[i * 3 + j];
      r(i, j) = c.tr_velo_to_cam[i * 4 + j];
    }
    t(i) = c.tr_velo_to_cam[i * 4 + 3];
  }
  const Eigen::Vector3d unrect = r0.fullPivLu().solve(cam);
  return r.fullPivLu().solve(unrect - t);
}

}  // namespace

TEST(ReadPointCloud, SingleRecord) {
  const auto dir = testutil::temp_dir("pc_single");
  // 1.0, 2.0, 3.0, 0.5 as little-endian float32.
  write_bytes(dir / "one.bin", {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x40, 0x00, 0x00, 0x40, 0x40, 0x00, 0x00,
                                0x00, 0x3f});
  const auto cloud = io::read_point_cloud(dir / "one.bin");
  ASSERT_EQ(cloud.size(), 1u);
  EXPECT_EQ(cloud[0], (Point{1.0, 2.0, 3.0, 0.5}));
}

TEST(ReadPointCloud, EmptyFile) {
  const auto dir = testutil::temp_dir("pc_empty");
  write_bytes(dir / "empty.bin", {});
  EXPECT_TRUE(io::read_point_cloud(dir / "empty.bin").empty());
}

TEST(ReadPointCloud, HexDumpFixture) {
  const auto dir = testutil::temp_dir("pc_hex");
  // Hand-decoded: 0x41200000 = 10, 0xc0a00000 = -5, 0x3e800000 = 0.25,
  // 0x3f400000 = 0.75, 0x42c80000 = 100, 0xbf800000 = -1, 0x00000000 = 0,
  // 0x3f800000 = 1, 0x40490fdb = 3.14159274, 0xc1200000 = -10.
  write_bytes(dir / "three.bin",
              {0x00, 0x00, 0x20, 0x41, 0x00, 0x00, 0xa0, 0xc0, 0x00, 0x00, 0x80, 0x3e, 0x00, 0x00, 0x40, 0x3f,
               0x00, 0x00, 0xc8, 0x42, 0x00, 0x00, 0x80, 0xbf, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3f,
               0xdb, 0x0f, 0x49, 0x40, 0x00, 0x00, 0x20, 0xc1, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00});
  const auto cloud = io::read_point_cloud(dir / "three.bin");
  ASSERT_EQ(cloud.size(), 3u);
  EXPECT_EQ(cloud[0], (Point{10.0, -5.0, 0.25, 0.75}));
  EXPECT_EQ(cloud[1], (Point{100.0, -1.0, 0.0, 1.0}));
  EXPECT_EQ(cloud[2].x, static_cast<double>(3.14159274101257324f));
  EXPECT_EQ(cloud[2].y, -10.0);
  EXPECT_EQ(cloud[2].z, 0.0);
}

TEST(ReadPointCloud, Errors) {
  const auto dir = testutil::temp_dir("pc_err");
  EXPECT_THROW(io::read_point_cloud(dir / "missing.bin"), io::IoError);
  write_bytes(dir / "short.bin", std::vector<unsigned char>(20, 0));
  EXPECT_THROW(io::read_point_cloud(dir / "short.bin"), io::IoError);
}

TEST(ReadLabels, FieldMapping) {
  std::istringstream in("Car 0.00 0 -1.58 587.0 173.3 614.1 200.1 1.50 1.60 3.90 1.84 1.47 8.41 0.01\n");
  const auto labels = io::parse_labels(in, io::Calibration::axis_permutation());
  ASSERT_EQ(labels.size(), 1u);
  EXPECT_EQ(labels[0].class_name, "Car");
  EXPECT_DOUBLE_EQ(labels[0].box.l, 3.9);
  EXPECT_DOUBLE_EQ(labels[0].box.w, 1.6);
  EXPECT_DOUBLE_EQ(labels[0].box.h, 1.5);
  EXPECT_FALSE(labels[0].ignore);
}

TEST(ReadLabels, DontCareIsFlagged) {
  std::istringstream in("DontCare -1 -1 -10 503.9 169.7 590.7 190.1 -1 -1 -1 -1000 -1000 -1000 -10\n"
                        "Car 0.00 0 0 0 0 10 10 1.5 1.6 3.9 1 1.5 10 0\n");
  const auto labels = io::parse_labels(in, io::Calibration::axis_permutation());
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_TRUE(labels[0].ignore);
  EXPECT_FALSE(labels[1].ignore);
}

TEST(ReadLabels, TwoCarFixtureMatchesMatrixChain) {
  std::istringstream calib_text(kFrameCalib);
  const auto calib = io::parse_calibration(calib_text);
  std::istringstream in("Car 0.00 0 0 0 0 10 10 1.50 1.60 3.90 2.0 1.5 10.0 0.3\n"
                        "Car 0.50 2 0 0 0 10 10 1.40 1.70 4.20 -4.0 1.7 25.0 -1.2\n");
  const auto labels = io::parse_labels(in, calib);
  ASSERT_EQ(labels.size(), 2u);
  const double loc[2][3] = {{2.0, 1.5, 10.0}, {-4.0, 1.7, 25.0}};
  const double heights[2] = {1.5, 1.4};
  for (int i = 0; i < 2; ++i) {
    const Eigen::Vector3d v = cam_to_velo(calib, {loc[i][0], loc[i][1], loc[i][2]});
    EXPECT_NEAR(labels[i].box.cx, v.x(), 1e-9);
    EXPECT_NEAR(labels[i].box.cy, v.y(), 1e-9);
    EXPECT_NEAR(labels[i].box.cz, v.z() + heights[i] / 2, 1e-9);
  }
  EXPECT_DOUBLE_EQ(labels[1].truncated, 0.5);
  EXPECT_EQ(labels[1].occluded, 2);
}

TEST(ReadLabels, PositionedErrors) {
  std::istringstream few("Car 0 0 0 0 0 10 10 1.5 1.6 3.9 1 1.5 10 0\nCar 0 0 0\n");
  try {
    io::parse_labels(few, io::Calibration::axis_permutation());
    FAIL() << "expected a parse error";
  } catch (const io::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream bad("Car 0 0 0 0 0 10 10 1.5 abc 3.9 1 1.5 10 0\n");
  try {
    io::parse_labels(bad, io::Calibration::axis_permutation());
    FAIL() << "expected a parse error";
  } catch (const io::ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(ReadLabels, EveryNonEmptyLineYieldsOneAnnotation) {
  std::istringstream in("\nCar 0 0 0 0 0 10 10 1.5 1.6 3.9 1 1.5 10 0\n\nVan 0 0 0 0 0 10 10 2 1.8 5 3 1.5 20 1\n\n");
  const auto labels = io::parse_labels(in, io::Calibration::axis_permutation());
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(labels[0].class_name, "Car");
  EXPECT_EQ(labels[1].class_name, "Van");
}

TEST(CameraBoxToLidar, PermutationCase) {
  const io::CameraBox cam{2.0, 1.5, 10.0, 1.5, 1.6, 3.9, 0.0};
  const Box3D b = io::camera_box_to_lidar(cam, io::Calibration::axis_permutation());
  // lidar x = cam z, lidar y = -cam x, lidar z = -cam y, then lifted by h/2.
  EXPECT_NEAR(b.cx, 10.0, 1e-12);
  EXPECT_NEAR(b.cy, -2.0, 1e-12);
  EXPECT_NEAR(b.cz, -1.5 + 0.75, 1e-12);
}

TEST(CameraBoxToLidar, YawConvention) {
  // rotation_y = 0 points along camera +x, which is sensor -y.
  const io::CameraBox cam{0.0, 0.0, 10.0, 1.5, 1.6, 3.9, 0.0};
  const Box3D b = io::camera_box_to_lidar(cam, io::Calibration::axis_permutation());
  EXPECT_NEAR(b.yaw, -std::numbers::pi / 2, 1e-12);
  const io::CameraBox forward{0.0, 0.0, 10.0, 1.5, 1.6, 3.9, -std::numbers::pi / 2};
  EXPECT_NEAR(io::camera_box_to_lidar(forward, io::Calibration::axis_permutation()).yaw, 0.0, 1e-12);
}

TEST(CameraBoxToLidar, RoundTripOnRealCalibration) {
  std::istringstream calib_text(kFrameCalib);
  const auto calib = io::parse_calibration(calib_text);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-20, 20), d(0.5, 5), r(-3.1, 3.1);
  for (int i = 0; i < 200; ++i) {
    const io::CameraBox cam{u(rng), u(rng), u(rng) + 30, d(rng), d(rng), d(rng), r(rng)};
    const io::CameraBox back = io::lidar_box_to_camera(io::camera_box_to_lidar(cam, calib), calib);
    EXPECT_NEAR(back.x, cam.x, 1e-9);
    EXPECT_NEAR(back.y, cam.y, 1e-9);
    EXPECT_NEAR(back.z, cam.z, 1e-9);
    EXPECT_NEAR(back.h, cam.h, 1e-9);
    EXPECT_NEAR(back.w, cam.w, 1e-9);
    EXPECT_NEAR(back.l, cam.l, 1e-9);
    EXPECT_NEAR(back.rotation_y, cam.rotation_y, 1e-9);
  }
}

TEST(Calibration, RejectsNonOrthonormalRotation) {
  auto calib = io::Calibration::axis_permutation();
  calib.r0_rect[0] = 2.0;
  EXPECT_THROW(calib.validate(), io::IoError);
  auto singular = io::Calibration::axis_permutation();
  for (int j = 0; j < 3; ++j) singular.tr_velo_to_cam[j] = 0.0;
  EXPECT_THROW(io::camera_box_to_lidar({}, singular), io::IoError);
}

TEST(NativeFormat, PointRoundTripIsBitExact) {
  const auto dir = testutil::temp_dir("native_points");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50, 50);
  assoc3d::PointCloud cloud;
  for (int i = 0; i < 500; ++i) cloud.push_back({u(rng), u(rng), u(rng) / 7, u(rng) / 3});
  io::write_native_points(dir / "points.bin", cloud);
  EXPECT_EQ(io::read_native_points(dir / "points.bin"), cloud);
}

TEST(NativeFormat, SceneRoundTrip) {
  const auto dir = testutil::temp_dir("native_scene");
  io::Scene scene;
  scene.id = "scene_000";
  scene.points = {{1, 2, 3, 0.5}, {4, 5, 6, 0.25}};
  io::ObjectAnnotation obj;
  obj.box = {5.5, -1.25, -0.97, 3.9, 1.6, 1.56, 0.3};
  scene.objects.push_back(obj);
  io::write_native_scene(dir / scene.id, scene);
  const auto back = io::read_native_scene(dir / scene.id);
  EXPECT_EQ(back.id, scene.id);
  EXPECT_EQ(back.points, scene.points);
  ASSERT_EQ(back.objects.size(), 1u);
  EXPECT_EQ(back.objects[0].box, obj.box);
}

TEST(NativeFormat, BoxParseErrorNamesLine) {
  std::istringstream in("1 2 3 4 5 6 0\n1 2 3\n");
  try {
    io::parse_native_boxes(in);
    FAIL();
  } catch (const io::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(CountPoints, FillsAnnotationCounts) {
  std::vector<io::ObjectAnnotation> objs(1);
  objs[0].box = {0, 0, 0, 2, 2, 2, 0};
  io::count_points(objs, {{0, 0, 0, 0}, {0.9, 0.9, 0.9, 0}, {3, 0, 0, 0}});
  EXPECT_EQ(objs[0].num_points, 2u);
}
