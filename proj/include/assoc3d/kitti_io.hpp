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
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "assoc3d/types.hpp"

namespace assoc3d::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input. line() is 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& detail, const std::string& source = {})
      : std::runtime_error((source.empty() ? "" : source + ": ") + "line " + std::to_string(line) + ": " + detail),
        line_(line),
        detail_(detail) {}
  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

/// Row-major KITTI calibration matrices.
struct Calibration {
  std::array<double, 12> p2{};              // 3x4
  std::array<double, 9> r0_rect{};          // 3x3
  std::array<double, 12> tr_velo_to_cam{};  // 3x4 [R | t]

  /// Identity rectification and the usual LiDAR-to-camera axis permutation
  /// (cam x = -lidar y, cam y = -lidar z, cam z = lidar x).
  static Calibration axis_permutation();

  /// Throws IoError unless both rotation blocks are orthonormal within 1e-3.
  void validate() const;
};

/// A label_2 box: bottom-center location in the rectified camera frame.
struct CameraBox {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double h = 1.0;
  double w = 1.0;
  double l = 1.0;
  double rotation_y = 0.0;
};

struct ObjectAnnotation {
  std::string class_name = "Car";
  Box3D box;  // sensor frame, geometric center
  double truncated = 0.0;
  int occluded = 0;
  std::size_t num_points = 0;
  bool ignore = false;  // DontCare regions
};

/// Reads little-endian float32 (x, y, z, intensity) records.
PointCloud read_point_cloud(const std::filesystem::path& path);
PointCloud parse_point_cloud(const std::vector<char>& bytes);

Calibration read_calibration(const std::filesystem::path& path);
Calibration parse_calibration(std::istream& in);

std::vector<ObjectAnnotation> read_labels(const std::filesystem::path& path, const Calibration& calib);
std::vector<ObjectAnnotation> parse_labels(std::istream& in, const Calibration& calib);

/// Throws IoError for a singular calibration rotation.
Box3D camera_box_to_lidar(const CameraBox& box, const Calibration& calib);
CameraBox lidar_box_to_camera(const Box3D& box, const Calibration& calib);

/// Fills num_points for every annotation.
void count_points(std::vector<ObjectAnnotation>& objects, const PointCloud& cloud);

// ---------------------------------------------------------------------------
// Native scene directories: <scene>/points.bin holds float64 (x, y, z,
// intensity) records, <scene>/boxes.txt one "cx cy cz l w h yaw" line per box.

struct Scene {
  std::string id;
  PointCloud points;
  std::vector<ObjectAnnotation> objects;
};

void write_native_points(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_native_points(const std::filesystem::path& path);

std::vector<ObjectAnnotation> parse_native_boxes(std::istream& in);

void write_native_scene(const std::filesystem::path& dir, const Scene& scene);
Scene read_native_scene(const std::filesystem::path& dir);

/// Scene sub-directories of a dataset, sorted by name.
std::vector<std::filesystem::path> list_scenes(const std::filesystem::path& dataset);
std::vector<Scene> read_native_dataset(const std::filesystem::path& dataset);
void write_native_dataset(const std::filesystem::path& dataset, const std::vector<Scene>& scenes);

/// KITTI object layout: velodyne/, label_2/, calib/ keyed by frame id.
Scene read_kitti_frame(const std::filesystem::path& root, const std::string& frame_id);

}  // namespace assoc3d::io
