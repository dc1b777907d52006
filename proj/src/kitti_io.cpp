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

#include "assoc3d/kitti_io.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "assoc3d/geometry.hpp"

namespace assoc3d::io {

static_assert(std::endian::native == std::endian::little, "point files are little-endian");

namespace fs = std::filesystem;

namespace {

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::ifstream open_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

double to_number(const std::string& tok, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ParseError(line, "non-numeric field '" + tok + "'");
  }
  if (used != tok.size()) throw ParseError(line, "non-numeric field '" + tok + "'");
  return v;
}

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

Mat3 rect_matrix(const Calibration& c) {
  Mat3 m;
  m << c.r0_rect[0], c.r0_rect[1], c.r0_rect[2], c.r0_rect[3], c.r0_rect[4], c.r0_rect[5], c.r0_rect[6],
      c.r0_rect[7], c.r0_rect[8];
  return m;
}

Mat3 tr_rotation(const Calibration& c) {
  const auto& t = c.tr_velo_to_cam;
  Mat3 m;
  m << t[0], t[1], t[2], t[4], t[5], t[6], t[8], t[9], t[10];
  return m;
}

Vec3 tr_translation(const Calibration& c) {
  const auto& t = c.tr_velo_to_cam;
  return {t[3], t[7], t[11]};
}

bool orthonormal(const Mat3& m, double tol) {
  return ((m.transpose() * m) - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol;
}

Mat3 checked_inverse(const Mat3& m, const char* name) {
  if (std::abs(m.determinant()) < 1e-12) throw IoError(std::string("singular calibration matrix ") + name);
  return m.inverse();
}

}  // namespace

Calibration Calibration::axis_permutation() {
  Calibration c;
  c.p2 = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
  c.r0_rect = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  c.tr_velo_to_cam = {0, -1, 0, 0, 0, 0, -1, 0, 1, 0, 0, 0};
  return c;
}

void Calibration::validate() const {
  if (!orthonormal(rect_matrix(*this), 1e-3)) throw IoError("R0_rect is not orthonormal");
  if (!orthonormal(tr_rotation(*this), 1e-3)) throw IoError("Tr_velo_to_cam rotation is not orthonormal");
}

PointCloud parse_point_cloud(const std::vector<char>& bytes) {
  constexpr std::size_t kRecord = 4 * sizeof(float);
  if (bytes.size() % kRecord != 0) {
    throw IoError("truncated point record: " + std::to_string(bytes.size()) + " bytes is not a multiple of 16");
  }
  PointCloud cloud(bytes.size() / kRecord);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    float rec[4];
    std::memcpy(rec, bytes.data() + i * kRecord, kRecord);
    cloud[i] = {rec[0], rec[1], rec[2], rec[3]};
  }
  return cloud;
}

PointCloud read_point_cloud(const fs::path& path) {
  try {
    return parse_point_cloud(slurp(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Calibration parse_calibration(std::istream& in) {
  Calibration calib;
  bool have_p2 = false;
  bool have_r0 = false;
  bool have_tr = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw ParseError(lineno, "expected 'KEY: values'");
    const std::string key = line.substr(0, colon);
    const auto toks = split_ws(line.substr(colon + 1));
    auto fill = [&](auto& dst, bool& seen) {
      if (toks.size() != dst.size()) {
        throw ParseError(lineno, key + " expects " + std::to_string(dst.size()) + " values");
      }
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = to_number(toks[i], lineno);
      seen = true;
    };
    if (key == "P2") {
      fill(calib.p2, have_p2);
    } else if (key == "R0_rect" || key == "R_rect") {
      fill(calib.r0_rect, have_r0);
    } else if (key == "Tr_velo_to_cam" || key == "Tr_velo_cam") {
      fill(calib.tr_velo_to_cam, have_tr);
    }
  }
  if (!have_p2 || !have_r0 || !have_tr) throw ParseError(lineno, "calibration needs P2, R0_rect and Tr_velo_to_cam");
  calib.validate();
  return calib;
}

Calibration read_calibration(const fs::path& path) {
  auto in = open_text(path);
  return parse_calibration(in);
}

Box3D camera_box_to_lidar(const CameraBox& box, const Calibration& calib) {
  const Mat3 r0_inv = checked_inverse(rect_matrix(calib), "R0_rect");
  const Mat3 tr_inv = checked_inverse(tr_rotation(calib), "Tr_velo_to_cam");
  const Vec3 unrect = r0_inv * Vec3(box.x, box.y, box.z);
  const Vec3 velo = tr_inv * (unrect - tr_translation(calib));
  Box3D out;
  out.cx = velo.x();
  out.cy = velo.y();
  out.cz = velo.z() + 0.5 * box.h;
  out.l = box.l;
  out.w = box.w;
  out.h = box.h;
  out.yaw = normalize_angle(-box.rotation_y - 0.5 * std::numbers::pi);
  return out;
}

CameraBox lidar_box_to_camera(const Box3D& box, const Calibration& calib) {
  const Vec3 velo(box.cx, box.cy, box.cz - 0.5 * box.h);
  const Vec3 cam = rect_matrix(calib) * (tr_rotation(calib) * velo + tr_translation(calib));
  CameraBox out;
  out.x = cam.x();
  out.y = cam.y();
  out.z = cam.z();
  out.h = box.h;
  out.w = box.w;
  out.l = box.l;
  out.rotation_y = normalize_angle(-box.yaw - 0.5 * std::numbers::pi);
  return out;
}

std::vector<ObjectAnnotation> parse_labels(std::istream& in, const Calibration& calib) {
  std::vector<ObjectAnnotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const auto toks = split_ws(line);
    if (toks.size() < 15) {
      throw ParseError(lineno, "expected at least 15 fields, got " + std::to_string(toks.size()));
    }
    std::array<double, 14> v{};
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = to_number(toks[i + 1], lineno);
    ObjectAnnotation obj;
    obj.class_name = toks[0];
    obj.truncated = v[0];
    obj.occluded = static_cast<int>(v[1]);
    obj.ignore = obj.class_name == "DontCare";
    // v[2] alpha and v[3..6] the image-plane box are not used.
    CameraBox cam{v[10], v[11], v[12], v[7], v[8], v[9], v[13]};
    if (obj.ignore) {
      // DontCare rows carry placeholder dimensions (-1).
      cam.h = std::max(cam.h, 1e-3);
      cam.w = std::max(cam.w, 1e-3);
      cam.l = std::max(cam.l, 1e-3);
    } else if (!(cam.h > 0.0 && cam.w > 0.0 && cam.l > 0.0)) {
      throw ParseError(lineno, "box dimensions must be positive");
    }
    obj.box = camera_box_to_lidar(cam, calib);
    out.push_back(std::move(obj));
  }
  return out;
}

std::vector<ObjectAnnotation> read_labels(const fs::path& path, const Calibration& calib) {
  auto in = open_text(path);
  try {
    return parse_labels(in, calib);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path.string());
  }
}

void count_points(std::vector<ObjectAnnotation>& objects, const PointCloud& cloud) {
  for (auto& obj : objects) obj.num_points = geom::points_in_box(cloud, obj.box).size();
}

void write_native_points(const fs::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const Point& p : cloud) {
    const double rec[4] = {p.x, p.y, p.z, p.intensity};
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
  if (!out) throw IoError("short write to " + path.string());
}

PointCloud read_native_points(const fs::path& path) {
  const auto bytes = slurp(path);
  constexpr std::size_t kRecord = 4 * sizeof(double);
  if (bytes.size() % kRecord != 0) throw IoError(path.string() + ": truncated point record");
  PointCloud cloud(bytes.size() / kRecord);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double rec[4];
    std::memcpy(rec, bytes.data() + i * kRecord, kRecord);
    cloud[i] = {rec[0], rec[1], rec[2], rec[3]};
  }
  return cloud;
}

std::vector<ObjectAnnotation> parse_native_boxes(std::istream& in) {
  std::vector<ObjectAnnotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const auto toks = split_ws(line);
    if (toks.size() != 7) throw ParseError(lineno, "expected 'cx cy cz l w h yaw'");
    ObjectAnnotation obj;
    Box3D& b = obj.box;
    b.cx = to_number(toks[0], lineno);
    b.cy = to_number(toks[1], lineno);
    b.cz = to_number(toks[2], lineno);
    b.l = to_number(toks[3], lineno);
    b.w = to_number(toks[4], lineno);
    b.h = to_number(toks[5], lineno);
    b.yaw = to_number(toks[6], lineno);
    if (!(b.l > 0.0 && b.w > 0.0 && b.h > 0.0)) throw ParseError(lineno, "box dimensions must be positive");
    b.yaw = normalize_angle(b.yaw);
    out.push_back(obj);
  }
  return out;
}

void write_native_scene(const fs::path& dir, const Scene& scene) {
  fs::create_directories(dir);
  write_native_points(dir / "points.bin", scene.points);
  std::ofstream out(dir / "boxes.txt", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "boxes.txt").string());
  char buf[256];
  for (const auto& obj : scene.objects) {
    if (obj.ignore) continue;
    const Box3D& b = obj.box;
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", b.cx, b.cy, b.cz, b.l, b.w, b.h,
                  b.yaw);
    out << buf;
  }
}

Scene read_native_scene(const fs::path& dir) {
  Scene scene;
  scene.id = dir.filename().string();
  scene.points = read_native_points(dir / "points.bin");
  auto in = open_text(dir / "boxes.txt");
  try {
    scene.objects = parse_native_boxes(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), (dir / "boxes.txt").string());
  }
  count_points(scene.objects, scene.points);
  return scene;
}

std::vector<fs::path> list_scenes(const fs::path& dataset) {
  if (!fs::is_directory(dataset)) throw IoError("not a dataset directory: " + dataset.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dataset)) {
    if (entry.is_directory() && fs::exists(entry.path() / "points.bin")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Scene> read_native_dataset(const fs::path& dataset) {
  std::vector<Scene> scenes;
  for (const auto& dir : list_scenes(dataset)) scenes.push_back(read_native_scene(dir));
  return scenes;
}

void write_native_dataset(const fs::path& dataset, const std::vector<Scene>& scenes) {
  fs::create_directories(dataset);
  for (const auto& scene : scenes) write_native_scene(dataset / scene.id, scene);
}

Scene read_kitti_frame(const fs::path& root, const std::string& frame_id) {
  Scene scene;
  scene.id = frame_id;
  scene.points = read_point_cloud(root / "velodyne" / (frame_id + ".bin"));
  const Calibration calib = read_calibration(root / "calib" / (frame_id + ".txt"));
  scene.objects = read_labels(root / "label_2" / (frame_id + ".txt"), calib);
  count_points(scene.objects, scene.points);
  return scene;
}

}  // namespace assoc3d::io
