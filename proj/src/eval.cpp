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

#include "assoc3d/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "assoc3d/geometry.hpp"

namespace assoc3d::eval {

void EvalConfig::validate() const {
  if (interpolation_points != 11 && interpolation_points != 40) {
    throw std::invalid_argument("interpolation_points must be 11 or 40");
  }
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw std::invalid_argument("iou_threshold must lie in (0, 1]");
}

namespace {

double match_iou(const Box3D& det, const Box3D& gt, IouMode mode) {
  return mode == IouMode::kBev ? geom::rotated_iou_bev(det, gt) : geom::iou_3d(det, gt);
}

}  // namespace

double interpolated_ap(const std::vector<PrPoint>& curve, int points) {
  double sum = 0.0;
  for (int i = 0; i < points; ++i) {
    // 11-point samples recall 0, 0.1, ..., 1; 40-point samples 1/40, ..., 1.
    const double r = points == 11 ? i / 10.0 : (i + 1) / 40.0;
    double best = 0.0;
    for (const auto& p : curve) {
      if (p.recall >= r - 1e-12) best = std::max(best, p.precision);
    }
    sum += best;
  }
  return 100.0 * sum / points;
}

EvalResult average_precision(const std::vector<std::vector<head::Detection>>& detections,
                             const std::vector<std::vector<Box3D>>& gts, const EvalConfig& config) {
  config.validate();
  if (detections.size() != gts.size()) throw std::invalid_argument("detections and ground truth differ in scene count");
  struct Ref {
    std::size_t scene, index;
    double score;
  };
  std::vector<Ref> order;
  EvalResult r;
  for (std::size_t s = 0; s < gts.size(); ++s) {
    r.num_gt += gts[s].size();
    for (std::size_t i = 0; i < detections[s].size(); ++i) order.push_back({s, i, detections[s][i].score});
  }
  r.num_detections = order.size();
  std::stable_sort(order.begin(), order.end(), [](const Ref& a, const Ref& b) { return a.score > b.score; });
  if (r.num_gt == 0) {
    r.undefined = true;
    r.false_positives = order.size();
    return r;
  }
  std::vector<std::vector<bool>> used(gts.size());
  for (std::size_t s = 0; s < gts.size(); ++s) used[s].assign(gts[s].size(), false);
  for (const Ref& ref : order) {
    const Box3D& det = detections[ref.scene][ref.index].box;
    double best = -1.0;
    std::size_t best_g = 0;
    for (std::size_t g = 0; g < gts[ref.scene].size(); ++g) {
      if (used[ref.scene][g]) continue;
      const double iou = match_iou(det, gts[ref.scene][g], config.mode);
      if (iou > best) {
        best = iou;
        best_g = g;
      }
    }
    if (best >= config.iou_threshold) {
      used[ref.scene][best_g] = true;
      ++r.true_positives;
    } else {
      ++r.false_positives;
    }
    const double tp = static_cast<double>(r.true_positives);
    r.curve.push_back({tp / static_cast<double>(r.num_gt), tp / static_cast<double>(r.true_positives + r.false_positives)});
  }
  r.ap = interpolated_ap(r.curve, config.interpolation_points);
  return r;
}

EvalReport evaluate_detections(const std::vector<std::vector<head::Detection>>& detections,
                               const std::vector<std::vector<Box3D>>& gts, const EvalConfig& config) {
  EvalReport report;
  report.scenes = gts.size();
  report.config = config;
  report.overall = average_precision(detections, gts, config);
  if (!config.distance_buckets) return report;
  const double inf = std::numeric_limits<double>::infinity();
  const struct {
    const char* name;
    double lo, hi;
  } ranges[] = {{"0-20m", 0.0, 20.0}, {"20-40m", 20.0, 40.0}, {"40m+", 40.0, inf}};
  for (const auto& range : ranges) {
    auto in = [&](const Box3D& b) {
      const double d = std::hypot(b.cx, b.cy);
      return d >= range.lo && d < range.hi;
    };
    std::vector<std::vector<head::Detection>> dets(detections.size());
    std::vector<std::vector<Box3D>> boxes(gts.size());
    for (std::size_t s = 0; s < gts.size(); ++s) {
      for (const auto& d : detections[s]) {
        if (in(d.box)) dets[s].push_back(d);
      }
      for (const auto& b : gts[s]) {
        if (in(b)) boxes[s].push_back(b);
      }
    }
    report.buckets.push_back({range.name, range.lo, range.hi, average_precision(dets, boxes, config)});
  }
  return report;
}

EvalReport evaluate(const ad::ParameterSet& params, const std::vector<io::Scene>& dataset,
                    const DetectorConfig& detector, const EvalConfig& config,
                    std::vector<std::vector<head::Detection>>* detections) {
  const net::Branch branch = branch_of(params);
  std::vector<std::vector<head::Detection>> dets;
  std::vector<std::vector<Box3D>> gts;
  for (const auto& scene : dataset) {
    dets.push_back(detect(params, scene.points, detector, branch));
    gts.push_back(active_boxes(scene, detector.network.grid));
  }
  EvalReport report = evaluate_detections(dets, gts, config);
  if (detections) *detections = std::move(dets);
  return report;
}

namespace {

nlohmann::ordered_json result_json(const EvalResult& r) {
  nlohmann::ordered_json j;
  j["ap"] = r.ap;
  j["num_gt"] = r.num_gt;
  j["num_detections"] = r.num_detections;
  j["true_positives"] = r.true_positives;
  j["false_positives"] = r.false_positives;
  j["undefined"] = r.undefined;
  return j;
}

}  // namespace

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["scenes"] = report.scenes;
  j["iou_threshold"] = report.config.iou_threshold;
  j["interpolation_points"] = report.config.interpolation_points;
  j["metric"] = report.config.mode == IouMode::kBev ? "bev" : "3d";
  j["overall"] = result_json(report.overall);
  nlohmann::ordered_json buckets = nlohmann::ordered_json::array();
  for (const auto& b : report.buckets) {
    nlohmann::ordered_json e = result_json(b.result);
    e["bucket"] = b.name;
    buckets.push_back(std::move(e));
  }
  j["buckets"] = std::move(buckets);
  return j.dump(2) + "\n";
}

void write_detections(const std::filesystem::path& path, const std::vector<head::Detection>& detections) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write detections " + path.string());
  char line[256];
  for (const auto& d : detections) {
    const Box3D& b = d.box;
    std::snprintf(line, sizeof(line), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", b.cx, b.cy, b.cz, b.l, b.w,
                  b.h, b.yaw, d.score);
    out << line;
  }
}

std::vector<head::Detection> read_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open detections " + path.string());
  std::vector<head::Detection> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    head::Detection d;
    Box3D& b = d.box;
    if (!(ss >> b.cx >> b.cy >> b.cz >> b.l >> b.w >> b.h >> b.yaw >> d.score)) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(n) + ": expected 8 numbers");
    }
    out.push_back(d);
  }
  return out;
}

}  // namespace assoc3d::eval
