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

#include <filesystem>
#include <string>
#include <vector>

#include "assoc3d/detector.hpp"

namespace assoc3d::eval {

enum class IouMode {
  kBev,  // rotated BEV IoU
  k3d,   // BEV intersection times vertical overlap
};

struct EvalConfig {
  double iou_threshold = 0.7;
  int interpolation_points = 40;  // 11 or 40
  IouMode mode = IouMode::kBev;
  bool distance_buckets = true;
  void validate() const;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct EvalResult {
  double ap = 0.0;  // percent
  std::vector<PrPoint> curve;
  std::size_t num_gt = 0;
  std::size_t num_detections = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  /// No ground truth: AP is reported as 0.
  bool undefined = false;
};

/// Per-scene detections and ground truth; matching never crosses scenes.
EvalResult average_precision(const std::vector<std::vector<head::Detection>>& detections,
                             const std::vector<std::vector<Box3D>>& gts, const EvalConfig& config);

/// Interpolated AP (percent) of a precision/recall sweep.
double interpolated_ap(const std::vector<PrPoint>& curve, int points);

struct Bucket {
  std::string name;
  double min_range = 0.0;
  double max_range = 0.0;  // infinity for the last bucket
  EvalResult result;
};

struct EvalReport {
  std::size_t scenes = 0;
  EvalConfig config;
  EvalResult overall;
  std::vector<Bucket> buckets;
};

EvalReport evaluate_detections(const std::vector<std::vector<head::Detection>>& detections,
                               const std::vector<std::vector<Box3D>>& gts, const EvalConfig& config);

/// Runs the detector over every scene and scores it.
EvalReport evaluate(const ad::ParameterSet& params, const std::vector<io::Scene>& dataset,
                    const DetectorConfig& detector, const EvalConfig& config,
                    std::vector<std::vector<head::Detection>>* detections = nullptr);

std::string report_json(const EvalReport& report);

/// One "cx cy cz l w h yaw score" line per detection.
void write_detections(const std::filesystem::path& path, const std::vector<head::Detection>& detections);
std::vector<head::Detection> read_detections(const std::filesystem::path& path);

}  // namespace assoc3d::eval
