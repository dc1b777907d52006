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

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "assoc3d/geometry.hpp"
#include "assoc3d/kitti_io.hpp"
#include "assoc3d/types.hpp"

namespace assoc3d::conceptual {

/// (scene index in the dataset, object index in that scene)
struct InstanceKey {
  std::size_t scene = 0;
  std::size_t object = 0;
  auto operator<=>(const InstanceKey&) const = default;
};

struct Instance {
  InstanceKey key;
  Box3D box;           // source box in its scene
  PointCloud points;   // centred, unrotated box frame
  int bin = 0;
};

struct BankConfig {
  int groups = 24;          // M
  double top_percent = 20;  // K
  std::size_t min_points = 8;
  geom::ClosestPointMode distance = geom::ClosestPointMode::kDirected;
};

struct InstanceBank {
  BankConfig config;
  std::vector<Instance> instances;
  /// Instances per yaw bin (all of them), indices into `instances`.
  std::vector<std::vector<std::size_t>> bins;
  /// Candidate conceptual models per bin, densest first.
  std::vector<std::vector<std::size_t>> candidates;

  std::size_t candidate_count() const;
};

/// floor((yaw + pi) / (2 pi / M)) after wrapping yaw into [-pi, pi).
int yaw_bin(double yaw, int groups);

/// Number of instances a bin of `bin_size` keeps before the point floor.
std::size_t top_k_count(std::size_t bin_size, double top_percent);

/// Throws std::invalid_argument for bad M/K or a dataset without objects.
InstanceBank build_instance_bank(const std::vector<io::Scene>& dataset, const BankConfig& config);

struct MatchTarget {
  Box3D box;
  PointCloud points;  // scene frame
  std::optional<InstanceKey> key;
};

struct ConceptualMatch {
  Box3D target;
  std::size_t candidate = 0;  // index into bank.instances
  InstanceKey candidate_key;
  int bin = 0;                // bin actually searched
  double distance = 0.0;
  bool self = false;
  Box3D candidate_box;
  PointCloud candidate_points;  // canonical frame
  PointCloud target_points;     // kept for self-matches
};

/// Searches the target's yaw bin (or the nearest non-empty bin) for the
/// candidate with the smallest directed average closest-point distance from
/// the target points to the candidate posed at the target box. A target with
/// no points takes the densest candidate.
ConceptualMatch match_candidate(const MatchTarget& target, const InstanceBank& bank);

/// Candidate points scaled to the target size and placed at its pose. A
/// self-match returns the target's own points.
PointCloud refine_and_place(const ConceptualMatch& match);

/// Background points (outside every object box, original order) followed by
/// the placed model of each non-ignored object in annotation order.
PointCloud compose_conceptual_scene(const io::Scene& scene, std::size_t scene_index, const InstanceBank& bank,
                                    std::vector<ConceptualMatch>* matches = nullptr);

/// Plain-text report: per-bin instance/candidate counts and a histogram of
/// match distances.
std::string format_report(const InstanceBank& bank, const std::vector<ConceptualMatch>& matches);

}  // namespace assoc3d::conceptual
