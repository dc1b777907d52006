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

#include "assoc3d/conceptual_scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "assoc3d/geometry.hpp"

namespace assoc3d::conceptual {

std::size_t InstanceBank::candidate_count() const {
  std::size_t n = 0;
  for (const auto& c : candidates) n += c.size();
  return n;
}

int yaw_bin(double yaw, int groups) {
  if (groups < 1) throw std::invalid_argument("group count must be >= 1");
  const double width = 2.0 * std::numbers::pi / groups;
  const int bin = static_cast<int>(std::floor((normalize_angle(yaw) + std::numbers::pi) / width));
  return std::clamp(bin, 0, groups - 1);
}

std::size_t top_k_count(std::size_t bin_size, double top_percent) {
  if (bin_size == 0) return 0;
  const double raw = top_percent * static_cast<double>(bin_size) / 100.0;
  const auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(n, 1, bin_size);
}

InstanceBank build_instance_bank(const std::vector<io::Scene>& dataset, const BankConfig& config) {
  if (config.groups < 1) throw std::invalid_argument("M (yaw groups) must be >= 1");
  if (!(config.top_percent > 0.0 && config.top_percent <= 100.0)) {
    throw std::invalid_argument("K (top percent) must lie in (0, 100]");
  }
  InstanceBank bank;
  bank.config = config;
  bank.bins.resize(static_cast<std::size_t>(config.groups));
  bank.candidates.resize(static_cast<std::size_t>(config.groups));
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    const auto& scene = dataset[s];
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
      const auto& obj = scene.objects[o];
      if (obj.ignore) continue;
      Instance inst;
      inst.key = {s, o};
      inst.box = obj.box;
      inst.bin = yaw_bin(obj.box.yaw, config.groups);
      for (std::size_t i : geom::points_in_box(scene.points, obj.box)) {
        inst.points.push_back(geom::to_box_frame(scene.points[i], obj.box));
      }
      bank.bins[static_cast<std::size_t>(inst.bin)].push_back(bank.instances.size());
      bank.instances.push_back(std::move(inst));
    }
  }
  if (bank.instances.empty()) throw std::invalid_argument("dataset has no labelled objects");

  // Instances are appended in (scene, object) order, so a stable sort on the
  // point count breaks ties by scene id and then instance index.
  for (std::size_t b = 0; b < bank.bins.size(); ++b) {
    std::vector<std::size_t> order = bank.bins[b];
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return bank.instances[x].points.size() > bank.instances[y].points.size();
    });
    order.resize(top_k_count(order.size(), config.top_percent));
    for (std::size_t idx : order) {
      if (bank.instances[idx].points.size() >= config.min_points) bank.candidates[b].push_back(idx);
    }
  }
  return bank;
}

namespace {

int search_bin(int bin, const InstanceBank& bank) {
  const int m = static_cast<int>(bank.candidates.size());
  if (!bank.candidates[static_cast<std::size_t>(bin)].empty()) return bin;
  for (int r = 1; r <= m / 2; ++r) {
    const int lo = ((bin - r) % m + m) % m;
    const int hi = (bin + r) % m;
    const bool lo_ok = !bank.candidates[static_cast<std::size_t>(lo)].empty();
    const bool hi_ok = !bank.candidates[static_cast<std::size_t>(hi)].empty();
    if (lo_ok && hi_ok) return std::min(lo, hi);
    if (lo_ok) return lo;
    if (hi_ok) return hi;
  }
  throw std::invalid_argument("instance bank has no candidate conceptual models");
}

ConceptualMatch make_match(const MatchTarget& target, const InstanceBank& bank, std::size_t idx, int bin,
                           double distance) {
  const Instance& c = bank.instances[idx];
  ConceptualMatch m;
  m.target = target.box;
  m.candidate = idx;
  m.candidate_key = c.key;
  m.bin = bin;
  m.distance = distance;
  m.self = target.key && *target.key == c.key;
  m.candidate_box = c.box;
  m.candidate_points = c.points;
  if (m.self) m.target_points = target.points;
  return m;
}

}  // namespace

ConceptualMatch match_candidate(const MatchTarget& target, const InstanceBank& bank) {
  const int bin = search_bin(yaw_bin(target.box.yaw, bank.config.groups), bank);
  const auto& cands = bank.candidates[static_cast<std::size_t>(bin)];
  if (target.key) {
    for (std::size_t idx : cands) {
      if (bank.instances[idx].key == *target.key) return make_match(target, bank, idx, bin, 0.0);
    }
  }
  if (target.points.empty()) return make_match(target, bank, cands.front(), bin, 0.0);

  const Pose pose = geom::box_pose(target.box);
  std::size_t best = cands.front();
  double best_d = 0.0;
  bool first = true;
  for (std::size_t idx : cands) {
    const PointCloud posed = geom::transform_points(bank.instances[idx].points, pose);
    const double d = geom::avg_closest_point_distance(target.points, posed, bank.config.distance);
    if (first || d < best_d) {
      best = idx;
      best_d = d;
      first = false;
    }
  }
  return make_match(target, bank, best, bin, best_d);
}

PointCloud refine_and_place(const ConceptualMatch& match) {
  if (match.self) return match.target_points;
  const Box3D& t = match.target;
  const Box3D& c = match.candidate_box;
  if (!(c.l > 0.0 && c.w > 0.0 && c.h > 0.0)) throw std::invalid_argument("candidate box has a zero dimension");
  const double sx = t.l / c.l;
  const double sy = t.w / c.w;
  const double sz = t.h / c.h;
  PointCloud scaled;
  scaled.reserve(match.candidate_points.size());
  for (const Point& p : match.candidate_points) {
    scaled.push_back({std::clamp(p.x * sx, -t.l / 2, t.l / 2), std::clamp(p.y * sy, -t.w / 2, t.w / 2),
                      std::clamp(p.z * sz, -t.h / 2, t.h / 2), p.intensity});
  }
  return geom::transform_points(scaled, geom::box_pose(t));
}

PointCloud compose_conceptual_scene(const io::Scene& scene, std::size_t scene_index, const InstanceBank& bank,
                                    std::vector<ConceptualMatch>* matches) {
  std::vector<std::size_t> active;
  for (std::size_t o = 0; o < scene.objects.size(); ++o) {
    if (!scene.objects[o].ignore) active.push_back(o);
  }
  PointCloud out;
  out.reserve(scene.points.size());
  for (const Point& p : scene.points) {
    bool inside = false;
    for (std::size_t o : active) {
      if (geom::point_in_box(p, scene.objects[o].box)) {
        inside = true;
        break;
      }
    }
    if (!inside) out.push_back(p);
  }
  for (std::size_t o : active) {
    MatchTarget target;
    target.box = scene.objects[o].box;
    target.key = InstanceKey{scene_index, o};
    for (std::size_t i : geom::points_in_box(scene.points, target.box)) target.points.push_back(scene.points[i]);
    ConceptualMatch m = match_candidate(target, bank);
    const PointCloud placed = refine_and_place(m);
    out.insert(out.end(), placed.begin(), placed.end());
    if (matches) matches->push_back(std::move(m));
  }
  return out;
}

std::string format_report(const InstanceBank& bank, const std::vector<ConceptualMatch>& matches) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "groups %d top_percent %.17g min_points %zu\n", bank.config.groups,
                bank.config.top_percent, bank.config.min_points);
  out += line;
  std::snprintf(line, sizeof(line), "instances %zu candidates %zu\n", bank.instances.size(), bank.candidate_count());
  out += line;
  for (std::size_t b = 0; b < bank.bins.size(); ++b) {
    std::snprintf(line, sizeof(line), "bin %zu instances %zu candidates %zu\n", b, bank.bins[b].size(),
                  bank.candidates[b].size());
    out += line;
  }
  const double edges[] = {0.0, 0.05, 0.1, 0.2, 0.5, 1.0};
  constexpr std::size_t kBuckets = std::size(edges);
  std::size_t counts[kBuckets] = {};
  std::size_t self = 0;
  for (const auto& m : matches) {
    self += m.self ? 1 : 0;
    std::size_t k = 0;
    while (k + 1 < kBuckets && m.distance >= edges[k + 1]) ++k;
    ++counts[k];
  }
  std::snprintf(line, sizeof(line), "matches %zu self %zu\n", matches.size(), self);
  out += line;
  for (std::size_t k = 0; k < kBuckets; ++k) {
    if (k + 1 < kBuckets) {
      std::snprintf(line, sizeof(line), "distance [%g, %g) %zu\n", edges[k], edges[k + 1], counts[k]);
    } else {
      std::snprintf(line, sizeof(line), "distance [%g, inf) %zu\n", edges[k], counts[k]);
    }
    out += line;
  }
  return out;
}

}  // namespace assoc3d::conceptual
