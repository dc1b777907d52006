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

#include <cstdint>
#include <string>
#include <vector>

#include "assoc3d/conceptual_scene.hpp"
#include "assoc3d/kitti_io.hpp"

namespace assoc3d::suites {

struct SuiteResult {
  bool pass = false;
  std::string detail;
};

struct OpCheck {
  std::string op;
  double max_relative_error = 0.0;
  std::size_t elements = 0;
};

inline constexpr double kGradTolerance = 1e-5;

/// Central-difference check of every differentiable op the network uses.
std::vector<OpCheck> gradient_checks(std::uint64_t seed);

SuiteResult sparse_conv_oracle(std::uint64_t seed, std::size_t cases = 200);
SuiteResult gradient_suite(std::uint64_t seed);
SuiteResult box_codec_roundtrip(std::uint64_t seed, std::size_t pairs = 10000);
SuiteResult association_anchors(std::uint64_t seed);
/// Matcher against brute force, background purity and self-match distance on
/// `dataset` with the given bank settings.
SuiteResult conceptual_builder(const std::vector<io::Scene>& dataset, const conceptual::BankConfig& bank);
SuiteResult rotated_iou(std::uint64_t seed, std::size_t pairs = 1000, std::size_t samples = 1000000);

}  // namespace assoc3d::suites
