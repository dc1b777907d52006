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
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "assoc3d/tensor.hpp"
#include "assoc3d/types.hpp"

namespace testutil {

inline assoc3d::ad::Tensor random_tensor(assoc3d::ad::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  assoc3d::ad::Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline assoc3d::Box3D random_box(std::mt19937_64& rng, double spread = 10.0) {
  std::uniform_real_distribution<double> pos(-spread, spread), dim(0.5, 5.0), yaw(-3.14159, 3.14159);
  return {pos(rng), pos(rng), pos(rng) * 0.1, dim(rng), dim(rng), dim(rng), yaw(rng)};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("assoc3d_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<double> to_vector(const assoc3d::ad::Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace testutil
