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
#include <stdexcept>
#include <string>

#include "assoc3d/conceptual_scene.hpp"
#include "assoc3d/detector.hpp"
#include "assoc3d/eval.hpp"
#include "assoc3d/synthetic.hpp"
#include "assoc3d/trainer.hpp"

namespace assoc3d {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PathsConfig {
  std::filesystem::path real;           // native dataset of scanned scenes
  std::filesystem::path conceptual;     // composed scenes
  std::filesystem::path cfg_checkpoint;
  std::filesystem::path pfe_checkpoint;
};

struct RunConfig {
  PathsConfig paths;
  DetectorConfig detector;
  train::TrainConfig cfg_train;
  train::TrainConfig pfe_train;
  conceptual::BankConfig bank;
  eval::EvalConfig eval;
  synth::SyntheticConfig synthetic;
  std::uint64_t seed = 0;

  /// Copies `seed` into every seeded section.
  void apply_seed(std::uint64_t s);
  void validate() const;
};

/// Values from the method description, KITTI-scale grid.
RunConfig default_config();

std::string to_json(const RunConfig& config);
/// Keys absent from `text` keep their defaults; unknown keys are rejected.
/// Throws ConfigError.
RunConfig from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace assoc3d
