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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "assoc3d/adaptation.hpp"
#include "assoc3d/checkpoint.hpp"
#include "assoc3d/detector.hpp"
#include "assoc3d/kitti_io.hpp"

namespace assoc3d::train {

using ad::ParameterSet;
using ad::Tensor;

enum class PfeInit {
  kSeed,  // fresh draw from the run seed
  kCfg,   // copy every shared layer from the frozen CFG
};

struct TrainConfig {
  std::size_t batch_size = 6;
  std::size_t epochs = 80;
  double base_lr = 0.001;
  double sigma = 0.5;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Global gradient-norm ceiling; 0 disables clipping.
  double clip_norm = 10.0;
  bool augment = true;
  double max_rotation = 0.78539816339744831;  // pi / 4
  double min_scale = 0.95;
  double max_scale = 1.05;
  bool flip = true;
  adapt::PixelCount pixel_count = adapt::PixelCount::kForeground;
  PfeInit pfe_init = PfeInit::kSeed;
  /// Write a checkpoint every N epochs into checkpoint_dir; 0 disables.
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

/// base * 0.5 * (1 + cos(pi * step / total_steps))
double cosine_lr(std::size_t step, std::size_t total_steps, double base);

class Adam {
 public:
  Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParameterSet& params, const std::map<std::string, Tensor>& grads, double lr);
  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

/// Rescales grads in place when their global L2 norm exceeds max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm);

struct ScenePair {
  io::Scene real;
  io::Scene conceptual;
};

struct AugmentDraw {
  double rotation = 0.0;
  double scale = 1.0;
  bool flip = false;  // mirror y
};

AugmentDraw draw_augmentation(std::uint64_t seed, const TrainConfig& config);
/// Mirror (y -> -y), rotate about z, then scale; boxes follow their points.
io::Scene apply_augmentation(const io::Scene& scene, const AugmentDraw& draw);
ScenePair augment_pair(const ScenePair& pair, std::uint64_t seed, const TrainConfig& config);

struct EpochLog {
  std::size_t epoch = 0;
  double bbox = 0.0;
  double cls = 0.0;
  double assoc = 0.0;
  double total = 0.0;
};

/// One line per epoch: "epoch L_bbox L_class L_associate total".
std::string format_log(const std::vector<EpochLog>& log);

struct TrainResult {
  ParameterSet params;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

TrainResult train_cfg(const std::vector<io::Scene>& conceptual, const DetectorConfig& detector,
                      const TrainConfig& config, const EpochCallback& on_epoch = {});

TrainResult train_associate(const std::vector<ScenePair>& pairs, const ParameterSet& cfg_params,
                            const DetectorConfig& detector, const TrainConfig& config,
                            const EpochCallback& on_epoch = {});

/// Pairs real and conceptual scenes by id. Throws when the annotation lists
/// differ.
std::vector<ScenePair> pair_datasets(const std::vector<io::Scene>& real, const std::vector<io::Scene>& conceptual);

}  // namespace assoc3d::train
