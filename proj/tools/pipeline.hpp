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
#include <optional>
#include <string>
#include <vector>

#include "assoc3d/config.hpp"
#include "assoc3d/eval.hpp"
#include "assoc3d/trainer.hpp"

namespace assoc3d::pipeline {

namespace fs = std::filesystem;

/// Mini-grid run on the bundled synthetic generator with occlusion and
/// sparsity injected; the setting of the toy-scale experiments. Paths are
/// relative to the working directory under runs/.
RunConfig synthetic_run_config();

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

struct ConceptualBuild {
  std::vector<io::Scene> scenes;
  std::vector<conceptual::ConceptualMatch> matches;
  std::string report;
};

ConceptualBuild build_conceptual(const std::vector<io::Scene>& real, const conceptual::BankConfig& bank);
/// Scene directories plus report.txt.
void write_conceptual(const fs::path& out, const ConceptualBuild& build);

/// <stem>.ckpt and <stem>_loss.log.
void write_training(const fs::path& out, const std::string& stem, const train::TrainResult& result);

struct Evaluation {
  eval::EvalReport report;
  std::vector<std::vector<head::Detection>> detections;
};

Evaluation evaluate(const ad::ParameterSet& params, const std::vector<io::Scene>& dataset, const RunConfig& config);
/// report.json and detections/<scene id>.txt.
void write_evaluation(const fs::path& out, const std::vector<io::Scene>& dataset, const Evaluation& evaluation);

/// Binary PPM of the BEV range: points grey, ground truth green, detections
/// red; for PFE parameters the reweighting map is blended in as a heat layer.
std::string render_bev(const io::Scene& scene, const RunConfig& config, const ad::ParameterSet* params,
                       double pixels_per_metre = 8.0);

}  // namespace assoc3d::pipeline
