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

#include "pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "assoc3d/adaptation.hpp"
#include "assoc3d/checkpoint.hpp"
#include "assoc3d/detector.hpp"
#include "assoc3d/geometry.hpp"
#include "assoc3d/network.hpp"

namespace assoc3d::pipeline {

RunConfig synthetic_run_config() {
  RunConfig c = default_config();
  const auto grid = voxel::GridConfig::mini();
  c.detector.network = net::NetworkConfig::for_grid(grid);
  c.synthetic.grid = grid;
  c.synthetic.scenes = 10;
  c.synthetic.seed = 11;
  c.synthetic.sparsity_probability = 0.5;
  c.synthetic.occlusion_probability = 0.5;
  c.eval.iou_threshold = 0.5;
  c.paths.real = "runs/real";
  c.paths.conceptual = "runs/conceptual";
  c.paths.cfg_checkpoint = "runs/cfg/cfg.ckpt";
  c.paths.pfe_checkpoint = "runs/pfe/pfe.ckpt";

  for (train::TrainConfig* t : {&c.cfg_train, &c.pfe_train}) {
    t->batch_size = 2;
    t->max_rotation = 0.39269908169872414;  // pi / 8
  }
  c.cfg_train.epochs = 150;
  c.cfg_train.sigma = 0.0;
  c.pfe_train.epochs = 150;
  c.pfe_train.sigma = 0.5;
  c.pfe_train.pfe_init = train::PfeInit::kSeed;
  c.apply_seed(1);
  c.validate();
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ConceptualBuild build_conceptual(const std::vector<io::Scene>& real, const conceptual::BankConfig& bank_config) {
  const auto bank = conceptual::build_instance_bank(real, bank_config);
  ConceptualBuild out;
  for (std::size_t s = 0; s < real.size(); ++s) {
    io::Scene scene = real[s];
    scene.points = conceptual::compose_conceptual_scene(real[s], s, bank, &out.matches);
    io::count_points(scene.objects, scene.points);
    out.scenes.push_back(std::move(scene));
  }
  out.report = conceptual::format_report(bank, out.matches);
  return out;
}

void write_conceptual(const fs::path& out, const ConceptualBuild& build) {
  io::write_native_dataset(out, build.scenes);
  write_text(out / "report.txt", build.report);
}

void write_training(const fs::path& out, const std::string& stem, const train::TrainResult& result) {
  fs::create_directories(out);
  ad::save_checkpoint(out / (stem + ".ckpt"), result.params);
  write_text(out / (stem + "_loss.log"), train::format_log(result.log));
}

Evaluation evaluate(const ad::ParameterSet& params, const std::vector<io::Scene>& dataset, const RunConfig& config) {
  Evaluation e;
  e.report = eval::evaluate(params, dataset, config.detector, config.eval, &e.detections);
  return e;
}

void write_evaluation(const fs::path& out, const std::vector<io::Scene>& dataset, const Evaluation& evaluation) {
  write_text(out / "report.json", eval::report_json(evaluation.report));
  fs::create_directories(out / "detections");
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    eval::write_detections(out / "detections" / (dataset[s].id + ".txt"), evaluation.detections[s]);
  }
}

namespace {

struct Canvas {
  std::size_t width, height;
  std::vector<std::array<unsigned char, 3>> pixels;
  double x_min, y_max, ppm;

  Canvas(std::size_t w, std::size_t h, double x0, double y1, double scale)
      : width(w), height(h), pixels(w * h, {0, 0, 0}), x_min(x0), y_max(y1), ppm(scale) {}

  bool to_pixel(double x, double y, long& col, long& row) const {
    col = static_cast<long>(std::floor((x - x_min) * ppm));
    row = static_cast<long>(std::floor((y_max - y) * ppm));
    return col >= 0 && row >= 0 && col < static_cast<long>(width) && row < static_cast<long>(height);
  }

  void set(long col, long row, std::array<unsigned char, 3> rgb) {
    if (col < 0 || row < 0 || col >= static_cast<long>(width) || row >= static_cast<long>(height)) return;
    pixels[static_cast<std::size_t>(row) * width + static_cast<std::size_t>(col)] = rgb;
  }

  void line(const Vec2& a, const Vec2& b, std::array<unsigned char, 3> rgb) {
    const double len = std::hypot(b.x - a.x, b.y - a.y) * ppm;
    const int steps = std::max(1, static_cast<int>(std::ceil(len * 2)));
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      long c, r;
      to_pixel(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), c, r);
      set(c, r, rgb);
    }
  }

  void box(const Box3D& b, std::array<unsigned char, 3> rgb) {
    const auto corners = geom::box_corners_bev(b);
    for (std::size_t i = 0; i < corners.size(); ++i) line(corners[i], corners[(i + 1) % corners.size()], rgb);
  }

  std::string ppm_bytes() const {
    std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    for (const auto& p : pixels) out.append(reinterpret_cast<const char*>(p.data()), 3);
    return out;
  }
};

}  // namespace

std::string render_bev(const io::Scene& scene, const RunConfig& config, const ad::ParameterSet* params,
                       double pixels_per_metre) {
  const auto& net_cfg = config.detector.network;
  const auto& g = net_cfg.grid;
  const double span_x = g.range_max[0] - g.range_min[0], span_y = g.range_max[1] - g.range_min[1];
  Canvas canvas(static_cast<std::size_t>(std::ceil(span_x * pixels_per_metre)),
                static_cast<std::size_t>(std::ceil(span_y * pixels_per_metre)), g.range_min[0], g.range_max[1],
                pixels_per_metre);

  if (params && branch_of(*params) == net::Branch::kPfe) {
    ad::Tape tape;
    const auto out = net::pfe_forward(tape, scene.points, net::bind(tape, *params, false), net_cfg);
    const auto fg = adapt::foreground_mask(active_boxes(scene, g), scene.points, g, net_cfg.downsample());
    const auto r = adapt::reweighting_map(adapt::offset_length_map(out.offsets.value()), fg);
    const std::size_t h = r.dim(0), w = r.dim(1);
    const double cell_x = g.voxel_size[0] * static_cast<double>(net_cfg.downsample());
    const double cell_y = g.voxel_size[1] * static_cast<double>(net_cfg.downsample());
    for (std::size_t row = 0; row < canvas.height; ++row) {
      for (std::size_t col = 0; col < canvas.width; ++col) {
        const double x = g.range_min[0] + (static_cast<double>(col) + 0.5) / pixels_per_metre;
        const double y = g.range_max[1] - (static_cast<double>(row) + 0.5) / pixels_per_metre;
        const auto fx = static_cast<std::size_t>(std::floor((x - g.range_min[0]) / cell_x));
        const auto fy = static_cast<std::size_t>(std::floor((y - g.range_min[1]) / cell_y));
        if (fx >= w || fy >= h) continue;
        const double v = r[fy * w + fx];
        if (v > 0.0) canvas.pixels[row * canvas.width + col] = {static_cast<unsigned char>(60 + 140 * v),
                                                                static_cast<unsigned char>(40 * v), 0};
      }
    }
  }

  for (const auto& p : scene.points) {
    long c, r;
    if (canvas.to_pixel(p.x, p.y, c, r)) canvas.set(c, r, {170, 170, 170});
  }
  for (const auto& b : active_boxes(scene, g)) canvas.box(b, {0, 220, 0});
  if (params) {
    for (const auto& d : detect(*params, scene.points, config.detector, branch_of(*params))) {
      canvas.box(d.box, {255, 40, 40});
    }
  }
  return canvas.ppm_bytes();
}

}  // namespace assoc3d::pipeline
