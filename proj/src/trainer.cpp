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

#include "assoc3d/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

#include "assoc3d/geometry.hpp"
#include "assoc3d/seeding.hpp"

namespace assoc3d::train {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(base_lr >= 0.0)) throw std::invalid_argument("base_lr must be >= 0");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  if (!(min_scale > 0.0 && max_scale >= min_scale)) throw std::invalid_argument("invalid scale range");
  if (!(clip_norm >= 0.0)) throw std::invalid_argument("clip_norm must be >= 0");
}

double cosine_lr(std::size_t step, std::size_t total_steps, double base) {
  if (total_steps == 0) return base;
  if (step > total_steps) throw std::invalid_argument("cosine_lr: step beyond the schedule");
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void Adam::step(ParameterSet& params, const std::map<std::string, Tensor>& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto [mit, m_new] = m_.try_emplace(name, g.shape(), 0.0);
    auto [vit, v_new] = v_.try_emplace(name, g.shape(), 0.0);
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    for (std::size_t i = 0; i < p.numel(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

double clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    for (double v : g.values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads) {
      for (double& v : g.values()) v *= s;
    }
  }
  return norm;
}

AugmentDraw draw_augmentation(std::uint64_t seed, const TrainConfig& config) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AugmentDraw d;
  const double r = unit(rng);
  const double s = unit(rng);
  const double f = unit(rng);
  if (!config.augment) return d;
  d.rotation = (2.0 * r - 1.0) * config.max_rotation;
  d.scale = config.min_scale + (config.max_scale - config.min_scale) * s;
  d.flip = config.flip && f < 0.5;
  return d;
}

io::Scene apply_augmentation(const io::Scene& scene, const AugmentDraw& draw) {
  io::Scene out = scene;
  const double c = std::cos(draw.rotation);
  const double s = std::sin(draw.rotation);
  auto move = [&](double& x, double& y, double& z) {
    if (draw.flip) y = -y;
    const double rx = c * x - s * y;
    const double ry = s * x + c * y;
    x = rx * draw.scale;
    y = ry * draw.scale;
    z *= draw.scale;
  };
  for (Point& p : out.points) move(p.x, p.y, p.z);
  for (auto& obj : out.objects) {
    Box3D& b = obj.box;
    move(b.cx, b.cy, b.cz);
    b.l *= draw.scale;
    b.w *= draw.scale;
    b.h *= draw.scale;
    const double yaw = draw.flip ? -b.yaw : b.yaw;
    b.yaw = normalize_angle(yaw + draw.rotation);
  }
  return out;
}

ScenePair augment_pair(const ScenePair& pair, std::uint64_t seed, const TrainConfig& config) {
  const AugmentDraw d = draw_augmentation(seed, config);
  return {apply_augmentation(pair.real, d), apply_augmentation(pair.conceptual, d)};
}

std::string format_log(const std::vector<EpochLog>& log) {
  std::string out;
  char line[160];
  for (const auto& e : log) {
    std::snprintf(line, sizeof(line), "%zu %.17g %.17g %.17g %.17g\n", e.epoch, e.bbox, e.cls, e.assoc, e.total);
    out += line;
  }
  return out;
}

std::vector<ScenePair> pair_datasets(const std::vector<io::Scene>& real, const std::vector<io::Scene>& conceptual) {
  std::map<std::string, const io::Scene*> by_id;
  for (const auto& s : conceptual) by_id[s.id] = &s;
  std::vector<ScenePair> pairs;
  for (const auto& r : real) {
    const auto it = by_id.find(r.id);
    if (it == by_id.end()) throw std::invalid_argument("no conceptual scene for '" + r.id + "'");
    const auto& c = *it->second;
    if (c.objects.size() != r.objects.size()) {
      throw std::invalid_argument("annotation lists differ for scene '" + r.id + "'");
    }
    for (std::size_t i = 0; i < c.objects.size(); ++i) {
      if (!(c.objects[i].box == r.objects[i].box) || c.objects[i].ignore != r.objects[i].ignore) {
        throw std::invalid_argument("annotation lists differ for scene '" + r.id + "'");
      }
    }
    pairs.push_back({r, c});
  }
  return pairs;
}

namespace {

struct SampleLoss {
  ad::Var bbox;
  ad::Var cls;
  std::optional<ad::Var> assoc;
  ad::Var total;
};

using SampleFn = std::function<SampleLoss(ad::Tape&, const std::map<std::string, ad::Var>&, std::size_t index,
                                          std::uint64_t sample_seed)>;

bool finite(double v) { return std::isfinite(v); }

TrainResult run_loop(ParameterSet params, std::size_t samples, const TrainConfig& config, const SampleFn& fn,
                     const std::function<std::string(std::size_t)>& sample_name, const EpochCallback& on_epoch) {
  config.validate();
  if (samples == 0) throw std::invalid_argument("training dataset is empty");
  const std::size_t batches = (samples + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = config.epochs * batches;
  Adam adam(config.beta1, config.beta2, config.adam_eps);
  std::size_t step = 0;
  TrainResult result;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(samples);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(config.seed, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochLog log;
    log.epoch = epoch;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(samples, begin + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - begin);
      std::map<std::string, Tensor> grads;
      for (const auto& [name, t] : params) grads.emplace(name, Tensor(t.shape(), 0.0));

      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t idx = order[k];
        ad::Tape tape;
        const auto vars = net::bind(tape, params, true);
        const SampleLoss loss = fn(tape, vars, idx, mix_seed(mix_seed(config.seed, epoch), idx));
        const double total = loss.total.value().item();
        if (!finite(total)) {
          throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + " on sample '" +
                                   sample_name(idx) + "'");
        }
        log.bbox += loss.bbox.value().item();
        log.cls += loss.cls.value().item();
        log.assoc += loss.assoc ? loss.assoc->value().item() : 0.0;
        log.total += total;
        tape.backward(loss.total);
        for (auto& [name, g] : grads) {
          const Tensor d = tape.grad(vars.at(name));
          for (std::size_t i = 0; i < g.numel(); ++i) g[i] += d[i] * inv;
        }
      }
      clip_global_norm(grads, config.clip_norm);
      adam.step(params, grads, cosine_lr(step, total_steps, config.base_lr));
      ++step;
    }
    const double n = static_cast<double>(samples);
    log.bbox /= n;
    log.cls /= n;
    log.assoc /= n;
    log.total /= n;
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (config.checkpoint_every > 0 && !config.checkpoint_dir.empty() && epoch % config.checkpoint_every == 0) {
      std::filesystem::create_directories(config.checkpoint_dir);
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03zu.ckpt", epoch);
      ad::save_checkpoint(config.checkpoint_dir / name, params);
    }
  }
  result.params = std::move(params);
  return result;
}

}  // namespace

TrainResult train_cfg(const std::vector<io::Scene>& conceptual, const DetectorConfig& detector,
                      const TrainConfig& config, const EpochCallback& on_epoch) {
  const auto anchors = detector.make_anchors();
  ParameterSet init = net::init_parameters(detector.network, net::Branch::kCfg, config.seed);
  auto fn = [&](ad::Tape& tape, const std::map<std::string, ad::Var>& vars, std::size_t idx, std::uint64_t seed) {
    io::Scene scene = conceptual[idx];
    // Salted so the CFG phase draws independently of the associate phase.
    if (config.augment) scene = apply_augmentation(scene, draw_augmentation(mix_seed(seed, 0xCF6), config));
    const auto targets = head::assign_targets(anchors, active_boxes(scene, detector.network.grid), detector.anchors);
    const auto out = net::cfg_forward(tape, scene.points, vars, detector.network);
    SampleLoss loss;
    loss.cls = head::focal_loss(out.cls_map, targets.labels, detector.focal);
    loss.bbox = head::regression_loss(out.reg_map, targets);
    loss.total = head::cfg_total_loss(loss.bbox, loss.cls);
    return loss;
  };
  return run_loop(std::move(init), conceptual.size(), config, fn,
                  [&](std::size_t i) { return conceptual[i].id; }, on_epoch);
}

TrainResult train_associate(const std::vector<ScenePair>& pairs, const ParameterSet& cfg_params,
                            const DetectorConfig& detector, const TrainConfig& config, const EpochCallback& on_epoch) {
  const auto anchors = detector.make_anchors();
  const std::size_t ds = detector.network.downsample();
  ParameterSet init = net::init_parameters(detector.network, net::Branch::kPfe, mix_seed(config.seed, 0xA55));
  if (config.pfe_init == PfeInit::kCfg) {
    for (const auto& [name, t] : cfg_params) {
      const auto it = init.find(name);
      if (it == init.end() || it->second.shape() != t.shape()) {
        throw std::invalid_argument("CFG parameter '" + name + "' does not fit the PFE layout");
      }
      it->second = t;
    }
  }
  // Without augmentation the conceptual features never change, so the frozen
  // branch runs once per pair.
  std::vector<std::optional<Tensor>> cached(pairs.size());
  auto conceptual_feature = [&](const io::Scene& scene) {
    ad::Tape tape;
    const auto vars = net::bind(tape, cfg_params, false);
    return net::cfg_forward(tape, scene.points, vars, detector.network).adapt_feature.value();
  };

  auto fn = [&](ad::Tape& tape, const std::map<std::string, ad::Var>& vars, std::size_t idx, std::uint64_t seed) {
    const ScenePair pair = config.augment ? augment_pair(pairs[idx], seed, config) : pairs[idx];
    Tensor fc;
    if (config.augment) {
      fc = conceptual_feature(pair.conceptual);
    } else {
      if (!cached[idx]) cached[idx] = conceptual_feature(pair.conceptual);
      fc = *cached[idx];
    }
    const auto boxes = active_boxes(pair.real, detector.network.grid);
    const auto targets = head::assign_targets(anchors, boxes, detector.anchors);
    const auto out = net::pfe_forward(tape, pair.real.points, vars, detector.network);
    if (out.adapt_feature.shape() != fc.shape()) {
      throw ad::ShapeError("paired features differ: " + ad::shape_string(out.adapt_feature.shape()) + " vs " +
                           ad::shape_string(fc.shape()));
    }
    const Tensor mask = adapt::foreground_mask(boxes, pair.conceptual.points, detector.network.grid, ds);
    const Tensor reweight = adapt::reweighting_map(adapt::offset_length_map(out.offsets.value()), mask);
    SampleLoss loss;
    loss.cls = head::focal_loss(out.cls_map, targets.labels, detector.focal);
    loss.bbox = head::regression_loss(out.reg_map, targets);
    loss.assoc = adapt::association_loss(out.adapt_feature, fc, reweight, mask, config.pixel_count);
    loss.total = head::associate_total_loss(loss.bbox, loss.cls, *loss.assoc, config.sigma);
    return loss;
  };
  return run_loop(std::move(init), pairs.size(), config, fn, [&](std::size_t i) { return pairs[i].real.id; },
                  on_epoch);
}

}  // namespace assoc3d::train
