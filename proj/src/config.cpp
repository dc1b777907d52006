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

#include "assoc3d/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace assoc3d {

using json = nlohmann::ordered_json;

namespace {

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<voxel::CapPolicy> kCapPolicies[] = {{voxel::CapPolicy::kFirstArrived, "first_arrived"},
                                                       {voxel::CapPolicy::kRandom, "random"}};
constexpr EnumName<head::BoxCoding> kCodings[] = {{head::BoxCoding::kAnchorMinusGt, "anchor_minus_gt"},
                                                  {head::BoxCoding::kGtMinusAnchor, "gt_minus_anchor"}};
constexpr EnumName<adapt::PixelCount> kPixelCounts[] = {{adapt::PixelCount::kForeground, "foreground"},
                                                        {adapt::PixelCount::kReweightSupport, "reweight_support"}};
constexpr EnumName<train::PfeInit> kPfeInits[] = {{train::PfeInit::kSeed, "seed"}, {train::PfeInit::kCfg, "cfg"}};
constexpr EnumName<geom::ClosestPointMode> kDistances[] = {{geom::ClosestPointMode::kDirected, "directed"},
                                                           {geom::ClosestPointMode::kSymmetric, "symmetric"}};
constexpr EnumName<eval::IouMode> kIouModes[] = {{eval::IouMode::kBev, "bev"}, {eval::IouMode::k3d, "3d"}};

template <typename E, std::size_t N>
std::string enum_to(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  throw ConfigError("unnamed enum value");
}

template <typename E, std::size_t N>
E enum_from(const EnumName<E> (&table)[N], const json& j, const std::string& key) {
  const std::string s = j.get<std::string>();
  for (const auto& e : table) {
    if (s == e.name) return e.value;
  }
  throw ConfigError("invalid value '" + s + "' for " + key);
}

json grid_json(const voxel::GridConfig& g) {
  return {{"range_min", g.range_min},
          {"range_max", g.range_max},
          {"voxel_size", g.voxel_size},
          {"max_points_per_voxel", g.max_points_per_voxel},
          {"cap_policy", enum_to(kCapPolicies, g.cap_policy)},
          {"cap_seed", g.cap_seed}};
}

voxel::GridConfig grid_from(const json& j) {
  voxel::GridConfig g;
  g.range_min = j.at("range_min").get<std::array<double, 3>>();
  g.range_max = j.at("range_max").get<std::array<double, 3>>();
  g.voxel_size = j.at("voxel_size").get<std::array<double, 3>>();
  g.max_points_per_voxel = j.at("max_points_per_voxel").get<std::size_t>();
  g.cap_policy = enum_from(kCapPolicies, j.at("cap_policy"), "grid.cap_policy");
  g.cap_seed = j.at("cap_seed").get<std::uint64_t>();
  return g;
}

json stages_json(const std::vector<net::StageConfig>& stages) {
  json arr = json::array();
  for (const auto& s : stages) {
    arr.push_back({{"channels", s.channels},
                   {"kernel", s.down.size},
                   {"stride", s.down.stride},
                   {"padding", s.down.padding}});
  }
  return arr;
}

std::vector<net::StageConfig> stages_from(const json& arr) {
  std::vector<net::StageConfig> out;
  for (const auto& j : arr) {
    net::StageConfig s;
    s.channels = j.at("channels").get<std::size_t>();
    s.down.size = j.at("kernel").get<std::array<int, 3>>();
    s.down.stride = j.at("stride").get<std::array<int, 3>>();
    s.down.padding = j.at("padding").get<std::array<int, 3>>();
    s.down.mode = sparse::ConvMode::kStrided;
    out.push_back(s);
  }
  return out;
}

json train_json(const train::TrainConfig& t) {
  return {{"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"base_lr", t.base_lr},
          {"sigma", t.sigma},
          {"seed", t.seed},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"adam_eps", t.adam_eps},
          {"clip_norm", t.clip_norm},
          {"augment", t.augment},
          {"max_rotation", t.max_rotation},
          {"min_scale", t.min_scale},
          {"max_scale", t.max_scale},
          {"flip", t.flip},
          {"pixel_count", enum_to(kPixelCounts, t.pixel_count)},
          {"pfe_init", enum_to(kPfeInits, t.pfe_init)},
          {"checkpoint_every", t.checkpoint_every}};
}

train::TrainConfig train_from(const json& j, const std::string& key) {
  train::TrainConfig t;
  t.batch_size = j.at("batch_size").get<std::size_t>();
  t.epochs = j.at("epochs").get<std::size_t>();
  t.base_lr = j.at("base_lr").get<double>();
  t.sigma = j.at("sigma").get<double>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.beta1 = j.at("beta1").get<double>();
  t.beta2 = j.at("beta2").get<double>();
  t.adam_eps = j.at("adam_eps").get<double>();
  t.clip_norm = j.at("clip_norm").get<double>();
  t.augment = j.at("augment").get<bool>();
  t.max_rotation = j.at("max_rotation").get<double>();
  t.min_scale = j.at("min_scale").get<double>();
  t.max_scale = j.at("max_scale").get<double>();
  t.flip = j.at("flip").get<bool>();
  t.pixel_count = enum_from(kPixelCounts, j.at("pixel_count"), key + ".pixel_count");
  t.pfe_init = enum_from(kPfeInits, j.at("pfe_init"), key + ".pfe_init");
  t.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  return t;
}

json to_tree(const RunConfig& c) {
  const auto& d = c.detector;
  const auto& n = d.network;
  const auto& s = c.synthetic;
  json j;
  j["seed"] = c.seed;
  j["paths"] = {{"real", c.paths.real.string()},
                {"conceptual", c.paths.conceptual.string()},
                {"cfg_checkpoint", c.paths.cfg_checkpoint.string()},
                {"pfe_checkpoint", c.paths.pfe_checkpoint.string()}};
  j["grid"] = grid_json(n.grid);
  j["network"] = {{"point_feature_channels", n.point_feature_channels},
                  {"stages", stages_json(n.stages)},
                  {"deform_kernel", n.deform_kernel},
                  {"adapt_channels", n.adapt_channels},
                  {"head_channels", n.head_channels},
                  {"cls_prior", n.cls_prior}};
  j["anchors"] = {{"length", d.anchors.length},
                  {"width", d.anchors.width},
                  {"height", d.anchors.height},
                  {"z_center", d.anchors.z_center},
                  {"yaws", d.anchors.yaws},
                  {"positive_iou", d.anchors.positive_iou},
                  {"negative_iou", d.anchors.negative_iou},
                  {"coding", enum_to(kCodings, d.anchors.coding)}};
  j["loss"] = {{"focal_alpha", d.focal.alpha}, {"focal_gamma", d.focal.gamma}};
  j["decode"] = {{"score_threshold", d.decode.score_threshold},
                 {"nms_iou", d.decode.nms_iou},
                 {"max_candidates", d.decode.max_candidates}};
  j["cfg_train"] = train_json(c.cfg_train);
  j["pfe_train"] = train_json(c.pfe_train);
  j["conceptual"] = {{"groups", c.bank.groups},
                     {"top_percent", c.bank.top_percent},
                     {"min_points", c.bank.min_points},
                     {"distance", enum_to(kDistances, c.bank.distance)}};
  j["eval"] = {{"iou_threshold", c.eval.iou_threshold},
               {"interpolation_points", c.eval.interpolation_points},
               {"metric", enum_to(kIouModes, c.eval.mode)},
               {"distance_buckets", c.eval.distance_buckets}};
  j["synthetic"] = {{"scenes", s.scenes},
                    {"seed", s.seed},
                    {"grid", grid_json(s.grid)},
                    {"min_cars", s.min_cars},
                    {"max_cars", s.max_cars},
                    {"ground_z", s.ground_z},
                    {"density", s.density},
                    {"reference_range", s.reference_range},
                    {"ground_points", s.ground_points},
                    {"shadowing", s.shadowing},
                    {"sparsity_probability", s.sparsity_probability},
                    {"occlusion_probability", s.occlusion_probability}};
  return j;
}

void reject_unknown(const json& given, const json& known, const std::string& prefix) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!known.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    if (it->is_object() && known.at(it.key()).is_object()) reject_unknown(*it, known.at(it.key()), key);
  }
}

RunConfig from_tree(const json& j, bool derive_stages) {
  RunConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& p = j.at("paths");
  c.paths.real = p.at("real").get<std::string>();
  c.paths.conceptual = p.at("conceptual").get<std::string>();
  c.paths.cfg_checkpoint = p.at("cfg_checkpoint").get<std::string>();
  c.paths.pfe_checkpoint = p.at("pfe_checkpoint").get<std::string>();

  auto& d = c.detector;
  const auto grid = grid_from(j.at("grid"));
  const auto& nj = j.at("network");
  d.network = net::NetworkConfig::for_grid(grid);
  if (!derive_stages) d.network.stages = stages_from(nj.at("stages"));
  d.network.point_feature_channels = nj.at("point_feature_channels").get<std::size_t>();
  d.network.deform_kernel = nj.at("deform_kernel").get<std::size_t>();
  d.network.adapt_channels = nj.at("adapt_channels").get<std::size_t>();
  d.network.head_channels = nj.at("head_channels").get<std::size_t>();
  d.network.cls_prior = nj.at("cls_prior").get<double>();

  const auto& a = j.at("anchors");
  d.anchors.length = a.at("length").get<double>();
  d.anchors.width = a.at("width").get<double>();
  d.anchors.height = a.at("height").get<double>();
  d.anchors.z_center = a.at("z_center").get<double>();
  d.anchors.yaws = a.at("yaws").get<std::vector<double>>();
  d.anchors.positive_iou = a.at("positive_iou").get<double>();
  d.anchors.negative_iou = a.at("negative_iou").get<double>();
  d.anchors.coding = enum_from(kCodings, a.at("coding"), "anchors.coding");
  d.network.anchors_per_location = d.anchors.yaws.size();

  d.focal.alpha = j.at("loss").at("focal_alpha").get<double>();
  d.focal.gamma = j.at("loss").at("focal_gamma").get<double>();
  const auto& dec = j.at("decode");
  d.decode.score_threshold = dec.at("score_threshold").get<double>();
  d.decode.nms_iou = dec.at("nms_iou").get<double>();
  d.decode.max_candidates = dec.at("max_candidates").get<std::size_t>();

  c.cfg_train = train_from(j.at("cfg_train"), "cfg_train");
  c.pfe_train = train_from(j.at("pfe_train"), "pfe_train");

  const auto& b = j.at("conceptual");
  c.bank.groups = b.at("groups").get<int>();
  c.bank.top_percent = b.at("top_percent").get<double>();
  c.bank.min_points = b.at("min_points").get<std::size_t>();
  c.bank.distance = enum_from(kDistances, b.at("distance"), "conceptual.distance");

  const auto& e = j.at("eval");
  c.eval.iou_threshold = e.at("iou_threshold").get<double>();
  c.eval.interpolation_points = e.at("interpolation_points").get<int>();
  c.eval.mode = enum_from(kIouModes, e.at("metric"), "eval.metric");
  c.eval.distance_buckets = e.at("distance_buckets").get<bool>();

  const auto& s = j.at("synthetic");
  c.synthetic.scenes = s.at("scenes").get<std::size_t>();
  c.synthetic.seed = s.at("seed").get<std::uint64_t>();
  c.synthetic.grid = grid_from(s.at("grid"));
  c.synthetic.min_cars = s.at("min_cars").get<std::size_t>();
  c.synthetic.max_cars = s.at("max_cars").get<std::size_t>();
  c.synthetic.ground_z = s.at("ground_z").get<double>();
  c.synthetic.density = s.at("density").get<double>();
  c.synthetic.reference_range = s.at("reference_range").get<double>();
  c.synthetic.ground_points = s.at("ground_points").get<std::size_t>();
  c.synthetic.shadowing = s.at("shadowing").get<bool>();
  c.synthetic.sparsity_probability = s.at("sparsity_probability").get<double>();
  c.synthetic.occlusion_probability = s.at("occlusion_probability").get<double>();
  return c;
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  cfg_train.seed = s;
  pfe_train.seed = s;
}

void RunConfig::validate() const {
  try {
    detector.network.validate();
    if (detector.anchors.yaws.empty()) throw std::invalid_argument("anchors.yaws must not be empty");
    if (detector.network.anchors_per_location != detector.anchors.yaws.size()) {
      throw std::invalid_argument("anchors per location must equal the number of anchor yaws");
    }
    if (!(detector.anchors.negative_iou <= detector.anchors.positive_iou)) {
      throw std::invalid_argument("anchors.negative_iou must not exceed anchors.positive_iou");
    }
    cfg_train.validate();
    pfe_train.validate();
    eval.validate();
    synthetic.grid.validate();
    if (bank.groups < 1) throw std::invalid_argument("conceptual.groups must be >= 1");
    if (!(bank.top_percent > 0.0 && bank.top_percent <= 100.0)) {
      throw std::invalid_argument("conceptual.top_percent must lie in (0, 100]");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

RunConfig default_config() {
  RunConfig c;
  c.cfg_train.sigma = 0.0;
  c.synthetic.sparsity_probability = 0.5;
  c.synthetic.occlusion_probability = 0.5;
  return c;
}

std::string to_json(const RunConfig& config) { return to_tree(config).dump(2) + "\n"; }

RunConfig from_json(const std::string& text) {
  json given;
  try {
    given = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!given.is_object()) throw ConfigError("config must be a JSON object");
  json merged = to_tree(default_config());
  reject_unknown(given, merged, "");
  merged.merge_patch(given);
  const bool derive_stages = !(given.contains("network") && given["network"].contains("stages"));
  RunConfig c;
  try {
    c = from_tree(merged, derive_stages);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace assoc3d
