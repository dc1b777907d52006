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

// a3d: command-line driver for the assoc3d pipeline.
//
//   a3d make-synthetic   --config C --out DIR      synthetic real-scene dataset
//   a3d build-conceptual --config C --out DIR      composed scenes + report.txt
//   a3d train-cfg        --config C --out DIR      cfg.ckpt + cfg_loss.log
//   a3d train            --config C --out DIR      pfe.ckpt + pfe_loss.log
//   a3d eval             --config C --out DIR      report.json + detections/
//   a3d render-bev       --config C --out DIR --scene ID
//   a3d gradcheck | selftest
//
// Exit codes: 0 ok, 1 runtime error, 2 usage, 3 missing config or input
// path, 4 invalid config, 5 a verification check failed.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "assoc3d/checkpoint.hpp"
#include "assoc3d/config.hpp"
#include "assoc3d/synthetic.hpp"
#include "pipeline.hpp"
#include "suites.hpp"

namespace fs = std::filesystem;
using namespace assoc3d;

namespace {

enum Exit : int { kOk = 0, kRuntime = 1, kUsage = 2, kMissing = 3, kInvalid = 4, kCheckFailed = 5 };

struct MissingPath : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::string dataset;
  std::string scene;
  bool dump_defaults = false;
};

void require(const fs::path& p, const std::string& what) {
  if (p.empty()) throw MissingPath(what + " is not set");
  if (!fs::exists(p)) throw MissingPath(what + " does not exist: " + p.string());
}

RunConfig load(const Options& o) {
  if (o.config.empty()) throw MissingPath("--config is required");
  if (!fs::exists(o.config)) throw MissingPath("config not found: " + o.config);
  RunConfig c = load_config(o.config);
  if (o.seed) c.apply_seed(*o.seed);
  return c;
}

fs::path out_dir(const Options& o) {
  if (o.out.empty()) throw CLI::ValidationError("--out", "an output directory is required");
  fs::create_directories(o.out);
  return o.out;
}

fs::path pick(const std::string& flag, const fs::path& fallback) { return flag.empty() ? fallback : fs::path(flag); }

int make_synthetic(const Options& o) {
  RunConfig c = load(o);
  if (o.seed) c.synthetic.seed = *o.seed;
  const fs::path out = out_dir(o);
  io::write_native_dataset(out, synth::generate_dataset(c.synthetic));
  std::printf("wrote %zu scenes to %s\n", c.synthetic.scenes, out.string().c_str());
  return kOk;
}

int build_conceptual(const Options& o) {
  const RunConfig c = load(o);
  const fs::path real = pick(o.dataset, c.paths.real);
  require(real, "paths.real");
  const fs::path out = out_dir(o);
  const auto build = pipeline::build_conceptual(io::read_native_dataset(real), c.bank);
  pipeline::write_conceptual(out, build);
  std::printf("composed %zu scenes, %zu matches -> %s\n", build.scenes.size(), build.matches.size(),
              out.string().c_str());
  return kOk;
}

int train_cfg(const Options& o) {
  const RunConfig c = load(o);
  const fs::path conc = pick(o.dataset, c.paths.conceptual);
  require(conc, "paths.conceptual");
  const fs::path out = out_dir(o);
  auto cfg = c.cfg_train;
  cfg.checkpoint_dir = out;
  const auto result = train::train_cfg(io::read_native_dataset(conc), c.detector, cfg, [](const train::EpochLog& e) {
    std::printf("%s", train::format_log({e}).c_str());
    std::fflush(stdout);
  });
  pipeline::write_training(out, "cfg", result);
  return kOk;
}

int train_pfe(const Options& o) {
  const RunConfig c = load(o);
  require(c.paths.real, "paths.real");
  require(c.paths.conceptual, "paths.conceptual");
  const fs::path ckpt = pick(o.checkpoint, c.paths.cfg_checkpoint);
  require(ckpt, "paths.cfg_checkpoint");
  const fs::path out = out_dir(o);
  const auto pairs =
      train::pair_datasets(io::read_native_dataset(c.paths.real), io::read_native_dataset(c.paths.conceptual));
  auto cfg = c.pfe_train;
  cfg.checkpoint_dir = out;
  const auto result =
      train::train_associate(pairs, ad::load_checkpoint(ckpt), c.detector, cfg, [](const train::EpochLog& e) {
        std::printf("%s", train::format_log({e}).c_str());
        std::fflush(stdout);
      });
  pipeline::write_training(out, "pfe", result);
  return kOk;
}

int evaluate(const Options& o) {
  const RunConfig c = load(o);
  const fs::path ckpt = pick(o.checkpoint, c.paths.pfe_checkpoint);
  const fs::path data = pick(o.dataset, c.paths.real);
  require(ckpt, "checkpoint");
  require(data, "dataset");
  const fs::path out = out_dir(o);
  const auto dataset = io::read_native_dataset(data);
  const auto e = pipeline::evaluate(ad::load_checkpoint(ckpt), dataset, c);
  pipeline::write_evaluation(out, dataset, e);
  std::printf("AP %.4f over %zu scenes (%zu gt, %zu detections)\n", e.report.overall.ap, e.report.scenes,
              e.report.overall.num_gt, e.report.overall.num_detections);
  return kOk;
}

int render(const Options& o) {
  const RunConfig c = load(o);
  const fs::path data = pick(o.dataset, c.paths.real);
  require(data, "dataset");
  if (o.scene.empty()) throw CLI::ValidationError("--scene", "a scene id is required");
  require(data / o.scene, "scene");
  std::optional<ad::ParameterSet> params;
  if (!o.checkpoint.empty()) {
    require(o.checkpoint, "checkpoint");
    params = ad::load_checkpoint(o.checkpoint);
  }
  const fs::path out = out_dir(o);
  const auto scene = io::read_native_scene(data / o.scene);
  pipeline::write_text(out / (o.scene + ".ppm"), pipeline::render_bev(scene, c, params ? &*params : nullptr));
  std::printf("wrote %s\n", (out / (o.scene + ".ppm")).string().c_str());
  return kOk;
}

int gradcheck(const Options& o) {
  bool ok = true;
  for (const auto& c : suites::gradient_checks(o.seed.value_or(0))) {
    const bool pass = c.max_relative_error < suites::kGradTolerance;
    ok = ok && pass;
    std::printf("%-24s max_rel_err %.3e  (%zu elements) %s\n", c.op.c_str(), c.max_relative_error, c.elements,
                pass ? "ok" : "FAIL");
  }
  return ok ? kOk : kCheckFailed;
}

int selftest(const Options& o) {
  const std::uint64_t seed = o.seed.value_or(0);
  RunConfig c = o.config.empty() ? pipeline::synthetic_run_config() : load(o);
  const auto dataset = synth::generate_dataset(c.synthetic);
  bool ok = true;
  auto report = [&](const char* name, const suites::SuiteResult& r) {
    ok = ok && r.pass;
    std::printf("%-22s %s  %s\n", name, r.pass ? "ok  " : "FAIL", r.detail.c_str());
    std::fflush(stdout);
  };
  report("sparse_conv_oracle", suites::sparse_conv_oracle(seed));
  report("box_codec_roundtrip", suites::box_codec_roundtrip(seed));
  report("association_anchors", suites::association_anchors(seed));
  report("conceptual_builder", suites::conceptual_builder(dataset, c.bank));
  report("rotated_iou", suites::rotated_iou(seed));
  report("gradient_suite", suites::gradient_suite(seed));
  return ok ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"assoc3d: point-cloud detection with conceptual feature association"};
  app.require_subcommand(0, 1);
  Options o;
  app.add_option("--config", o.config, "run configuration (JSON)");
  app.add_option("--seed", o.seed, "override every seed in the configuration");
  app.add_option("--out", o.out, "output directory");
  app.add_flag("--dump-defaults", o.dump_defaults, "print the default configuration and exit");

  auto sub = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };
  CLI::App* synthetic = sub("make-synthetic", "generate the synthetic real-scene dataset");
  CLI::App* conceptual = sub("build-conceptual", "compose conceptual scenes from a real dataset");
  conceptual->add_option("--dataset", o.dataset, "real dataset (default paths.real)");
  CLI::App* tcfg = sub("train-cfg", "train the conceptual feature generator");
  tcfg->add_option("--dataset", o.dataset, "conceptual dataset (default paths.conceptual)");
  CLI::App* tpfe = sub("train", "train the perceptual feature extractor with association");
  tpfe->add_option("--checkpoint", o.checkpoint, "frozen CFG checkpoint (default paths.cfg_checkpoint)");
  CLI::App* ev = sub("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", o.checkpoint, "parameters (default paths.pfe_checkpoint)");
  ev->add_option("--dataset", o.dataset, "dataset (default paths.real)");
  CLI::App* bev = sub("render-bev", "render one scene as a BEV image");
  bev->add_option("--checkpoint", o.checkpoint, "parameters for detections and the reweighting layer");
  bev->add_option("--dataset", o.dataset, "dataset (default paths.real)");
  bev->add_option("--scene", o.scene, "scene id");
  CLI::App* gc = sub("gradcheck", "finite-difference check of every differentiable op");
  CLI::App* st = sub("selftest", "run the oracle-equivalence suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (o.dump_defaults) {
      std::cout << to_json(default_config());
      return kOk;
    }
    if (synthetic->parsed()) return make_synthetic(o);
    if (conceptual->parsed()) return build_conceptual(o);
    if (tcfg->parsed()) return train_cfg(o);
    if (tpfe->parsed()) return train_pfe(o);
    if (ev->parsed()) return evaluate(o);
    if (bev->parsed()) return render(o);
    if (gc->parsed()) return gradcheck(o);
    if (st->parsed()) return selftest(o);
    std::cerr << app.help();
    return kUsage;
  } catch (const MissingPath& e) {
    std::cerr << "a3d: " << e.what() << "\n";
    return kMissing;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "a3d: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "a3d: invalid config: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "a3d: " << e.what() << "\n";
    return kRuntime;
  }
}
