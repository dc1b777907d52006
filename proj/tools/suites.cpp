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

#include "suites.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>
#include <tuple>

#include "assoc3d/adaptation.hpp"
#include "assoc3d/detection_head.hpp"
#include "assoc3d/geometry.hpp"
#include "assoc3d/gradcheck.hpp"
#include "assoc3d/ops.hpp"
#include "assoc3d/sparse_conv.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace assoc3d::suites {
namespace {

using ad::Tensor;
using ad::Var;
using testutil::random_tensor;
using testutil::to_vector;

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// Offsets kept clear of integer sample positions, where bilinear weights kink.
Tensor fractional(ad::Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> frac(0.15, 0.85);
  std::uniform_int_distribution<int> whole(-1, 1);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = whole(rng) + frac(rng);
  return t;
}

sparse::SparseVoxelTensor random_sparse(std::mt19937_64& rng, const sparse::Extent& extent, std::size_t count,
                                        std::size_t channels) {
  std::set<voxel::Coord> picked;
  std::uniform_int_distribution<int> ux(0, int(extent[0]) - 1), uy(0, int(extent[1]) - 1), uz(0, int(extent[2]) - 1);
  while (picked.size() < count) picked.insert({ux(rng), uy(rng), uz(rng)});
  sparse::SparseVoxelTensor t;
  t.coords.assign(picked.begin(), picked.end());
  t.spatial_shape = extent;
  t.features = random_tensor({count, channels}, rng);
  return t;
}

oracle::Volume densify(const sparse::SparseVoxelTensor& t) {
  const std::size_t c = t.channels();
  oracle::Volume v(c, t.spatial_shape[0], t.spatial_shape[1], t.spatial_shape[2]);
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t k = 0; k < c; ++k) v.at(k, t.coords[i][0], t.coords[i][1], t.coords[i][2]) = t.features[i * c + k];
  }
  return v;
}

Tensor binary_mask(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  std::bernoulli_distribution b(0.5);
  Tensor m({h, w});
  for (double& v : m.values()) v = b(rng) ? 1.0 : 0.0;
  m[0] = 1.0;
  return m;
}

}  // namespace

std::vector<OpCheck> gradient_checks(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<OpCheck> out;
  auto run = [&](const std::string& name, const ad::ScalarFn& f, const std::vector<Tensor>& inputs) {
    const auto r = ad::gradient_check(f, inputs);
    out.push_back({name, r.max_relative_error, r.elements_checked});
  };

  run("conv2d",
      [](ad::Tape&, std::span<const Var> v) {
        Var y = ad::conv2d(v[0], v[1], v[2], {2, 1});
        return ad::sum(ad::mul(y, y));
      },
      {random_tensor({2, 6, 5}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)});

  run("deform_conv2d",
      [](ad::Tape&, std::span<const Var> v) {
        Var y = ad::deform_conv2d(v[0], v[1], v[2], v[3], {1, 1});
        return ad::sum(ad::mul(y, y));
      },
      {random_tensor({2, 5, 5}, rng), random_tensor({2, 2, 3, 3}, rng), fractional({18, 5, 5}, rng),
       random_tensor({2}, rng)});

  run("linear",
      [](ad::Tape&, std::span<const Var> v) {
        Var y = ad::relu(ad::linear(v[0], v[1], v[2]));
        return ad::sum(ad::mul(y, y));
      },
      {random_tensor({7, 3}, rng), random_tensor({4, 3}, rng), random_tensor({4}, rng)});

  for (auto mode : {sparse::ConvMode::kSubmanifold, sparse::ConvMode::kStrided}) {
    const auto in = random_sparse(rng, {5, 5, 4}, 18, 2);
    sparse::KernelSpec spec;
    spec.mode = mode;
    if (mode == sparse::ConvMode::kStrided) spec.stride = {2, 2, 2};
    auto rb = std::make_shared<const sparse::Rulebook>(sparse::build_rulebook(in.coords, in.spatial_shape, spec));
    run(mode == sparse::ConvMode::kStrided ? "sparse_conv_strided" : "sparse_conv_submanifold",
        [rb](ad::Tape&, std::span<const Var> v) {
          Var y = sparse::sparse_conv(v[0], v[1], v[2], rb);
          return ad::sum(ad::mul(y, y));
        },
        {in.features, random_tensor({3, 2, 3, 3, 3}, rng), random_tensor({3}, rng)});
  }

  {
    std::uniform_int_distribution<int> lab(-1, 1);
    std::vector<head::AnchorLabel> labels(24);
    for (auto& l : labels) l = static_cast<head::AnchorLabel>(lab(rng));
    labels[0] = head::AnchorLabel::kPositive;
    run("focal_loss",
        [labels](ad::Tape&, std::span<const Var> v) { return head::focal_loss(v[0], labels, {}); },
        {random_tensor({24}, rng, -4, 4)});
  }

  {
    // Residuals kept off the Huber transition at |x| = 1.
    Tensor x = random_tensor({4, 7}, rng, 0.1, 2.5);
    std::bernoulli_distribution neg(0.5);
    for (double& v : x.values()) {
      if (std::abs(v - 1.0) < 0.05) v += 0.2;
      if (neg(rng)) v = -v;
    }
    run("smooth_l1", [](ad::Tape&, std::span<const Var> v) { return ad::smooth_l1_sum(v[0]); }, {x});
  }

  {
    const Tensor fc = random_tensor({6, 4, 5}, rng);
    const Tensor fg = binary_mask(rng, 4, 5);
    const Tensor r = adapt::reweighting_map(random_tensor({4, 5}, rng, 0, 2), fg);
    run("association_loss",
        [fc, fg, r](ad::Tape&, std::span<const Var> v) { return adapt::association_loss(v[0], fc, r, fg); },
        {random_tensor({6, 4, 5}, rng)});
  }
  return out;
}

SuiteResult gradient_suite(std::uint64_t seed) {
  double worst = 0.0;
  std::string worst_op;
  for (const auto& c : gradient_checks(seed)) {
    if (c.max_relative_error >= worst) {
      worst = c.max_relative_error;
      worst_op = c.op;
    }
  }
  return {worst < kGradTolerance, "max rel err " + fmt("%.3e", worst) + " (" + worst_op + ")"};
}

SuiteResult sparse_conv_oracle(std::uint64_t seed, std::size_t cases) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ext(3, 8), odd(0, 1), ksize(1, 3), stride(1, 3), ch(1, 3);
  double worst = 0.0;
  std::size_t site_mismatch = 0, sites = 0;
  for (std::size_t n = 0; n < cases; ++n) {
    const sparse::Extent extent{std::size_t(ext(rng)), std::size_t(ext(rng)), std::size_t(ext(rng))};
    const std::size_t volume = extent[0] * extent[1] * extent[2];
    std::uniform_int_distribution<std::size_t> count(1, std::min<std::size_t>(volume, 40));
    const std::size_t cin = std::size_t(ch(rng)), cout = std::size_t(ch(rng));
    const auto in = random_sparse(rng, extent, count(rng), cin);

    sparse::KernelSpec spec;
    spec.mode = n % 2 ? sparse::ConvMode::kStrided : sparse::ConvMode::kSubmanifold;
    for (int d = 0; d < 3; ++d) {
      if (spec.mode == sparse::ConvMode::kSubmanifold) {
        spec.size[d] = 1 + 2 * odd(rng);
        spec.padding[d] = spec.size[d] / 2;
        spec.stride[d] = 1;
      } else {
        spec.size[d] = ksize(rng);
        spec.stride[d] = stride(rng);
        spec.padding[d] = std::uniform_int_distribution<int>(0, spec.size[d] - 1)(rng);
      }
    }
    const Tensor weight = random_tensor(
        {cout, cin, std::size_t(spec.size[0]), std::size_t(spec.size[1]), std::size_t(spec.size[2])}, rng);
    const Tensor bias = random_tensor({cout}, rng);
    const auto rb = sparse::build_rulebook(in.coords, in.spatial_shape, spec);
    const auto got = sparse::sparse_conv_forward(in, weight, bias, rb);
    const oracle::Conv3dGeometry g{spec.size, spec.stride, spec.padding};
    const auto dense = oracle::dense_conv3d(densify(in), to_vector(weight), cout, to_vector(bias), g);
    const auto want_sites =
        spec.mode == sparse::ConvMode::kSubmanifold ? in.coords : oracle::dense_support(in.coords, extent, g);
    if (got.coords != want_sites) ++site_mismatch;
    for (std::size_t i = 0; i < got.size(); ++i) {
      const auto& c = got.coords[i];
      for (std::size_t k = 0; k < cout; ++k) {
        worst = std::max(worst, std::abs(got.features[i * cout + k] - dense.at(k, c[0], c[1], c[2])));
      }
    }
    sites += got.size();
  }
  return {worst <= 1e-12 && site_mismatch == 0,
          std::to_string(cases) + " cases, " + std::to_string(sites) + " sites, max abs err " + fmt("%.2e", worst) +
              ", site-set mismatches " + std::to_string(site_mismatch)};
}

SuiteResult box_codec_roundtrip(std::uint64_t seed, std::size_t pairs) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (auto coding : {head::BoxCoding::kAnchorMinusGt, head::BoxCoding::kGtMinusAnchor}) {
    for (std::size_t i = 0; i < pairs; ++i) {
      const Box3D a = testutil::random_box(rng, 40.0), g = testutil::random_box(rng, 40.0);
      const Box3D b = head::decode_box(a, head::encode_box(a, g, coding), coding);
      const double dyaw = std::remainder(b.yaw - g.yaw, 2 * std::numbers::pi);
      for (double e : {b.cx - g.cx, b.cy - g.cy, b.cz - g.cz, b.l - g.l, b.w - g.w, b.h - g.h, dyaw}) {
        worst = std::max(worst, std::abs(e));
      }
    }
  }
  return {worst <= 1e-9, std::to_string(pairs) + " pairs x 2 codings, max field err " + fmt("%.2e", worst)};
}

SuiteResult association_anchors(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto loss = [](const Tensor& fp, const Tensor& fc, const Tensor& r, const Tensor& fg) {
    ad::Tape tape;
    return adapt::association_loss(tape.constant(fp), fc, r, fg).value().item();
  };
  double worst = 0.0;
  // Hand cases: the 3-4-5 pixel, two pixels with mixed weights, no foreground.
  worst = std::max(worst, std::abs(loss(Tensor({2, 1, 1}, std::vector<double>{3, 4}), Tensor({2, 1, 1}, 0.0),
                                        Tensor({1, 1}, 1.0), Tensor({1, 1}, 1.0)) -
                                   10.0));
  worst = std::max(worst, std::abs(loss(Tensor({1, 1, 2}, std::vector<double>{1, 2}), Tensor({1, 1, 2}, 0.0),
                                        Tensor({1, 2}, std::vector<double>{1, 0}), Tensor({1, 2}, 1.0)) -
                                   2.0));
  worst = std::max(worst, std::abs(loss(Tensor({2, 1, 1}, std::vector<double>{3, 4}), Tensor({2, 1, 1}, 0.0),
                                        Tensor({1, 1}, 1.0), Tensor({1, 1}, 0.0))));
  {
    Tensor off({6, 1, 1}, std::vector<double>{3, 4, 0, 0, 6, 8});
    worst = std::max(worst, std::abs(adapt::offset_length_map(off)[0] - 5.0));
  }
  for (int t = 0; t < 20; ++t) {
    const Tensor fp = random_tensor({5, 4, 5}, rng), fc = random_tensor({5, 4, 5}, rng);
    const Tensor fg = binary_mask(rng, 4, 5);
    const Tensor r = adapt::reweighting_map(random_tensor({4, 5}, rng, 0, 2), fg);
    const double want =
        oracle::association_loss_loop(to_vector(fp), to_vector(fc), 5, 4, 5, to_vector(r), to_vector(fg));
    worst = std::max(worst, std::abs(loss(fp, fc, r, fg) - want));
  }

  std::size_t bad_maps = 0;
  for (int t = 0; t < 100; ++t) {
    const Tensor off = random_tensor({5, 6}, rng, 0.0, 4.0);
    const Tensor fg = binary_mask(rng, 5, 6);
    const Tensor r = adapt::reweighting_map(off, fg);
    double mx = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i < r.numel(); ++i) {
      ok = ok && r[i] >= 0.0 && r[i] <= 1.0 && (fg[i] != 0.0 || r[i] == 0.0);
      mx = std::max(mx, r[i]);
    }
    if (!ok || mx != 1.0) ++bad_maps;
  }
  return {worst <= 1e-10 && bad_maps == 0,
          "hand/oracle max err " + fmt("%.2e", worst) + ", reweight maps failing " + std::to_string(bad_maps) + "/100"};
}

SuiteResult conceptual_builder(const std::vector<io::Scene>& dataset, const conceptual::BankConfig& config) {
  const auto bank = conceptual::build_instance_bank(dataset, config);
  std::vector<oracle::CandidateRef> refs;
  for (std::size_t b = 0; b < bank.candidates.size(); ++b) {
    for (std::size_t idx : bank.candidates[b]) {
      const auto& inst = bank.instances[idx];
      refs.push_back({{inst.key.scene, inst.key.object}, static_cast<int>(b), inst.box, inst.points});
    }
  }
  std::size_t matches = 0, mismatches = 0, selfs = 0, bad_self = 0, survivors = 0;
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    const auto& scene = dataset[s];
    std::vector<conceptual::ConceptualMatch> found;
    const PointCloud composed = conceptual::compose_conceptual_scene(scene, s, bank, &found);
    std::size_t fi = 0;
    std::set<std::tuple<double, double, double, double>> placed_self;
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
      if (scene.objects[o].ignore) continue;
      const auto& m = found[fi++];
      PointCloud pts;
      for (std::size_t i : geom::points_in_box(scene.points, scene.objects[o].box)) pts.push_back(scene.points[i]);
      const auto want = oracle::brute_force_match(scene.objects[o].box, pts, std::make_pair(s, o), refs, config.groups);
      const auto& ref = refs[want.index];
      ++matches;
      if (m.bin != want.bin || m.self != want.self || m.candidate_key.scene != ref.key.first ||
          m.candidate_key.object != ref.key.second || std::abs(m.distance - want.distance) > 1e-9) {
        ++mismatches;
      }
      if (m.self) {
        ++selfs;
        if (m.distance != 0.0) ++bad_self;
        for (const auto& p : pts) placed_self.insert({p.x, p.y, p.z, p.intensity});
      }
    }
    // An original object point may only reappear as part of its own
    // self-matched model.
    std::set<std::tuple<double, double, double, double>> out;
    for (const auto& p : composed) out.insert({p.x, p.y, p.z, p.intensity});
    for (const auto& obj : scene.objects) {
      if (obj.ignore) continue;
      for (std::size_t i : geom::points_in_box(scene.points, obj.box)) {
        const auto& p = scene.points[i];
        const std::tuple<double, double, double, double> key{p.x, p.y, p.z, p.intensity};
        if (out.count(key) && !placed_self.count(key)) ++survivors;
      }
    }
  }
  return {mismatches == 0 && bad_self == 0 && survivors == 0 && selfs > 0,
          std::to_string(matches) + " matches, " + std::to_string(mismatches) + " differ from brute force, " +
              std::to_string(selfs) + " self (" + std::to_string(bad_self) + " nonzero), surviving points " +
              std::to_string(survivors)};
}

SuiteResult rotated_iou(std::uint64_t seed, std::size_t pairs, std::size_t samples) {
  const double pi = std::numbers::pi;
  double fixture_worst = 0.0;
  const Box3D unit{0, 0, 0, 2, 2, 1, 0};
  fixture_worst = std::max(fixture_worst, std::abs(geom::rotated_iou_bev(unit, unit) - 1.0));
  fixture_worst = std::max(fixture_worst, std::abs(geom::rotated_iou_bev(unit, {5, 5, 0, 2, 2, 1, 0.3})));
  fixture_worst = std::max(fixture_worst, std::abs(geom::rotated_iou_bev(unit, {1, 0, 0, 2, 2, 1, 0}) - 1.0 / 3));
  fixture_worst = std::max(fixture_worst, std::abs(geom::rotated_iou_bev(unit, {0, 1, 0, 2, 2, 1, pi / 2}) - 1.0 / 3));
  fixture_worst = std::max(fixture_worst, std::abs(geom::rotated_iou_bev({0, 0, 0, 4, 2, 1, 0.7},
                                                                         {0, 0, 0, 4, 2, 1, 0.7 + pi}) -
                                                   1.0));

  std::mt19937_64 rng(seed);
  double mc_worst = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const Box3D a = testutil::random_box(rng, 1.5), b = testutil::random_box(rng, 1.5);
    const double mc = oracle::monte_carlo_iou_bev(a, b, samples, seed * 7919 + i);
    mc_worst = std::max(mc_worst, std::abs(geom::rotated_iou_bev(a, b) - mc));
  }
  return {fixture_worst <= 1e-9 && mc_worst <= 1e-2,
          "fixtures max err " + fmt("%.2e", fixture_worst) + ", " + std::to_string(pairs) + " pairs vs MC max err " +
              fmt("%.2e", mc_worst)};
}

}  // namespace assoc3d::suites
