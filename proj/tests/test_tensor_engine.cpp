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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "assoc3d/checkpoint.hpp"
#include "assoc3d/gradcheck.hpp"
#include "assoc3d/ops.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace assoc3d::ad;
using testutil::random_tensor;
using testutil::to_vector;

namespace {

// Offsets whose fractional part stays away from the bilinear kinks.
Tensor fractional_offsets(Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> frac(0.15, 0.85);
  std::uniform_int_distribution<int> whole(-1, 1);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = whole(rng) + frac(rng);
  return t;
}

Tensor eval_unary(const std::function<Var(Tape&, Var)>& f, const Tensor& x) {
  Tape tape;
  return f(tape, tape.constant(x)).value();
}

}  // namespace

TEST(Tensor, ShapeInvariants) {
  Tensor t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3, 0.0)), ShapeError);
  EXPECT_THROW(t.reshaped({5, 5}), ShapeError);
  EXPECT_EQ(t.reshaped({4, 6}).numel(), 24u);
}

TEST(Tape, RecordsInTopologicalOrder) {
  Tape tape;
  Var a = tape.leaf(Tensor({2}, 1.0), true);
  Var b = tape.leaf(Tensor({2}, 2.0), true);
  Var c = add(a, b);
  Var d = mul(c, a);
  EXPECT_LT(a.id(), c.id());
  EXPECT_LT(b.id(), c.id());
  EXPECT_LT(c.id(), d.id());
  Var s = sum(d);
  tape.backward(s);
  // d = (a + b) a -> dd/da = 2a + b = 4, dd/db = a = 1
  EXPECT_EQ(to_vector(tape.grad(a)), (std::vector<double>{4, 4}));
  EXPECT_EQ(to_vector(tape.grad(b)), (std::vector<double>{1, 1}));
}

TEST(Tape, GradientOfSharedInputAccumulates) {
  Tape tape;
  Var x = tape.leaf(Tensor({1}, 3.0), true);
  tape.backward(sum(add(mul(x, x), x)));
  EXPECT_DOUBLE_EQ(tape.grad(x).item(), 7.0);
}

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({3, 4, 5}, rng);
  Tensor w({3, 3, 1, 1}, 0.0);
  for (std::size_t c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
  Tape tape;
  const Tensor y = conv2d(tape.constant(x), tape.constant(w), tape.constant(Tensor({3}, 0.0))).value();
  EXPECT_EQ(y, x);
}

TEST(Conv2d, ConstantField) {
  Tape tape;
  const Tensor y = conv2d(tape.constant(Tensor({1, 5, 5}, 1.0)), tape.constant(Tensor({1, 1, 3, 3}, 1.0)),
                          std::nullopt)
                       .value();
  EXPECT_EQ(y.shape(), (Shape{1, 3, 3}));
  for (double v : y.values()) EXPECT_EQ(v, 9.0);
}

TEST(Conv2d, MatchesNestedLoops) {
  std::mt19937_64 rng(2);
  for (std::size_t stride : {1, 2}) {
    for (std::size_t pad : {0, 1}) {
      const Tensor x = random_tensor({2, 4, 4}, rng);
      const Tensor w = random_tensor({3, 2, 3, 3}, rng);
      Tape tape;
      const Tensor y = conv2d(tape.constant(x), tape.constant(w), std::nullopt, {stride, pad}).value();
      const auto want = oracle::conv2d_loops(to_vector(x), 2, 4, 4, to_vector(w), 3, 3, 3, stride, pad);
      ASSERT_EQ(y.numel(), want.size());
      for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(y[i], want[i], 1e-12);
    }
  }
}

TEST(Conv2d, ShapeMismatchThrows) {
  Tape tape;
  EXPECT_THROW(conv2d(tape.constant(Tensor({2, 4, 4})), tape.constant(Tensor({1, 3, 3, 3})), std::nullopt),
               ShapeError);
}

TEST(DeformConv2d, ZeroOffsetsEqualRigidConvExactly) {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({2, 6, 6}, rng);
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  Tape tape;
  const Tensor rigid = conv2d(tape.constant(x), tape.constant(w), tape.constant(b), {1, 1}).value();
  const Tensor deform = deform_conv2d(tape.constant(x), tape.constant(w), tape.constant(Tensor({18, 6, 6}, 0.0)),
                                      tape.constant(b), {1, 1})
                            .value();
  EXPECT_EQ(rigid, deform);
}

TEST(DeformConv2d, IntegerShiftMatchesShiftedInput) {
  std::mt19937_64 rng(4);
  const std::size_t h = 7, w = 7;
  const Tensor x = random_tensor({1, h, w}, rng);
  const Tensor k = random_tensor({1, 1, 3, 3}, rng);
  Tensor offsets({18, h - 2, w - 2}, 0.0);
  for (std::size_t t = 0; t < 9; ++t) {
    for (std::size_t p = 0; p < (h - 2) * (w - 2); ++p) offsets[(2 * t + 1) * (h - 2) * (w - 2) + p] = 1.0;
  }
  // Input shifted left by one column.
  Tensor shifted({1, h, w}, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t xx = 0; xx + 1 < w; ++xx) shifted[y * w + xx] = x[y * w + xx + 1];
  }
  Tape tape;
  const Tensor a = deform_conv2d(tape.constant(x), tape.constant(k), tape.constant(offsets), std::nullopt).value();
  const Tensor b = conv2d(tape.constant(shifted), tape.constant(k), std::nullopt).value();
  const std::size_t wo = w - 2;
  for (std::size_t y = 0; y < h - 2; ++y) {
    for (std::size_t xx = 0; xx + 1 < wo; ++xx) EXPECT_NEAR(a[y * wo + xx], b[y * wo + xx], 1e-12);
  }
}

TEST(DeformConv2d, MatchesScalarBilinearOracle) {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({1, 6, 6}, rng);
  const Tensor w = random_tensor({2, 1, 3, 3}, rng);
  const Tensor off = random_tensor({18, 6, 6}, rng, -2.0, 2.0);
  Tape tape;
  const Tensor y = deform_conv2d(tape.constant(x), tape.constant(w), tape.constant(off), std::nullopt, {1, 1}).value();
  const auto want = oracle::deform_conv2d_loops(to_vector(x), 1, 6, 6, to_vector(w), 2, 3, 3, to_vector(off), 1, 1);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(y[i], want[i], 1e-12);
}

TEST(BilinearSample, Examples) {
  Tensor map({1, 2, 2}, std::vector<double>{0.0, 1.0, 2.0, 3.0});
  EXPECT_EQ(bilinear_sample(map, 1.0, 1.0)[0], 3.0);
  EXPECT_DOUBLE_EQ(bilinear_sample(map, 0.5, 0.0)[0], 0.5);
  EXPECT_EQ(bilinear_sample(map, -5.0, 0.0)[0], 0.0);
  EXPECT_EQ(bilinear_sample(map, 0.0, 9.0)[0], 0.0);
  std::mt19937_64 rng(6);
  const Tensor big = random_tensor({2, 5, 4}, rng);
  std::uniform_real_distribution<double> u(-1.5, 5.5);
  for (int i = 0; i < 100; ++i) {
    const double sx = u(rng), sy = u(rng);
    const auto got = bilinear_sample(big, sx, sy);
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(got[c], oracle::bilinear(to_vector(big), 5, 4, c, sx, sy), 1e-12);
  }
}

TEST(Elementwise, ForwardValues) {
  const Tensor x({4}, std::vector<double>{-2.0, -0.5, 0.5, 2.0});
  EXPECT_EQ(to_vector(eval_unary([](Tape&, Var v) { return relu(v); }, x)), (std::vector<double>{0, 0, 0.5, 2}));
  EXPECT_NEAR(eval_unary([](Tape&, Var v) { return sigmoid(v); }, x)[3], 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  // Huber: 0.5 r^2 inside |r| < 1, |r| - 0.5 outside.
  EXPECT_DOUBLE_EQ(eval_unary([](Tape&, Var v) { return smooth_l1_sum(v); }, x).item(), 1.5 + 0.125 + 0.125 + 1.5);
  EXPECT_DOUBLE_EQ(eval_unary([](Tape&, Var v) { return mean(v); }, x).item(), 0.0);
}

TEST(Linear, MatchesMatrixProduct) {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor({5, 3}, rng), w = random_tensor({4, 3}, rng), b = random_tensor({4}, rng);
  Tape tape;
  const Tensor y = linear(tape.constant(x), tape.constant(w), tape.constant(b)).value();
  for (std::size_t n = 0; n < 5; ++n) {
    for (std::size_t o = 0; o < 4; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < 3; ++i) acc += x[n * 3 + i] * w[o * 3 + i];
      EXPECT_NEAR(y[n * 4 + o], acc, 1e-12);
    }
  }
}

TEST(GradientCheck, SumOfConv2d) {
  std::mt19937_64 rng(8);
  const auto report = gradient_check(
      [](Tape&, std::span<const Var> in) { return sum(conv2d(in[0], in[1], in[2], {2, 1})); },
      {random_tensor({2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)});
  EXPECT_LT(report.max_relative_error, 1e-6);
}

TEST(GradientCheck, DeformConvWrtOffsets) {
  std::mt19937_64 rng(9);
  const auto report = gradient_check(
      [](Tape&, std::span<const Var> in) {
        // Weight the outputs so the check sees more than their plain sum.
        Var y = deform_conv2d(in[0], in[1], in[2], in[3], {1, 1});
        return sum(mul(y, y));
      },
      {random_tensor({2, 5, 5}, rng), random_tensor({2, 2, 3, 3}, rng), fractional_offsets({18, 5, 5}, rng),
       random_tensor({2}, rng)});
  EXPECT_LT(report.max_relative_error, 1e-5);
}

TEST(GradientCheck, RegisteredElementwiseOps) {
  std::mt19937_64 rng(10);
  // Keep values away from the relu and Huber kinks.
  auto away = [&](Shape s) {
    Tensor t = random_tensor(std::move(s), rng, 0.1, 1.8);
    std::bernoulli_distribution neg(0.5);
    for (double& v : t.values()) {
      if (std::abs(v - 1.0) < 0.05) v += 0.2;
      if (neg(rng)) v = -v;
    }
    return t;
  };
  const std::vector<Tensor> in{away({3, 4}), away({3, 4})};
  const auto r = gradient_check(
      [](Tape&, std::span<const Var> v) {
        Var a = relu(v[0]);
        Var b = sigmoid(v[1]);
        Var c = add(mul(a, b), scale(sub(v[0], v[1]), 0.3));
        return add(add(sum(c), mean(mul(c, c))), smooth_l1_sum(reshape(v[1], {12})));
      },
      in);
  EXPECT_LT(r.max_relative_error, 1e-5);
}

TEST(GradientCheck, Linear) {
  std::mt19937_64 rng(11);
  const auto r = gradient_check(
      [](Tape&, std::span<const Var> v) {
        Var y = linear(v[0], v[1], v[2]);
        return sum(mul(y, y));
      },
      {random_tensor({6, 3}, rng), random_tensor({4, 3}, rng), random_tensor({4}, rng)});
  EXPECT_LT(r.max_relative_error, 1e-5);
}

TEST(GradientCheck, ReportsNonFinite) {
  EXPECT_THROW(gradient_check([](Tape&, std::span<const Var> v) { return scale(sum(v[0]), 1e308 * 10); },
                              {Tensor({2}, 1.0)}),
               std::runtime_error);
}

TEST(Forward, BitIdenticalAcrossRuns) {
  std::mt19937_64 rng(12);
  const Tensor x = random_tensor({3, 8, 8}, rng), w = random_tensor({4, 3, 5, 5}, rng);
  const Tensor off = random_tensor({50, 8, 8}, rng);
  auto run = [&] {
    Tape tape;
    return deform_conv2d(tape.constant(x), tape.constant(w), tape.constant(off), std::nullopt, {1, 2}).value();
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripIsBitExact) {
  std::mt19937_64 rng(13);
  ParameterSet p;
  p["a.weight"] = random_tensor({3, 4}, rng, -1e10, 1e10);
  p["b.bias"] = random_tensor({7}, rng);
  p["c.scalar"] = Tensor::scalar(std::nextafter(1.0, 2.0));
  const auto dir = testutil::temp_dir("ckpt");
  save_checkpoint(dir / "p.ckpt", p);
  const ParameterSet q = load_checkpoint(dir / "p.ckpt");
  EXPECT_EQ(p, q);
  EXPECT_EQ(fingerprint(p), fingerprint(q));
  ParameterSet r = q;
  r["b.bias"][0] += 1e-12;
  EXPECT_NE(fingerprint(p), fingerprint(r));
}

TEST(Checkpoint, RejectsCorruptHeader) {
  std::vector<char> bytes = serialize({{"x", Tensor({1}, 1.0)}});
  bytes[0] = 'Z';
  EXPECT_THROW(deserialize(bytes), std::runtime_error);
  std::vector<char> truncated = serialize({{"x", Tensor({4}, 1.0)}});
  truncated.resize(truncated.size() - 3);
  EXPECT_THROW(deserialize(truncated), std::runtime_error);
}
