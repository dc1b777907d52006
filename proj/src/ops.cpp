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

#include "assoc3d/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "kernels.hpp"

namespace assoc3d::ad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

Tape& tape_of(const Var& v) {
  if (!v.valid()) throw std::logic_error("op on an unbound Var");
  return *v.tape();
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  return tape_of(a).record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    for (Tensor* g : ctx.input_grads) {
      if (!g) continue;
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += ctx.grad_out[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  return tape_of(a).record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    if (Tensor* g = ctx.input_grads[0]) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += ctx.grad_out[i];
    }
    if (Tensor* g = ctx.input_grads[1]) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] -= ctx.grad_out[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  return tape_of(a).record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& av = *ctx.inputs[0];
    const Tensor& bv = *ctx.inputs[1];
    if (Tensor* g = ctx.input_grads[0]) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += ctx.grad_out[i] * bv[i];
    }
    if (Tensor* g = ctx.input_grads[1]) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += ctx.grad_out[i] * av[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return tape_of(a).record(std::move(out), {a}, [factor](const BackwardContext& ctx) {
    Tensor& g = *ctx.input_grads[0];
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += factor * ctx.grad_out[i];
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return tape_of(a).record(std::move(out), {a}, [](const BackwardContext& ctx) {
    Tensor& g = *ctx.input_grads[0];
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (ctx.out[i] > 0.0) g[i] += ctx.grad_out[i];
    }
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.values()) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  return tape_of(a).record(std::move(out), {a}, [](const BackwardContext& ctx) {
    Tensor& g = *ctx.input_grads[0];
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double s = ctx.out[i];
      g[i] += ctx.grad_out[i] * s * (1.0 - s);
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return tape_of(a).record(std::move(out), {a}, [](const BackwardContext& ctx) {
    Tensor& g = *ctx.input_grads[0];
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += ctx.grad_out[i];
  });
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  return tape_of(a).record(Tensor::scalar(acc), {a}, [](const BackwardContext& ctx) {
    Tensor& g = *ctx.input_grads[0];
    const double go = ctx.grad_out[0];
    for (double& v : g.values()) v += go;
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().numel());
  if (n == 0.0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var smooth_l1_sum(const Var& a) {
  double acc = 0.0;
  for (double v : a.value().values()) {
    const double r = std::abs(v);
    acc += r < 1.0 ? 0.5 * r * r : r - 0.5;
  }
  return tape_of(a).record(Tensor::scalar(acc), {a}, [](const BackwardContext& ctx) {
    Tensor& g = *ctx.input_grads[0];
    const Tensor& x = *ctx.inputs[0];
    const double go = ctx.grad_out[0];
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double v = x[i];
      const double d = std::abs(v) < 1.0 ? v : (v > 0.0 ? 1.0 : -1.0);
      g[i] += go * d;
    }
  });
}

Var linear(const Var& x, const Var& weight, const std::optional<Var>& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1)) {
    throw ShapeError("linear: input " + shape_string(xv.shape()) + " vs weight " + shape_string(wv.shape()));
  }
  const std::size_t n = xv.dim(0);
  const std::size_t cin = xv.dim(1);
  const std::size_t cout = wv.dim(0);
  if (bias && bias->value().numel() != cout) throw ShapeError("linear: bias length mismatch");
  Tensor out({n, cout}, 0.0);
  if (bias) {
    const Tensor& bv = bias->value();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t o = 0; o < cout; ++o) out[i * cout + o] = bv[o];
    }
  }
  kernels::gemm_nt(n, cout, cin, xv.data(), wv.data(), out.data());
  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  return tape_of(x).record(std::move(out), std::move(inputs), [n, cin, cout](const BackwardContext& ctx) {
    const double* g = ctx.grad_out.data();
    if (Tensor* gx = ctx.input_grads[0]) kernels::gemm_nn(n, cin, cout, g, ctx.inputs[1]->data(), gx->data());
    if (Tensor* gw = ctx.input_grads[1]) kernels::gemm_tn(cout, cin, n, g, ctx.inputs[0]->data(), gw->data());
    if (ctx.input_grads.size() > 2) {
      if (Tensor* gb = ctx.input_grads[2]) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t o = 0; o < cout; ++o) (*gb)[o] += g[i * cout + o];
        }
      }
    }
  });
}

namespace {

struct ConvGeometry {
  std::size_t cin, h, w, cout, kh, kw, ho, wo, stride, padding;
  std::size_t taps() const { return kh * kw; }
  std::size_t pixels() const { return ho * wo; }
  std::size_t rows() const { return cin * kh * kw; }
};

ConvGeometry conv_geometry(const Tensor& in, const Tensor& weight, Conv2dOptions opt, const char* op) {
  if (in.rank() != 3 || weight.rank() != 4 || in.dim(0) != weight.dim(1)) {
    throw ShapeError(std::string(op) + ": input " + shape_string(in.shape()) + " vs weight " +
                     shape_string(weight.shape()));
  }
  if (opt.stride < 1) throw ShapeError(std::string(op) + ": stride must be >= 1");
  ConvGeometry g{};
  g.cin = in.dim(0);
  g.h = in.dim(1);
  g.w = in.dim(2);
  g.cout = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = opt.stride;
  g.padding = opt.padding;
  if (g.h + 2 * g.padding < g.kh || g.w + 2 * g.padding < g.kw) {
    throw ShapeError(std::string(op) + ": kernel larger than padded input");
  }
  g.ho = (g.h + 2 * g.padding - g.kh) / g.stride + 1;
  g.wo = (g.w + 2 * g.padding - g.kw) / g.stride + 1;
  return g;
}

Tensor conv_output_with_bias(const ConvGeometry& g, const std::optional<Var>& bias) {
  Tensor out({g.cout, g.ho, g.wo}, 0.0);
  if (bias) {
    const Tensor& bv = bias->value();
    if (bv.numel() != g.cout) throw ShapeError("conv: bias length mismatch");
    for (std::size_t o = 0; o < g.cout; ++o) {
      std::fill(out.data() + o * g.pixels(), out.data() + (o + 1) * g.pixels(), bv[o]);
    }
  }
  return out;
}

void conv_weight_bias_grads(const ConvGeometry& g, const BackwardContext& ctx, const std::vector<double>& col) {
  const double* go = ctx.grad_out.data();
  if (Tensor* gw = ctx.input_grads[1]) kernels::gemm_nt(g.cout, g.rows(), g.pixels(), go, col.data(), gw->data());
  if (ctx.input_grads.size() > 2 && ctx.input_grads.back()) {
    Tensor& gb = *ctx.input_grads.back();
    for (std::size_t o = 0; o < g.cout; ++o) {
      double acc = 0.0;
      for (std::size_t p = 0; p < g.pixels(); ++p) acc += go[o * g.pixels() + p];
      gb[o] += acc;
    }
  }
}

std::vector<double> col_grad(const ConvGeometry& g, const BackwardContext& ctx) {
  std::vector<double> gcol(g.rows() * g.pixels(), 0.0);
  kernels::gemm_tn(g.rows(), g.pixels(), g.cout, ctx.inputs[1]->data(), ctx.grad_out.data(), gcol.data());
  return gcol;
}

long tap_coord(std::size_t out_idx, std::size_t tap, const ConvGeometry& g) {
  return static_cast<long>(out_idx * g.stride + tap) - static_cast<long>(g.padding);
}

}  // namespace

Var conv2d(const Var& input, const Var& weight, const std::optional<Var>& bias, Conv2dOptions opt) {
  const Tensor& in = input.value();
  const ConvGeometry g = conv_geometry(in, weight.value(), opt, "conv2d");
  auto col = std::make_shared<std::vector<double>>(g.rows() * g.pixels(), 0.0);
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = col->data() + ((c * g.kh + i) * g.kw + j) * g.pixels();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long y = tap_coord(oy, i, g);
          if (y < 0 || y >= static_cast<long>(g.h)) continue;
          const double* src = in.data() + (c * g.h + static_cast<std::size_t>(y)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long x = tap_coord(ox, j, g);
            if (x >= 0 && x < static_cast<long>(g.w)) row[oy * g.wo + ox] = src[x];
          }
        }
      }
    }
  }
  Tensor out = conv_output_with_bias(g, bias);
  kernels::gemm_nn(g.cout, g.pixels(), g.rows(), weight.value().data(), col->data(), out.data());
  std::vector<Var> inputs{input, weight};
  if (bias) inputs.push_back(*bias);
  return tape_of(input).record(std::move(out), std::move(inputs), [g, col](const BackwardContext& ctx) {
    conv_weight_bias_grads(g, ctx, *col);
    Tensor* gin = ctx.input_grads[0];
    if (!gin) return;
    const std::vector<double> gcol = col_grad(g, ctx);
    for (std::size_t c = 0; c < g.cin; ++c) {
      for (std::size_t i = 0; i < g.kh; ++i) {
        for (std::size_t j = 0; j < g.kw; ++j) {
          const double* row = gcol.data() + ((c * g.kh + i) * g.kw + j) * g.pixels();
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long y = tap_coord(oy, i, g);
            if (y < 0 || y >= static_cast<long>(g.h)) continue;
            double* dst = gin->data() + (c * g.h + static_cast<std::size_t>(y)) * g.w;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long x = tap_coord(ox, j, g);
              if (x >= 0 && x < static_cast<long>(g.w)) dst[x] += row[oy * g.wo + ox];
            }
          }
        }
      }
    }
  });
}

namespace {

/// Bilinear footprint of one continuous sample location.
struct Sample {
  long y0 = 0;
  long x0 = 0;
  double ly = 0.0;
  double lx = 0.0;
};

Sample make_sample(double y, double x) {
  Sample s;
  const double fy = std::floor(y);
  const double fx = std::floor(x);
  s.y0 = static_cast<long>(fy);
  s.x0 = static_cast<long>(fx);
  s.ly = y - fy;
  s.lx = x - fx;
  return s;
}

inline double pixel(const double* plane, long h, long w, long y, long x) {
  return (y >= 0 && y < h && x >= 0 && x < w) ? plane[y * w + x] : 0.0;
}

inline double interpolate(const double* plane, long h, long w, const Sample& s) {
  const double v00 = pixel(plane, h, w, s.y0, s.x0);
  const double v01 = pixel(plane, h, w, s.y0, s.x0 + 1);
  const double v10 = pixel(plane, h, w, s.y0 + 1, s.x0);
  const double v11 = pixel(plane, h, w, s.y0 + 1, s.x0 + 1);
  return (1.0 - s.ly) * (1.0 - s.lx) * v00 + (1.0 - s.ly) * s.lx * v01 + s.ly * (1.0 - s.lx) * v10 +
         s.ly * s.lx * v11;
}

inline void scatter(double* plane, long h, long w, long y, long x, double v) {
  if (y >= 0 && y < h && x >= 0 && x < w) plane[y * w + x] += v;
}

}  // namespace

std::vector<double> bilinear_sample(const Tensor& map, double x, double y) {
  if (map.rank() != 3) throw ShapeError("bilinear_sample expects [C, H, W]");
  const long h = static_cast<long>(map.dim(1));
  const long w = static_cast<long>(map.dim(2));
  const Sample s = make_sample(y, x);
  std::vector<double> out(map.dim(0));
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = interpolate(map.data() + c * h * w, h, w, s);
  return out;
}

Var deform_conv2d(const Var& input, const Var& weight, const Var& offsets, const std::optional<Var>& bias,
                  Conv2dOptions opt) {
  const Tensor& in = input.value();
  const ConvGeometry g = conv_geometry(in, weight.value(), opt, "deform_conv2d");
  const Tensor& off = offsets.value();
  if (off.rank() != 3 || off.dim(0) != 2 * g.taps() || off.dim(1) != g.ho || off.dim(2) != g.wo) {
    throw ShapeError("deform_conv2d: offsets " + shape_string(off.shape()) + " do not match [" +
                     std::to_string(2 * g.taps()) + ", " + std::to_string(g.ho) + ", " + std::to_string(g.wo) + "]");
  }
  const long h = static_cast<long>(g.h);
  const long w = static_cast<long>(g.w);
  auto samples = std::make_shared<std::vector<Sample>>(g.taps() * g.pixels());
  for (std::size_t i = 0; i < g.kh; ++i) {
    for (std::size_t j = 0; j < g.kw; ++j) {
      const std::size_t k = i * g.kw + j;
      const double* dy = off.data() + (2 * k) * g.pixels();
      const double* dx = off.data() + (2 * k + 1) * g.pixels();
      for (std::size_t oy = 0; oy < g.ho; ++oy) {
        for (std::size_t ox = 0; ox < g.wo; ++ox) {
          const std::size_t p = oy * g.wo + ox;
          (*samples)[k * g.pixels() + p] = make_sample(static_cast<double>(tap_coord(oy, i, g)) + dy[p],
                                                       static_cast<double>(tap_coord(ox, j, g)) + dx[p]);
        }
      }
    }
  }
  auto col = std::make_shared<std::vector<double>>(g.rows() * g.pixels(), 0.0);
  for (std::size_t c = 0; c < g.cin; ++c) {
    const double* plane = in.data() + c * g.h * g.w;
    for (std::size_t k = 0; k < g.taps(); ++k) {
      double* row = col->data() + (c * g.taps() + k) * g.pixels();
      const Sample* s = samples->data() + k * g.pixels();
      for (std::size_t p = 0; p < g.pixels(); ++p) row[p] = interpolate(plane, h, w, s[p]);
    }
  }
  Tensor out = conv_output_with_bias(g, bias);
  kernels::gemm_nn(g.cout, g.pixels(), g.rows(), weight.value().data(), col->data(), out.data());
  std::vector<Var> inputs{input, weight, offsets};
  if (bias) inputs.push_back(*bias);
  return tape_of(input).record(std::move(out), std::move(inputs), [g, col, samples, h, w](const BackwardContext& ctx) {
    // Weight and bias gradients only depend on the sampled columns.
    const double* go = ctx.grad_out.data();
    if (Tensor* gw = ctx.input_grads[1]) kernels::gemm_nt(g.cout, g.rows(), g.pixels(), go, col->data(), gw->data());
    if (ctx.input_grads.size() > 3 && ctx.input_grads[3]) {
      Tensor& gb = *ctx.input_grads[3];
      for (std::size_t o = 0; o < g.cout; ++o) {
        double acc = 0.0;
        for (std::size_t p = 0; p < g.pixels(); ++p) acc += go[o * g.pixels() + p];
        gb[o] += acc;
      }
    }
    Tensor* gin = ctx.input_grads[0];
    Tensor* goff = ctx.input_grads[2];
    if (!gin && !goff) return;
    const std::vector<double> gcol = col_grad(g, ctx);
    const Tensor& in = *ctx.inputs[0];
    for (std::size_t c = 0; c < g.cin; ++c) {
      const double* plane = in.data() + c * g.h * g.w;
      double* gplane = gin ? gin->data() + c * g.h * g.w : nullptr;
      for (std::size_t k = 0; k < g.taps(); ++k) {
        const double* grow = gcol.data() + (c * g.taps() + k) * g.pixels();
        const Sample* s = samples->data() + k * g.pixels();
        double* gdy = goff ? goff->data() + (2 * k) * g.pixels() : nullptr;
        double* gdx = goff ? goff->data() + (2 * k + 1) * g.pixels() : nullptr;
        for (std::size_t p = 0; p < g.pixels(); ++p) {
          const double gv = grow[p];
          if (gv == 0.0) continue;
          const Sample& sp = s[p];
          if (gplane) {
            scatter(gplane, h, w, sp.y0, sp.x0, gv * (1.0 - sp.ly) * (1.0 - sp.lx));
            scatter(gplane, h, w, sp.y0, sp.x0 + 1, gv * (1.0 - sp.ly) * sp.lx);
            scatter(gplane, h, w, sp.y0 + 1, sp.x0, gv * sp.ly * (1.0 - sp.lx));
            scatter(gplane, h, w, sp.y0 + 1, sp.x0 + 1, gv * sp.ly * sp.lx);
          }
          if (goff) {
            const double v00 = pixel(plane, h, w, sp.y0, sp.x0);
            const double v01 = pixel(plane, h, w, sp.y0, sp.x0 + 1);
            const double v10 = pixel(plane, h, w, sp.y0 + 1, sp.x0);
            const double v11 = pixel(plane, h, w, sp.y0 + 1, sp.x0 + 1);
            gdy[p] += gv * ((1.0 - sp.lx) * (v10 - v00) + sp.lx * (v11 - v01));
            gdx[p] += gv * ((1.0 - sp.ly) * (v01 - v00) + sp.ly * (v11 - v10));
          }
        }
      }
    }
  });
}

}  // namespace assoc3d::ad
