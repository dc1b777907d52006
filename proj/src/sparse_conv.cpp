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

#include "assoc3d/sparse_conv.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "assoc3d/ops.hpp"
#include "kernels.hpp"

namespace assoc3d::sparse {

using ad::Shape;
using ad::ShapeError;
using ad::Tensor;

Extent output_extent(const Extent& in, const KernelSpec& spec) {
  if (spec.mode == ConvMode::kSubmanifold) return in;
  Extent out{};
  for (int d = 0; d < 3; ++d) {
    const long padded = static_cast<long>(in[d]) + 2L * spec.padding[d];
    if (padded < spec.size[d]) throw std::invalid_argument("sparse conv kernel larger than padded grid");
    out[d] = static_cast<std::size_t>((padded - spec.size[d]) / spec.stride[d] + 1);
  }
  return out;
}

std::size_t Rulebook::pair_count() const {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.size();
  return n;
}

std::uint64_t coord_signature(const std::vector<Coord>& coords) {
  std::uint64_t h = 1469598103934665603ULL ^ coords.size();
  for (const Coord& c : coords) {
    for (int v : c) {
      h ^= static_cast<std::uint32_t>(v);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

namespace {

bool inside(const Coord& c, const Extent& e) {
  for (int d = 0; d < 3; ++d) {
    if (c[d] < 0 || c[d] >= static_cast<int>(e[d])) return false;
  }
  return true;
}

}  // namespace

Rulebook build_rulebook(const std::vector<Coord>& coords, const Extent& extent, const KernelSpec& spec) {
  for (int d = 0; d < 3; ++d) {
    if (spec.stride[d] < 1) throw std::invalid_argument("sparse conv stride must be >= 1");
    if (spec.size[d] < 1) throw std::invalid_argument("sparse conv kernel size must be >= 1");
    if (spec.mode == ConvMode::kSubmanifold && spec.size[d] % 2 == 0) {
      throw std::invalid_argument("submanifold kernels must have odd size");
    }
  }
  Rulebook rb;
  rb.spec = spec;
  rb.in_extent = extent;
  rb.out_extent = output_extent(extent, spec);
  rb.in_count = coords.size();
  rb.in_signature = coord_signature(coords);
  rb.pairs.resize(static_cast<std::size_t>(spec.volume()));

  std::unordered_map<std::int64_t, std::uint32_t> index;
  index.reserve(coords.size() * 2);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (!inside(coords[i], extent)) throw std::invalid_argument("voxel coordinate outside the grid");
    index.emplace(voxel::linear_index(coords[i], extent), static_cast<std::uint32_t>(i));
  }

  if (spec.mode == ConvMode::kSubmanifold) {
    rb.out_coords = coords;
    const std::array<int, 3> half{spec.size[0] / 2, spec.size[1] / 2, spec.size[2] / 2};
    for (int kx = 0; kx < spec.size[0]; ++kx) {
      for (int ky = 0; ky < spec.size[1]; ++ky) {
        for (int kz = 0; kz < spec.size[2]; ++kz) {
          auto& list = rb.pairs[static_cast<std::size_t>(spec.tap(kx, ky, kz))];
          for (std::size_t o = 0; o < coords.size(); ++o) {
            const Coord n{coords[o][0] + kx - half[0], coords[o][1] + ky - half[1], coords[o][2] + kz - half[2]};
            if (!inside(n, extent)) continue;
            const auto it = index.find(voxel::linear_index(n, extent));
            if (it != index.end()) list.emplace_back(it->second, static_cast<std::uint32_t>(o));
          }
        }
      }
    }
    return rb;
  }

  // Strided: output o receives input i through tap k when o*stride - pad + k == i.
  struct RawPair {
    std::int64_t out_key;
    std::uint32_t in;
  };
  std::vector<std::vector<RawPair>> raw(rb.pairs.size());
  std::vector<std::int64_t> out_keys;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (int kx = 0; kx < spec.size[0]; ++kx) {
      for (int ky = 0; ky < spec.size[1]; ++ky) {
        for (int kz = 0; kz < spec.size[2]; ++kz) {
          const std::array<int, 3> k{kx, ky, kz};
          Coord o{};
          bool ok = true;
          for (int d = 0; d < 3 && ok; ++d) {
            const int num = coords[i][d] + spec.padding[d] - k[d];
            if (num < 0 || num % spec.stride[d] != 0) {
              ok = false;
            } else {
              o[d] = num / spec.stride[d];
            }
          }
          if (!ok || !inside(o, rb.out_extent)) continue;
          const std::int64_t key = voxel::linear_index(o, rb.out_extent);
          raw[static_cast<std::size_t>(spec.tap(kx, ky, kz))].push_back({key, static_cast<std::uint32_t>(i)});
          out_keys.push_back(key);
        }
      }
    }
  }
  std::sort(out_keys.begin(), out_keys.end());
  out_keys.erase(std::unique(out_keys.begin(), out_keys.end()), out_keys.end());
  std::unordered_map<std::int64_t, std::uint32_t> out_index;
  out_index.reserve(out_keys.size() * 2);
  rb.out_coords.reserve(out_keys.size());
  const auto& oe = rb.out_extent;
  for (std::size_t j = 0; j < out_keys.size(); ++j) {
    const std::int64_t key = out_keys[j];
    const auto z = static_cast<int>(key % static_cast<std::int64_t>(oe[2]));
    const auto y = static_cast<int>((key / static_cast<std::int64_t>(oe[2])) % static_cast<std::int64_t>(oe[1]));
    const auto x = static_cast<int>(key / (static_cast<std::int64_t>(oe[2]) * static_cast<std::int64_t>(oe[1])));
    rb.out_coords.push_back({x, y, z});
    out_index.emplace(key, static_cast<std::uint32_t>(j));
  }
  for (std::size_t k = 0; k < raw.size(); ++k) {
    for (const RawPair& p : raw[k]) rb.pairs[k].emplace_back(p.in, out_index.at(p.out_key));
  }
  return rb;
}

namespace {

struct Dims {
  std::size_t cin, cout, taps;
};

Dims check_weight(const Tensor& weight, std::size_t cin, const Rulebook& rb) {
  const auto& s = rb.spec.size;
  if (weight.rank() != 5 || weight.dim(2) != static_cast<std::size_t>(s[0]) ||
      weight.dim(3) != static_cast<std::size_t>(s[1]) || weight.dim(4) != static_cast<std::size_t>(s[2])) {
    throw ShapeError("sparse conv weight " + ad::shape_string(weight.shape()) + " does not match the kernel");
  }
  if (weight.dim(1) != cin) {
    throw ShapeError("sparse conv channel mismatch: features have " + std::to_string(cin) + ", weight expects " +
                     std::to_string(weight.dim(1)));
  }
  return {cin, weight.dim(0), static_cast<std::size_t>(rb.spec.volume())};
}

/// weight[:, :, k] as a contiguous [Cout, Cin] matrix.
std::vector<double> tap_matrix(const Tensor& weight, const Dims& d, std::size_t k) {
  std::vector<double> m(d.cout * d.cin);
  for (std::size_t o = 0; o < d.cout; ++o) {
    for (std::size_t c = 0; c < d.cin; ++c) m[o * d.cin + c] = weight[(o * d.cin + c) * d.taps + k];
  }
  return m;
}

Tensor forward_rows(const Tensor& feats, const Tensor& weight, const Tensor* bias, const Rulebook& rb) {
  if (feats.rank() != 2 || feats.dim(0) != rb.in_count) {
    throw std::logic_error("rulebook was built for a different input (" + std::to_string(rb.in_count) +
                           " sites, features have " + std::to_string(feats.rank() == 2 ? feats.dim(0) : 0) + ")");
  }
  const Dims d = check_weight(weight, feats.dim(1), rb);
  const std::size_t m = rb.out_coords.size();
  Tensor out({m, d.cout}, 0.0);
  if (bias && !bias->empty()) {
    if (bias->numel() != d.cout) throw ShapeError("sparse conv bias length mismatch");
    for (std::size_t r = 0; r < m; ++r) std::copy(bias->data(), bias->data() + d.cout, out.data() + r * d.cout);
  }
  std::vector<double> gathered;
  std::vector<double> partial;
  for (std::size_t k = 0; k < d.taps; ++k) {
    const auto& pairs = rb.pairs[k];
    if (pairs.empty()) continue;
    const auto wk = tap_matrix(weight, d, k);
    gathered.assign(pairs.size() * d.cin, 0.0);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      std::copy_n(feats.data() + pairs[p].first * d.cin, d.cin, gathered.data() + p * d.cin);
    }
    partial.assign(pairs.size() * d.cout, 0.0);
    kernels::gemm_nt(pairs.size(), d.cout, d.cin, gathered.data(), wk.data(), partial.data());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      double* dst = out.data() + pairs[p].second * d.cout;
      const double* src = partial.data() + p * d.cout;
      for (std::size_t o = 0; o < d.cout; ++o) dst[o] += src[o];
    }
  }
  return out;
}

SparseConvGrads backward_rows(const Tensor& grad_out, const Tensor& feats, const Tensor& weight, const Rulebook& rb,
                              bool want_input, bool want_weight) {
  if (feats.rank() != 2 || feats.dim(0) != rb.in_count) throw std::logic_error("stale rulebook for sparse conv backward");
  const Dims d = check_weight(weight, feats.dim(1), rb);
  if (grad_out.rank() != 2 || grad_out.dim(0) != rb.out_coords.size() || grad_out.dim(1) != d.cout) {
    throw ShapeError("sparse conv grad_out " + ad::shape_string(grad_out.shape()) + " does not match the output");
  }
  SparseConvGrads g;
  g.input = Tensor({rb.in_count, d.cin}, 0.0);
  g.weight = Tensor(weight.shape(), 0.0);
  g.bias = Tensor({d.cout}, 0.0);
  for (std::size_t r = 0; r < grad_out.dim(0); ++r) {
    for (std::size_t o = 0; o < d.cout; ++o) g.bias[o] += grad_out[r * d.cout + o];
  }
  std::vector<double> gout_rows;
  std::vector<double> in_rows;
  std::vector<double> buf;
  for (std::size_t k = 0; k < d.taps; ++k) {
    const auto& pairs = rb.pairs[k];
    if (pairs.empty()) continue;
    gout_rows.assign(pairs.size() * d.cout, 0.0);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      std::copy_n(grad_out.data() + pairs[p].second * d.cout, d.cout, gout_rows.data() + p * d.cout);
    }
    if (want_input) {
      const auto wk = tap_matrix(weight, d, k);
      buf.assign(pairs.size() * d.cin, 0.0);
      kernels::gemm_nn(pairs.size(), d.cin, d.cout, gout_rows.data(), wk.data(), buf.data());
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        double* dst = g.input.data() + pairs[p].first * d.cin;
        const double* src = buf.data() + p * d.cin;
        for (std::size_t c = 0; c < d.cin; ++c) dst[c] += src[c];
      }
    }
    if (want_weight) {
      in_rows.assign(pairs.size() * d.cin, 0.0);
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        std::copy_n(feats.data() + pairs[p].first * d.cin, d.cin, in_rows.data() + p * d.cin);
      }
      buf.assign(d.cout * d.cin, 0.0);
      kernels::gemm_tn(d.cout, d.cin, pairs.size(), gout_rows.data(), in_rows.data(), buf.data());
      for (std::size_t o = 0; o < d.cout; ++o) {
        for (std::size_t c = 0; c < d.cin; ++c) g.weight[(o * d.cin + c) * d.taps + k] += buf[o * d.cin + c];
      }
    }
  }
  return g;
}

}  // namespace

SparseVoxelTensor sparse_conv_forward(const SparseVoxelTensor& input, const Tensor& weight, const Tensor& bias,
                                      const Rulebook& rulebook) {
  if (input.size() != rulebook.in_count || coord_signature(input.coords) != rulebook.in_signature) {
    throw std::logic_error("rulebook was built for a different coordinate set");
  }
  SparseVoxelTensor out;
  out.coords = rulebook.out_coords;
  out.spatial_shape = rulebook.out_extent;
  out.features = forward_rows(input.features, weight, &bias, rulebook);
  return out;
}

SparseConvGrads sparse_conv_backward(const Tensor& grad_out, const SparseVoxelTensor& input, const Tensor& weight,
                                     const Rulebook& rulebook) {
  if (input.size() != rulebook.in_count || coord_signature(input.coords) != rulebook.in_signature) {
    throw std::logic_error("stale rulebook: built for a different coordinate set");
  }
  return backward_rows(grad_out, input.features, weight, rulebook, true, true);
}

ad::Var sparse_conv(const ad::Var& features, const ad::Var& weight, const std::optional<ad::Var>& bias,
                    std::shared_ptr<const Rulebook> rulebook) {
  const Tensor* bias_value = bias ? &bias->value() : nullptr;
  Tensor out = forward_rows(features.value(), weight.value(), bias_value, *rulebook);
  std::vector<ad::Var> inputs{features, weight};
  if (bias) inputs.push_back(*bias);
  return features.tape()->record(std::move(out), std::move(inputs), [rulebook](const ad::BackwardContext& ctx) {
    Tensor* gin = ctx.input_grads[0];
    Tensor* gw = ctx.input_grads[1];
    const SparseConvGrads g =
        backward_rows(ctx.grad_out, *ctx.inputs[0], *ctx.inputs[1], *rulebook, gin != nullptr, gw != nullptr);
    if (gin) {
      for (std::size_t i = 0; i < gin->numel(); ++i) (*gin)[i] += g.input[i];
    }
    if (gw) {
      for (std::size_t i = 0; i < gw->numel(); ++i) (*gw)[i] += g.weight[i];
    }
    if (ctx.input_grads.size() > 2 && ctx.input_grads[2]) {
      Tensor& gb = *ctx.input_grads[2];
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += g.bias[i];
    }
  });
}

namespace {

Tensor scatter_dense(const Tensor& feats, const std::vector<Coord>& coords, const Extent& e) {
  const std::size_t c_count = feats.rank() == 2 ? feats.dim(1) : 0;
  if (feats.rank() == 2 && feats.dim(0) != coords.size()) throw ShapeError("to_dense: feature/coord count mismatch");
  const std::size_t X = e[0], Y = e[1], Z = e[2];
  Tensor dense({c_count, Z, Y, X}, 0.0);
  for (std::size_t v = 0; v < coords.size(); ++v) {
    const auto& c = coords[v];
    const std::size_t site = (static_cast<std::size_t>(c[2]) * Y + static_cast<std::size_t>(c[1])) * X +
                             static_cast<std::size_t>(c[0]);
    for (std::size_t ch = 0; ch < c_count; ++ch) dense[ch * Z * Y * X + site] = feats[v * c_count + ch];
  }
  return dense;
}

}  // namespace

Tensor to_dense(const SparseVoxelTensor& input) {
  return scatter_dense(input.features, input.coords, input.spatial_shape);
}

ad::Var to_dense(const ad::Var& features, const std::vector<Coord>& coords, const Extent& extent) {
  Tensor dense = scatter_dense(features.value(), coords, extent);
  const std::size_t c_count = features.value().dim(1);
  const std::size_t volume = extent[0] * extent[1] * extent[2];
  return features.tape()->record(std::move(dense), {features}, [coords, extent, c_count, volume](
                                                                   const ad::BackwardContext& ctx) {
    Tensor& g = *ctx.input_grads[0];
    const std::size_t X = extent[0], Y = extent[1];
    for (std::size_t v = 0; v < coords.size(); ++v) {
      const auto& c = coords[v];
      const std::size_t site = (static_cast<std::size_t>(c[2]) * Y + static_cast<std::size_t>(c[1])) * X +
                               static_cast<std::size_t>(c[0]);
      for (std::size_t ch = 0; ch < c_count; ++ch) g[v * c_count + ch] += ctx.grad_out[ch * volume + site];
    }
  });
}

SparseVoxelTensor to_sparse(const Tensor& dense) {
  if (dense.rank() != 4) throw ShapeError("to_sparse expects [C, Z, Y, X]");
  const std::size_t C = dense.dim(0), Z = dense.dim(1), Y = dense.dim(2), X = dense.dim(3);
  const std::size_t volume = Z * Y * X;
  SparseVoxelTensor out;
  out.spatial_shape = {X, Y, Z};
  std::vector<double> rows;
  for (std::size_t x = 0; x < X; ++x) {
    for (std::size_t y = 0; y < Y; ++y) {
      for (std::size_t z = 0; z < Z; ++z) {
        const std::size_t site = (z * Y + y) * X + x;
        bool active = false;
        for (std::size_t c = 0; c < C && !active; ++c) active = dense[c * volume + site] != 0.0;
        if (!active) continue;
        out.coords.push_back({static_cast<int>(x), static_cast<int>(y), static_cast<int>(z)});
        for (std::size_t c = 0; c < C; ++c) rows.push_back(dense[c * volume + site]);
      }
    }
  }
  out.features = Tensor({out.coords.size(), C}, std::move(rows));
  return out;
}

Tensor squeeze_height(const Tensor& dense) {
  if (dense.rank() != 4) throw ShapeError("squeeze_height expects [C, Z, Y, X]");
  return dense.reshaped({dense.dim(0) * dense.dim(1), dense.dim(2), dense.dim(3)});
}

ad::Var squeeze_height(const ad::Var& dense) {
  const Shape& s = dense.shape();
  if (s.size() != 4) throw ShapeError("squeeze_height expects [C, Z, Y, X]");
  return ad::reshape(dense, {s[0] * s[1], s[2], s[3]});
}

}  // namespace assoc3d::sparse
