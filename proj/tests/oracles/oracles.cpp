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

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace oracle {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Inclusive input range of output index o along one axis.
bool input_index(int o, int k, int stride, int pad, int extent, int* out) {
  const int i = o * stride - pad + k;
  if (i < 0 || i >= extent) return false;
  *out = i;
  return true;
}

int out_extent(std::size_t n, int k, int s, int p) {
  return (static_cast<int>(n) + 2 * p - k) / s + 1;
}

}  // namespace

Volume dense_conv3d(const Volume& in, const std::vector<double>& weight, std::size_t cout,
                    const std::vector<double>& bias, const Conv3dGeometry& g) {
  const int ox = out_extent(in.x, g.kernel[0], g.stride[0], g.padding[0]);
  const int oy = out_extent(in.y, g.kernel[1], g.stride[1], g.padding[1]);
  const int oz = out_extent(in.z, g.kernel[2], g.stride[2], g.padding[2]);
  Volume out(cout, static_cast<std::size_t>(ox), static_cast<std::size_t>(oy), static_cast<std::size_t>(oz));
  const int kx = g.kernel[0], ky = g.kernel[1], kz = g.kernel[2];
  for (std::size_t co = 0; co < cout; ++co) {
    for (int x = 0; x < ox; ++x) {
      for (int y = 0; y < oy; ++y) {
        for (int z = 0; z < oz; ++z) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (std::size_t ci = 0; ci < in.c; ++ci) {
            for (int a = 0; a < kx; ++a) {
              int ix;
              if (!input_index(x, a, g.stride[0], g.padding[0], static_cast<int>(in.x), &ix)) continue;
              for (int b = 0; b < ky; ++b) {
                int iy;
                if (!input_index(y, b, g.stride[1], g.padding[1], static_cast<int>(in.y), &iy)) continue;
                for (int c = 0; c < kz; ++c) {
                  int iz;
                  if (!input_index(z, c, g.stride[2], g.padding[2], static_cast<int>(in.z), &iz)) continue;
                  const std::size_t widx = (((co * in.c + ci) * kx + a) * ky + b) * kz + c;
                  acc += weight[widx] * in.at(ci, ix, iy, iz);
                }
              }
            }
          }
          out.at(co, x, y, z) = acc;
        }
      }
    }
  }
  return out;
}

std::vector<std::array<int, 3>> dense_support(const std::vector<std::array<int, 3>>& active,
                                              const std::array<std::size_t, 3>& extent, const Conv3dGeometry& g) {
  // Convolve the occupancy indicator with an all-ones kernel.
  Volume occ(1, extent[0], extent[1], extent[2]);
  for (const auto& a : active) occ.at(0, a[0], a[1], a[2]) = 1.0;
  const std::size_t vol = static_cast<std::size_t>(g.kernel[0] * g.kernel[1] * g.kernel[2]);
  const Volume hits = dense_conv3d(occ, std::vector<double>(vol, 1.0), 1, {}, g);
  std::vector<std::array<int, 3>> out;
  for (std::size_t x = 0; x < hits.x; ++x) {
    for (std::size_t y = 0; y < hits.y; ++y) {
      for (std::size_t z = 0; z < hits.z; ++z) {
        if (hits.at(0, x, y, z) > 0.5) out.push_back({int(x), int(y), int(z)});
      }
    }
  }
  return out;
}

std::vector<double> conv2d_loops(const std::vector<double>& input, std::size_t cin, std::size_t h, std::size_t w,
                                 const std::vector<double>& weight, std::size_t cout, std::size_t kh, std::size_t kw,
                                 std::size_t stride, std::size_t padding) {
  const std::size_t ho = (h + 2 * padding - kh) / stride + 1;
  const std::size_t wo = (w + 2 * padding - kw) / stride + 1;
  std::vector<double> out(cout * ho * wo, 0.0);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x) {
        double acc = 0.0;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          for (std::size_t i = 0; i < kh; ++i) {
            for (std::size_t j = 0; j < kw; ++j) {
              const long iy = static_cast<long>(y * stride + i) - static_cast<long>(padding);
              const long ix = static_cast<long>(x * stride + j) - static_cast<long>(padding);
              if (iy < 0 || ix < 0 || iy >= long(h) || ix >= long(w)) continue;
              acc += weight[((co * cin + ci) * kh + i) * kw + j] * input[(ci * h + iy) * w + ix];
            }
          }
        }
        out[(co * ho + y) * wo + x] = acc;
      }
    }
  }
  return out;
}

double bilinear(const std::vector<double>& map, std::size_t h, std::size_t w, std::size_t c, double x, double y) {
  const double x0 = std::floor(x), y0 = std::floor(y);
  const double fx = x - x0, fy = y - y0;
  auto px = [&](double yy, double xx) {
    if (yy < 0 || xx < 0 || yy > double(h - 1) || xx > double(w - 1)) return 0.0;
    return map[(c * h + static_cast<std::size_t>(yy)) * w + static_cast<std::size_t>(xx)];
  };
  return (1 - fy) * (1 - fx) * px(y0, x0) + (1 - fy) * fx * px(y0, x0 + 1) + fy * (1 - fx) * px(y0 + 1, x0) +
         fy * fx * px(y0 + 1, x0 + 1);
}

std::vector<double> deform_conv2d_loops(const std::vector<double>& input, std::size_t cin, std::size_t h,
                                        std::size_t w, const std::vector<double>& weight, std::size_t cout,
                                        std::size_t kh, std::size_t kw, const std::vector<double>& offsets,
                                        std::size_t stride, std::size_t padding) {
  const std::size_t ho = (h + 2 * padding - kh) / stride + 1;
  const std::size_t wo = (w + 2 * padding - kw) / stride + 1;
  std::vector<double> out(cout * ho * wo, 0.0);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x) {
        double acc = 0.0;
        for (std::size_t i = 0; i < kh; ++i) {
          for (std::size_t j = 0; j < kw; ++j) {
            const std::size_t k = i * kw + j;
            const double dy = offsets[((2 * k) * ho + y) * wo + x];
            const double dx = offsets[((2 * k + 1) * ho + y) * wo + x];
            const double sy = double(y * stride + i) - double(padding) + dy;
            const double sx = double(x * stride + j) - double(padding) + dx;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              acc += weight[((co * cin + ci) * kh + i) * kw + j] * bilinear(input, h, w, ci, sx, sy);
            }
          }
        }
        out[(co * ho + y) * wo + x] = acc;
      }
    }
  }
  return out;
}

bool inside_box(const Point& p, const Box3D& b, double tol) {
  const double dx = p.x - b.cx, dy = p.y - b.cy;
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return std::abs(u) <= b.l / 2 + tol && std::abs(v) <= b.w / 2 + tol && std::abs(p.z - b.cz) <= b.h / 2 + tol;
}

double monte_carlo_iou_bev(const Box3D& a, const Box3D& b, std::size_t samples, std::uint64_t seed) {
  const double ra = 0.5 * std::hypot(a.l, a.w), rb = 0.5 * std::hypot(b.l, b.w);
  // The intersection lies inside both circumscribed squares.
  const double x0 = std::max(a.cx - ra, b.cx - rb), x1 = std::min(a.cx + ra, b.cx + rb);
  const double y0 = std::max(a.cy - ra, b.cy - rb), y1 = std::min(a.cy + ra, b.cy + rb);
  if (x1 <= x0 || y1 <= y0) return 0.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  Box3D fa = a, fb = b;
  fa.cz = fb.cz = 0.0;
  std::size_t both = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const Point p{ux(rng), uy(rng), 0.0, 0.0};
    both += inside_box(p, fa, 0.0) && inside_box(p, fb, 0.0);
  }
  const double inter = (x1 - x0) * (y1 - y0) * double(both) / double(samples);
  return inter / (a.l * a.w + b.l * b.w - inter);
}

double avg_closest_loops(const PointCloud& a, const PointCloud& b) {
  double total = 0.0;
  for (const auto& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b) {
      best = std::min(best, std::sqrt((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) + (p.z - q.z) * (p.z - q.z)));
    }
    total += best;
  }
  return total / double(a.size());
}

std::vector<VoxelRef> voxelize_map(const PointCloud& cloud, const std::array<double, 3>& lo,
                                   const std::array<double, 3>& hi, const std::array<double, 3>& size,
                                   std::size_t cap) {
  struct Acc {
    std::array<double, 3> sum{0, 0, 0};
    std::size_t n = 0;
  };
  std::map<std::array<int, 3>, Acc> cells;
  for (const auto& p : cloud) {
    const double v[3] = {p.x, p.y, p.z};
    std::array<int, 3> key{};
    bool ok = true;
    for (int d = 0; d < 3; ++d) {
      if (!(v[d] >= lo[d] && v[d] < hi[d])) ok = false;
      key[d] = static_cast<int>(std::floor((v[d] - lo[d]) / size[d]));
    }
    if (!ok) continue;
    Acc& acc = cells[key];
    if (acc.n >= cap) continue;
    for (int d = 0; d < 3; ++d) acc.sum[d] += v[d];
    ++acc.n;
  }
  std::vector<VoxelRef> out;
  for (const auto& [key, acc] : cells) {
    out.push_back({key, {acc.sum[0] / double(acc.n), acc.sum[1] / double(acc.n), acc.sum[2] / double(acc.n)}});
  }
  return out;
}

std::vector<std::vector<std::pair<std::size_t, std::size_t>>> rank_candidates(const std::vector<BankEntry>& entries,
                                                                              int groups, double top_percent,
                                                                              std::size_t min_points) {
  std::vector<std::vector<BankEntry>> bins(static_cast<std::size_t>(groups));
  const double width = 2 * kPi / groups;
  for (const auto& e : entries) {
    double yaw = std::fmod(e.yaw + kPi, 2 * kPi);
    if (yaw < 0) yaw += 2 * kPi;
    const int b = std::min(groups - 1, static_cast<int>(std::floor(yaw / width)));
    bins[static_cast<std::size_t>(b)].push_back(e);
  }
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> out(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    auto& v = bins[b];
    if (v.empty()) continue;
    std::sort(v.begin(), v.end(), [](const BankEntry& x, const BankEntry& y) {
      if (x.count != y.count) return x.count > y.count;
      if (x.scene != y.scene) return x.scene < y.scene;
      return x.object < y.object;
    });
    // Smallest integer k with 100 k >= K n.
    std::size_t k = 0;
    while (100.0 * double(k) < top_percent * double(v.size()) - 1e-9) ++k;
    k = std::clamp<std::size_t>(k, 1, v.size());
    for (std::size_t i = 0; i < k; ++i) {
      if (v[i].count >= min_points) out[b].push_back({v[i].scene, v[i].object});
    }
  }
  return out;
}

MatchRef brute_force_match(const Box3D& target, const PointCloud& target_points,
                           const std::optional<std::pair<std::size_t, std::size_t>>& target_key,
                           const std::vector<CandidateRef>& candidates, int groups, bool symmetric) {
  double yaw = std::fmod(target.yaw + kPi, 2 * kPi);
  if (yaw < 0) yaw += 2 * kPi;
  const int tbin = std::min(groups - 1, static_cast<int>(std::floor(yaw / (2 * kPi / groups))));
  // Circular bin distance of every candidate; keep the closest bin, lower index on ties.
  int best_bin = -1, best_sep = groups + 1;
  for (const auto& c : candidates) {
    const int d = std::abs(c.bin - tbin);
    const int sep = std::min(d, groups - d);
    if (sep < best_sep || (sep == best_sep && c.bin < best_bin)) {
      best_sep = sep;
      best_bin = c.bin;
    }
  }
  MatchRef ref;
  ref.bin = best_bin;
  bool found = false;
  double best = 0.0;
  const double cs = std::cos(target.yaw), sn = std::sin(target.yaw);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.bin != best_bin) continue;
    if (target_key && c.key == *target_key) return {i, best_bin, 0.0, true};
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.bin != best_bin) continue;
    if (target_points.empty()) return {i, best_bin, 0.0, false};
    PointCloud posed;
    for (const auto& p : c.canonical) {
      posed.push_back({cs * p.x - sn * p.y + target.cx, sn * p.x + cs * p.y + target.cy, p.z + target.cz, p.intensity});
    }
    double d = avg_closest_loops(target_points, posed);
    if (symmetric) d = 0.5 * (d + avg_closest_loops(posed, target_points));
    if (!found || d < best) {
      found = true;
      best = d;
      ref.index = i;
      ref.distance = d;
    }
  }
  return ref;
}

std::vector<std::size_t> reference_nms(const std::vector<double>& scores,
                                       const std::vector<std::vector<double>>& iou, double threshold) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool drop = false;
    for (std::size_t k : kept) drop = drop || iou[i][k] > threshold;
    if (!drop) kept.push_back(i);
  }
  return kept;
}

std::vector<int> reference_labels(const std::vector<std::vector<double>>& iou, double pos, double neg) {
  const std::size_t na = iou.size();
  std::vector<int> labels(na, -1);
  for (std::size_t a = 0; a < na; ++a) {
    double m = 0.0;
    for (double v : iou[a]) m = std::max(m, v);
    if (m >= pos) labels[a] = 1;
    else if (m < neg) labels[a] = 0;
  }
  const std::size_t ng = na ? iou[0].size() : 0;
  for (std::size_t g = 0; g < ng; ++g) {
    double m = 0.0;
    std::size_t arg = 0;
    for (std::size_t a = 0; a < na; ++a) {
      if (iou[a][g] > m) {
        m = iou[a][g];
        arg = a;
      }
    }
    if (m > 0.0) labels[arg] = 1;
  }
  return labels;
}

double focal_loss_loop(const std::vector<double>& logits, const std::vector<int>& labels, double alpha, double gamma) {
  double total = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (labels[i] < 0) continue;
    const double p = 1.0 / (1.0 + std::exp(-logits[i]));
    const double pt = labels[i] == 1 ? p : 1.0 - p;
    const double at = labels[i] == 1 ? alpha : 1.0 - alpha;
    total += -at * std::pow(1.0 - pt, gamma) * std::log(pt);
    positives += labels[i] == 1;
  }
  return total / double(std::max<std::size_t>(1, positives));
}

std::array<double, 2> lattice_center(std::size_t row, std::size_t col, double x_min, double y_min, double pitch_x,
                                     double pitch_y) {
  return {x_min + (double(col) + 0.5) * pitch_x, y_min + (double(row) + 0.5) * pitch_y};
}

std::vector<double> offset_length_loop(const std::vector<double>& offsets, std::size_t n, std::size_t h,
                                       std::size_t w) {
  std::vector<double> out(h * w, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double a = offsets[((2 * k) * h + y) * w + x];
        const double b = offsets[((2 * k + 1) * h + y) * w + x];
        s += std::sqrt(a * a + b * b);
      }
      out[y * w + x] = s / double(n);
    }
  }
  return out;
}

double association_loss_loop(const std::vector<double>& fp, const std::vector<double>& fc, std::size_t c,
                             std::size_t h, std::size_t w, const std::vector<double>& reweight,
                             const std::vector<double>& fg) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (fg[y * w + x] == 0.0) continue;
      ++count;
      double sq = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        const double d = fp[(k * h + y) * w + x] - fc[(k * h + y) * w + x];
        sq += d * d;
      }
      total += std::sqrt(sq) * (1.0 + reweight[y * w + x]);
    }
  }
  return count ? total / double(count) : 0.0;
}

std::vector<double> foreground_raster(const std::vector<Box3D>& boxes, const PointCloud& points, double x_min,
                                      double y_min, double cell_x, double cell_y, std::size_t h, std::size_t w) {
  std::vector<double> mask(h * w, 0.0);
  for (const auto& p : points) {
    bool in = false;
    for (const auto& b : boxes) in = in || inside_box(p, b);
    if (!in) continue;
    const long col = static_cast<long>(std::floor((p.x - x_min) / cell_x));
    const long row = static_cast<long>(std::floor((p.y - y_min) / cell_y));
    if (col < 0 || row < 0 || col >= long(w) || row >= long(h)) continue;
    mask[std::size_t(row) * w + std::size_t(col)] = 1.0;
  }
  return mask;
}

}  // namespace oracle
