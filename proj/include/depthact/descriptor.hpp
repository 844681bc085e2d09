// Copyright 2026 The depthact Authors
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

// Local description of interest points. Motion-based points get a
// depth-adaptive, multi-scale 3-D local steering kernel; shape-based
// points get a 4-D spatial-temporal vector relative to the point set's
// component-wise minimum.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "depthact/binio.hpp"
#include "depthact/depthio.hpp"
#include "depthact/error.hpp"
#include "depthact/stip.hpp"

namespace depthact {

struct DescriptorParams {
  std::vector<int> scales{7};
  int probe_radius = 3;
  double h = 1.0;
  int cov_window = 1;
  double reg_lambda = 1e-3;

  void validate() const {
    require(!scales.empty(), ErrorCode::kInvalidArgument, "at least one scale required");
    for (int r : scales) require(r >= 1, ErrorCode::kInvalidArgument, "scales must be >= 1");
    require(probe_radius >= 0, ErrorCode::kInvalidArgument, "probe radius must be >= 0");
    require(h > 0.0, ErrorCode::kInvalidArgument, "h must be positive");
    require(cov_window >= 0, ErrorCode::kInvalidArgument, "cov_window must be >= 0");
    require(reg_lambda > 0.0, ErrorCode::kInvalidArgument, "reg_lambda must be positive");
  }
};

// Cubic (x, y, t) volume; x varies fastest, then y, then t.
struct Cube {
  int side = 0;
  std::vector<double> v;

  Cube() = default;
  explicit Cube(int s, double fill = 0.0)
      : side(s), v(static_cast<std::size_t>(s) * static_cast<std::size_t>(s) * static_cast<std::size_t>(s), fill) {}

  std::size_t index(int x, int y, int t) const {
    return (static_cast<std::size_t>(t) * static_cast<std::size_t>(side) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(side) +
           static_cast<std::size_t>(x);
  }
  double& operator()(int x, int y, int t) { return v[index(x, y, t)]; }
  double operator()(int x, int y, int t) const { return v[index(x, y, t)]; }
};

struct LskDescriptor {
  int scale_index = 0;
  std::vector<double> values;
};

using StvDescriptor = std::array<double, 4>;

// ---------------------------------------------------------------------------
// Scale adaptation

// Mean of the nonzero depths in the (2*probe+1)^3 cuboid around p, clipped
// to the sequence; nullopt when every value is zero (the point is dropped).
inline std::optional<double> mean_foreground_depth(const DepthSequence& seq, const Stip& p, int probe_radius) {
  require(probe_radius >= 0, ErrorCode::kInvalidArgument, "probe radius must be >= 0");
  double sum = 0.0;
  std::size_t count = 0;
  for (int f = std::max(0, p.f - probe_radius); f <= std::min(seq.size() - 1, p.f + probe_radius); ++f) {
    const auto& frame = seq.frames[static_cast<std::size_t>(f)];
    for (int y = std::max(0, p.y - probe_radius); y <= std::min(frame.height - 1, p.y + probe_radius); ++y) {
      for (int x = std::max(0, p.x - probe_radius); x <= std::min(frame.width - 1, p.x + probe_radius); ++x) {
        const auto z = frame(x, y);
        if (z == 0) continue;
        sum += z;
        ++count;
      }
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

inline double adaptive_scale(double z_bar0, double z_bar, double r) {
  require(z_bar0 > 0.0 && z_bar > 0.0, ErrorCode::kInvalidArgument, "depths must be positive");
  return (z_bar0 / z_bar) * r;
}

inline constexpr double kMinAdaptiveScale = 0.5;

// Samples a cube of half-width r_hat around p onto a (2r+1)^3 grid by
// trilinear interpolation, replicating border values outside the sequence.
inline Cube extract_cuboid(const DepthSequence& seq, const Stip& p, double r_hat, int r) {
  require(r >= 1, ErrorCode::kInvalidArgument, "cube radius must be >= 1");
  r_hat = std::max(r_hat, kMinAdaptiveScale);
  const int w = seq.width(), h = seq.height(), n = seq.size();
  const int side = 2 * r + 1;
  const double step = r_hat / r;
  auto axis = [step](int c, int i, int limit, int& lo, int& hi, double& frac) {
    double pos = c + step * i;
    pos = std::clamp(pos, 0.0, static_cast<double>(limit - 1));
    lo = static_cast<int>(std::floor(pos));
    hi = std::min(lo + 1, limit - 1);
    frac = pos - lo;
  };
  Cube cube(side);
  for (int k = -r; k <= r; ++k) {
    int t0, t1;
    double ft;
    axis(p.f, k, n, t0, t1, ft);
    const auto& fa = seq.frames[static_cast<std::size_t>(t0)];
    const auto& fb = seq.frames[static_cast<std::size_t>(t1)];
    for (int j = -r; j <= r; ++j) {
      int y0, y1;
      double fy;
      axis(p.y, j, h, y0, y1, fy);
      for (int i = -r; i <= r; ++i) {
        int x0, x1;
        double fx;
        axis(p.x, i, w, x0, x1, fx);
        auto bilinear = [&](const DepthFrame& fr) {
          const double top = fr(x0, y0) * (1.0 - fx) + fr(x1, y0) * fx;
          const double bottom = fr(x0, y1) * (1.0 - fx) + fr(x1, y1) * fx;
          return top * (1.0 - fy) + bottom * fy;
        };
        cube(i + r, j + r, k + r) = bilinear(fa) * (1.0 - ft) + bilinear(fb) * ft;
      }
    }
  }
  return cube;
}

// Zero mean, unit standard deviation; a constant cube becomes all zeros.
inline Cube normalize_cube(Cube cube) {
  if (cube.v.empty()) return cube;
  double mean = 0.0;
  for (double x : cube.v) mean += x;
  mean /= static_cast<double>(cube.v.size());
  double var = 0.0;
  for (double x : cube.v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(cube.v.size());
  const double sd = std::sqrt(var);
  for (double& x : cube.v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
  return cube;
}

// ---------------------------------------------------------------------------
// 3-D local steering kernel

// Central differences with replicated borders.
inline std::array<Cube, 3> gradients(const Cube& c) {
  const int s = c.side;
  std::array<Cube, 3> g{Cube(s), Cube(s), Cube(s)};
  auto cl = [s](int i) { return std::clamp(i, 0, s - 1); };
  for (int t = 0; t < s; ++t)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        g[0](x, y, t) = 0.5 * (c(cl(x + 1), y, t) - c(cl(x - 1), y, t));
        g[1](x, y, t) = 0.5 * (c(x, cl(y + 1), t) - c(x, cl(y - 1), t));
        g[2](x, y, t) = 0.5 * (c(x, y, cl(t + 1)) - c(x, y, cl(t - 1)));
      }
  return g;
}

namespace detail {

// Mean over the in-bounds part of a (2w+1)^3 window, separably.
inline Cube box_mean(const Cube& in, int w) {
  const int s = in.side;
  Cube a(s), b(s);
  auto count = [s, w](int i) { return std::min(s - 1, i + w) - std::max(0, i - w) + 1; };
  for (int t = 0; t < s; ++t)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        double acc = 0.0;
        for (int q = std::max(0, x - w); q <= std::min(s - 1, x + w); ++q) acc += in(q, y, t);
        a(x, y, t) = acc;
      }
  for (int t = 0; t < s; ++t)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        double acc = 0.0;
        for (int q = std::max(0, y - w); q <= std::min(s - 1, y + w); ++q) acc += a(x, q, t);
        b(x, y, t) = acc;
      }
  for (int t = 0; t < s; ++t)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        double acc = 0.0;
        for (int q = std::max(0, t - w); q <= std::min(s - 1, t + w); ++q) acc += b(x, y, q);
        a(x, y, t) = acc / (count(x) * count(y) * count(t));
      }
  return a;
}

}  // namespace detail

inline LskDescriptor lsk3d(const Cube& cube, const DescriptorParams& params, int scale_index = 0) {
  require(cube.side >= 3, ErrorCode::kInvalidArgument, "cube side must be >= 3");
  require(params.h > 0.0 && params.reg_lambda > 0.0 && params.cov_window >= 0, ErrorCode::kInvalidArgument,
          "bad kernel parameters");
  const auto g = gradients(cube);
  const int s = cube.side;
  // Unique entries of g g^T: xx, yy, tt, xy, xt, yt.
  std::array<Cube, 6> outer{Cube(s), Cube(s), Cube(s), Cube(s), Cube(s), Cube(s)};
  for (std::size_t i = 0; i < cube.v.size(); ++i) {
    const double gx = g[0].v[i], gy = g[1].v[i], gt = g[2].v[i];
    outer[0].v[i] = gx * gx;
    outer[1].v[i] = gy * gy;
    outer[2].v[i] = gt * gt;
    outer[3].v[i] = gx * gy;
    outer[4].v[i] = gx * gt;
    outer[5].v[i] = gy * gt;
  }
  for (auto& o : outer) o = detail::box_mean(o, params.cov_window);

  const int c = s / 2;
  const double two_h2 = 2.0 * params.h * params.h;
  LskDescriptor out{scale_index, std::vector<double>(cube.v.size())};
  double total = 0.0;
  for (int t = 0; t < s; ++t)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        const auto i = cube.index(x, y, t);
        const double cxx = outer[0].v[i] + params.reg_lambda, cyy = outer[1].v[i] + params.reg_lambda,
                     ctt = outer[2].v[i] + params.reg_lambda;
        const double cxy = outer[3].v[i], cxt = outer[4].v[i], cyt = outer[5].v[i];
        const double det = cxx * (cyy * ctt - cyt * cyt) - cxy * (cxy * ctt - cyt * cxt) + cxt * (cxy * cyt - cyy * cxt);
        const double ux = x - c, uy = y - c, ut = t - c;
        const double quad = cxx * ux * ux + cyy * uy * uy + ctt * ut * ut +
                            2.0 * (cxy * ux * uy + cxt * ux * ut + cyt * uy * ut);
        const double k = std::sqrt(std::max(det, 0.0)) * std::exp(-quad / two_h2);
        out.values[i] = k;
        total += k;
      }
  for (double& v : out.values) v /= total;
  return out;
}

// ---------------------------------------------------------------------------
// Multi-scale description of a point set

struct MultiScaleDescriptors {
  // Indices into the input point list that survived the depth probe.
  std::vector<std::size_t> kept;
  // Mean probe depth of each kept point.
  std::vector<double> depths;
  // per_scale[l][i] describes kept[i] at scales[l].
  std::vector<std::vector<std::vector<double>>> per_scale;
};

inline MultiScaleDescriptors m3dlsk(const DepthSequence& seq, std::span<const Stip> stips,
                                    const DescriptorParams& params, double z_bar0) {
  params.validate();
  require(z_bar0 > 0.0, ErrorCode::kInvalidArgument, "z_bar0 must be positive");
  MultiScaleDescriptors out;
  out.per_scale.resize(params.scales.size());
  for (std::size_t i = 0; i < stips.size(); ++i) {
    const auto z = mean_foreground_depth(seq, stips[i], params.probe_radius);
    if (!z) continue;
    out.kept.push_back(i);
    out.depths.push_back(*z);
    for (std::size_t l = 0; l < params.scales.size(); ++l) {
      const int r = params.scales[l];
      const double r_hat = adaptive_scale(z_bar0, *z, r);
      const auto cube = normalize_cube(extract_cuboid(seq, stips[i], r_hat, r));
      out.per_scale[l].push_back(lsk3d(cube, params, static_cast<int>(l)).values);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spatial-temporal vectors

inline std::vector<StvDescriptor> stv(std::span<const Stip> stips) {
  require(!stips.empty(), ErrorCode::kEmptyInput, "no shape points to describe");
  std::array<int, 4> lo{stips[0].x, stips[0].y, stips[0].z, stips[0].f};
  for (const auto& s : stips) {
    lo[0] = std::min(lo[0], s.x);
    lo[1] = std::min(lo[1], s.y);
    lo[2] = std::min(lo[2], s.z);
    lo[3] = std::min(lo[3], s.f);
  }
  std::array<int, 4> span{0, 0, 0, 0};
  for (const auto& s : stips) {
    span[0] = std::max(span[0], s.x - lo[0]);
    span[1] = std::max(span[1], s.y - lo[1]);
    span[2] = std::max(span[2], s.z - lo[2]);
    span[3] = std::max(span[3], s.f - lo[3]);
  }
  std::vector<StvDescriptor> out;
  out.reserve(stips.size());
  for (const auto& s : stips) {
    const std::array<int, 4> raw{s.x - lo[0], s.y - lo[1], s.z - lo[2], s.f - lo[3]};
    StvDescriptor d{};
    for (std::size_t k = 0; k < 4; ++k) d[k] = span[k] > 0 ? static_cast<double>(raw[k]) / span[k] : 0.0;
    out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// DESC dump

inline std::string encode_descriptors(std::span<const std::vector<double>> rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  binio::Writer w;
  w.bytes("DESC");
  w.put<std::uint16_t>(1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(rows.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
  for (const auto& row : rows) {
    require(row.size() == dim, ErrorCode::kDimensionMismatch, "descriptor rows differ in length");
    for (double v : row) w.put<float>(static_cast<float>(v));
  }
  return w.buffer();
}

inline std::vector<std::vector<double>> decode_descriptors(std::string_view bytes) {
  require(bytes.substr(0, 4) == "DESC", ErrorCode::kMalformedHeader, "missing DESC magic");
  binio::Reader r(bytes.substr(4));
  require(r.get<std::uint16_t>() == 1, ErrorCode::kMalformedHeader, "unsupported DESC version");
  const auto count = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint32_t>();
  require(r.remaining() == static_cast<std::size_t>(count) * dim * 4, ErrorCode::kTruncatedPayload,
          "DESC payload size mismatch");
  std::vector<std::vector<double>> rows(count, std::vector<double>(dim));
  for (auto& row : rows)
    for (auto& v : row) v = r.get<float>();
  return rows;
}

}  // namespace depthact
