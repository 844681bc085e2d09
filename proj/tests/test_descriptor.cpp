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

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "depthact/descriptor.hpp"
#include "depthact/rng.hpp"
#include "test_util.hpp"

namespace depthact {
namespace {

using testing::fails_with;

DepthSequence linear_field(int w, int h, int n, double a, double b, double c, double d) {
  DepthSequence s;
  for (int f = 0; f < n; ++f) {
    DepthFrame fr(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) fr(x, y) = static_cast<std::uint16_t>(a * x + b * y + c * f + d);
    s.frames.push_back(fr);
  }
  return s;
}

Cube random_cube(Rng& rng, int side) {
  Cube c(side);
  for (auto& v : c.v) v = rng.normal();
  return c;
}

// Direct evaluation: explicit window sums, Eigen determinant and quadratic
// form.
std::vector<double> lsk_oracle(const Cube& cube, const DescriptorParams& p) {
  const int s = cube.side, c = s / 2, w = p.cov_window;
  auto at = [&](int x, int y, int t) {
    return cube(std::clamp(x, 0, s - 1), std::clamp(y, 0, s - 1), std::clamp(t, 0, s - 1));
  };
  auto grad = [&](int x, int y, int t) {
    return Eigen::Vector3d(0.5 * (at(x + 1, y, t) - at(x - 1, y, t)), 0.5 * (at(x, y + 1, t) - at(x, y - 1, t)),
                           0.5 * (at(x, y, t + 1) - at(x, y, t - 1)));
  };
  std::vector<double> out(cube.v.size());
  double total = 0.0;
  for (int t = 0; t < s; ++t)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
        int n = 0;
        for (int dt = -w; dt <= w; ++dt)
          for (int dy = -w; dy <= w; ++dy)
            for (int dx = -w; dx <= w; ++dx) {
              const int qx = x + dx, qy = y + dy, qt = t + dt;
              if (qx < 0 || qy < 0 || qt < 0 || qx >= s || qy >= s || qt >= s) continue;
              const auto g = grad(qx, qy, qt);
              C += g * g.transpose();
              ++n;
            }
        C /= n;
        C += p.reg_lambda * Eigen::Matrix3d::Identity();
        const Eigen::Vector3d u(x - c, y - c, t - c);
        const double k = std::sqrt(C.determinant()) * std::exp(-u.dot(C * u) / (2 * p.h * p.h));
        out[cube.index(x, y, t)] = k;
        total += k;
      }
  for (auto& v : out) v /= total;
  return out;
}

TEST(Probe, MeanOfNonzeroDepths) {
  DepthSequence s;
  for (int f = 0; f < 3; ++f) s.frames.emplace_back(3, 1);
  s.frames[0](0, 0) = 0;
  s.frames[1](1, 0) = 1000;
  s.frames[2](2, 0) = 2000;
  EXPECT_DOUBLE_EQ(*mean_foreground_depth(s, Stip{1, 0, 0, 1}, 3), 1500.0);
  DepthSequence u;
  for (int f = 0; f < 4; ++f) u.frames.emplace_back(9, 9, 2500);
  EXPECT_DOUBLE_EQ(*mean_foreground_depth(u, Stip{4, 4, 0, 2}, 3), 2500.0);
  DepthSequence z;
  for (int f = 0; f < 4; ++f) z.frames.emplace_back(9, 9, 0);
  EXPECT_FALSE(mean_foreground_depth(z, Stip{4, 4, 0, 2}, 3));
}

TEST(Probe, ClipsToSequence) {
  DepthSequence s;
  for (int f = 0; f < 2; ++f) s.frames.emplace_back(10, 10, 0);
  s.frames[0](9, 9) = 700;
  s.frames[1](6, 6) = 300;  // outside the radius-2 probe around (9, 9)
  EXPECT_DOUBLE_EQ(*mean_foreground_depth(s, Stip{9, 9, 0, 0}, 2), 700.0);
}

TEST(AdaptiveScale, Arithmetic) {
  EXPECT_DOUBLE_EQ(adaptive_scale(2000, 2000, 7), 7.0);
  EXPECT_DOUBLE_EQ(adaptive_scale(2000, 4000, 7), 3.5);
  EXPECT_TRUE(fails_with(ErrorCode::kInvalidArgument, [] { adaptive_scale(0, 4000, 7); }));
  EXPECT_TRUE(fails_with(ErrorCode::kInvalidArgument, [] { adaptive_scale(2000, -1, 7); }));
}

TEST(Cuboid, IdentityResampling) {
  Rng rng(1);
  DepthSequence s;
  for (int f = 0; f < 12; ++f) {
    DepthFrame fr(20, 20);
    for (auto& v : fr.data) v = static_cast<std::uint16_t>(rng.integer(1, 5000));
    s.frames.push_back(fr);
  }
  const Stip p{10, 9, 0, 6};
  const auto cube = extract_cuboid(s, p, 3.0, 3);
  for (int t = -3; t <= 3; ++t)
    for (int y = -3; y <= 3; ++y)
      for (int x = -3; x <= 3; ++x)
        EXPECT_EQ(cube(x + 3, y + 3, t + 3), s.frames[static_cast<std::size_t>(6 + t)](10 + x, 9 + y));
}

TEST(Cuboid, ConstantRegion) {
  DepthSequence s;
  for (int f = 0; f < 5; ++f) s.frames.emplace_back(12, 12, 1800);
  for (double r_hat : {0.7, 2.0, 4.5, 11.0}) {
    const auto cube = extract_cuboid(s, Stip{1, 10, 0, 4}, r_hat, 3);
    for (double v : cube.v) EXPECT_DOUBLE_EQ(v, 1800.0);
  }
}

TEST(Cuboid, LinearRampSubsampledByTwo) {
  const auto s = linear_field(40, 40, 30, 3, 5, 7, 100);
  const Stip p{20, 18, 0, 15};
  const auto cube = extract_cuboid(s, p, 6.0, 3);
  for (int t = -3; t <= 3; ++t)
    for (int y = -3; y <= 3; ++y)
      for (int x = -3; x <= 3; ++x)
        EXPECT_NEAR(cube(x + 3, y + 3, t + 3), 3 * (20 + 2 * x) + 5 * (18 + 2 * y) + 7 * (15 + 2 * t) + 100, 1e-9);
}

TEST(Cuboid, FractionalStepOnRamp) {
  // Trilinear interpolation reproduces a linear field at any position.
  const auto s = linear_field(40, 40, 30, 2, 3, 5, 50);
  const Stip p{20, 20, 0, 15};
  const auto cube = extract_cuboid(s, p, 2.2, 4);
  const double step = 2.2 / 4;
  for (int t = -4; t <= 4; ++t)
    for (int y = -4; y <= 4; ++y)
      for (int x = -4; x <= 4; ++x)
        EXPECT_NEAR(cube(x + 4, y + 4, t + 4), 2 * (20 + step * x) + 3 * (20 + step * y) + 5 * (15 + step * t) + 50,
                    1e-9);
}

TEST(Cuboid, BorderReplication) {
  const auto s = linear_field(10, 10, 4, 1, 1, 1, 10);
  const auto cube = extract_cuboid(s, Stip{0, 0, 0, 0}, 2.0, 2);
  // Samples left of / above / before the volume repeat the edge value.
  EXPECT_DOUBLE_EQ(cube(0, 0, 0), 10.0);
  EXPECT_DOUBLE_EQ(cube(2, 2, 2), 10.0);
  EXPECT_DOUBLE_EQ(cube(4, 2, 2), 12.0);
  EXPECT_DOUBLE_EQ(cube(4, 4, 4), 10.0 + 2 + 2 + 2);
}

TEST(Normalize, ZeroMeanUnitStd) {
  Rng rng(2);
  Cube c(5);
  for (auto& v : c.v) v = rng.uniform(100, 4000);
  const auto n = normalize_cube(c);
  const double mean = std::accumulate(n.v.begin(), n.v.end(), 0.0) / n.v.size();
  double var = 0;
  for (double v : n.v) var += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var / n.v.size(), 1.0, 1e-12);
  for (double v : normalize_cube(Cube(3, 7.0)).v) EXPECT_EQ(v, 0.0);
}

TEST(Lsk, MatchesDirectEvaluation) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    DescriptorParams p;
    p.cov_window = trial % 3;
    p.h = 0.5 + trial * 0.3;
    const auto cube = random_cube(rng, 5 + 2 * (trial % 3));
    const auto got = lsk3d(cube, p).values;
    const auto want = lsk_oracle(cube, p);
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-12 + 1e-9 * want[i]) << i;
  }
}

TEST(Lsk, ConstantCubeIsIsotropicGaussian) {
  DescriptorParams p;
  p.reg_lambda = 0.5;
  const auto d = lsk3d(Cube(7, 3.0), p).values;
  double total = 0.0;
  std::vector<double> want(d.size());
  for (int t = 0; t < 7; ++t)
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 7; ++x) {
        const double r2 = (x - 3) * (x - 3) + (y - 3) * (y - 3) + (t - 3) * (t - 3);
        want[static_cast<std::size_t>((t * 7 + y) * 7 + x)] = std::exp(-0.5 * r2 / 2.0);
        total += want[static_cast<std::size_t>((t * 7 + y) * 7 + x)];
      }
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(d[i], want[i] / total, 1e-15);
  // Axis permutation symmetry.
  Cube c(7);
  c.v = d;
  for (int t = 0; t < 7; ++t)
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 7; ++x) {
        EXPECT_NEAR(c(x, y, t), c(y, x, t), 1e-15);
        EXPECT_NEAR(c(x, y, t), c(t, y, x), 1e-15);
      }
}

TEST(Lsk, NormalizedNonnegativeAndMirrorEquivariant) {
  Rng rng(4);
  const DescriptorParams p;
  for (int trial = 0; trial < 50; ++trial) {
    const int side = 3 + 2 * static_cast<int>(rng.index(4));
    const auto cube = random_cube(rng, side);
    const auto d = lsk3d(cube, p).values;
    double sum = 0;
    for (double v : d) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    Cube mirrored(side);
    for (int t = 0; t < side; ++t)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) mirrored(x, y, t) = cube(side - 1 - x, y, t);
    const auto dm = lsk3d(mirrored, p).values;
    for (int t = 0; t < side; ++t)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
          ASSERT_NEAR(dm[cube.index(x, y, t)], d[cube.index(side - 1 - x, y, t)], 1e-12);
  }
}

TEST(Lsk, Errors) {
  EXPECT_TRUE(fails_with(ErrorCode::kInvalidArgument, [] { lsk3d(Cube(2), {}); }));
  DescriptorParams p;
  p.h = 0;
  EXPECT_TRUE(fails_with(ErrorCode::kInvalidArgument, [&] { lsk3d(Cube(3), p); }));
}

DepthSequence textured(int w, int h, int n, std::uint64_t seed, int scale) {
  Rng rng(seed);
  DepthSequence s;
  for (int f = 0; f < n; ++f) {
    DepthFrame fr(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        fr(x, y) = (x > 3 && y > 3) ? static_cast<std::uint16_t>(scale * rng.integer(1000, 3000)) : 0;
    s.frames.push_back(fr);
  }
  return s;
}

TEST(M3dlsk, SingleScaleEqualsPlainLsk) {
  const auto s = textured(30, 30, 10, 1, 1);
  const std::vector<Stip> pts = {{10, 12, 0, 4}, {20, 15, 0, 6}};
  DescriptorParams p;
  p.scales = {3};
  const auto m = m3dlsk(s, pts, p, 2000.0);
  ASSERT_EQ(m.per_scale.size(), 1u);
  ASSERT_EQ(m.kept.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const double z = *mean_foreground_depth(s, pts[i], p.probe_radius);
    const auto cube = normalize_cube(extract_cuboid(s, pts[i], adaptive_scale(2000.0, z, 3), 3));
    EXPECT_EQ(m.per_scale[0][i], lsk3d(cube, p).values);
    EXPECT_EQ(m.depths[i], z);
  }
}

TEST(M3dlsk, DropsAllZeroProbes) {
  const auto s = textured(30, 30, 10, 2, 1);
  const std::vector<Stip> pts = {{0, 0, 0, 3}, {10, 10, 0, 3}};
  DescriptorParams p;
  p.scales = {2, 3};
  p.probe_radius = 1;
  const auto m = m3dlsk(s, pts, p, 2000.0);
  EXPECT_EQ(m.kept, (std::vector<std::size_t>{1}));
  EXPECT_EQ(m.per_scale[0].size(), 1u);
  EXPECT_EQ(m.per_scale[1].size(), 1u);
  EXPECT_EQ(m.per_scale[0][0].size(), 125u);
  EXPECT_EQ(m.per_scale[1][0].size(), 343u);
  EXPECT_TRUE(m3dlsk(s, {}, p, 2000.0).kept.empty());
}

TEST(M3dlsk, DepthDoublingInvariance) {
  const auto s1 = textured(30, 30, 10, 3, 1);
  const auto s2 = textured(30, 30, 10, 3, 2);
  const std::vector<Stip> pts = {{12, 12, 0, 4}, {18, 20, 0, 7}, {25, 9, 0, 2}};
  DescriptorParams p;
  p.scales = {3, 5};
  const auto a = m3dlsk(s1, pts, p, 1700.0);
  const auto b = m3dlsk(s2, pts, p, 3400.0);
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t k = 0; k < a.per_scale[l][i].size(); ++k)
        EXPECT_NEAR(a.per_scale[l][i][k], b.per_scale[l][i][k], 1e-12);
}

TEST(Stv, WorkedExample) {
  const std::vector<Stip> pts = {{2, 3, 4, 1}, {5, 1, 7, 2}};
  const auto d = stv(pts);
  EXPECT_EQ(d[0], (StvDescriptor{0, 1, 0, 0}));
  EXPECT_EQ(d[1], (StvDescriptor{1, 0, 1, 1}));
  EXPECT_EQ(stv(std::vector<Stip>{{9, 9, 9, 9}})[0], (StvDescriptor{0, 0, 0, 0}));
  EXPECT_TRUE(fails_with(ErrorCode::kEmptyInput, [] { stv({}); }));
}

TEST(Stv, TranslationInvariantAndBounded) {
  Rng rng(6);
  std::vector<Stip> pts, moved;
  for (int i = 0; i < 40; ++i) {
    pts.push_back({rng.integer(0, 100), rng.integer(0, 100), rng.integer(500, 4000), rng.integer(0, 30)});
    moved.push_back({pts.back().x + 10, pts.back().y + 10, pts.back().z + 10, pts.back().f + 3});
  }
  const auto a = stv(pts), b = stv(moved);
  EXPECT_EQ(a, b);
  for (const auto& d : a)
    for (double v : d) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
}

TEST(DescFile, RoundTripAsFloat) {
  const std::vector<std::vector<double>> rows = {{0.25, 1.0 / 3.0}, {-2.0, 1e-8}};
  const auto back = decode_descriptors(encode_descriptors(rows));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(back[i][k], static_cast<double>(static_cast<float>(rows[i][k])));
  auto bytes = encode_descriptors(rows);
  EXPECT_TRUE(fails_with(ErrorCode::kTruncatedPayload, [&] { decode_descriptors(bytes.substr(0, bytes.size() - 2)); }));
  bytes[0] = 'X';
  EXPECT_TRUE(fails_with(ErrorCode::kMalformedHeader, [&] { decode_descriptors(bytes); }));
  EXPECT_TRUE(decode_descriptors(encode_descriptors({})).empty());
}

}  // namespace
}  // namespace depthact
