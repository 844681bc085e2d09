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

// Bag-of-visual-words encoding: k-means codebooks, hard vector
// quantization, multi-segment fusion, and the spatial-temporal pyramid and
// weighting encoders used for comparison.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "depthact/binio.hpp"
#include "depthact/error.hpp"
#include "depthact/parallel.hpp"
#include "depthact/rng.hpp"
#include "depthact/stip.hpp"

namespace depthact {

using Vector = std::vector<double>;

struct Codebook {
  // k rows of d values, row-major.
  std::vector<double> centroids;
  int k = 0;
  int d = 0;
  std::uint64_t seed = 0;
  std::string kind;
  int scale_index = 0;

  std::span<const double> row(int i) const {
    return {centroids.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
  }

  bool operator==(const Codebook&) const = default;
};

struct KMeansOptions {
  int k = 1;
  std::uint64_t seed = 0;
  int max_iters = 100;
  double tol = 1e-6;
  int jobs = 1;
};

struct KMeansTrace {
  // Distortion after each assignment step.
  std::vector<double> distortion;
};

namespace detail {

inline double sq_dist(const double* a, const double* b, std::size_t d,
                      double bound = std::numeric_limits<double>::infinity()) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  while (i + 4 <= d) {
    const std::size_t stop = std::min(d - d % 4, i + 64);
    for (; i < stop; i += 4) {
      const double t0 = a[i] - b[i];
      const double t1 = a[i + 1] - b[i + 1];
      const double t2 = a[i + 2] - b[i + 2];
      const double t3 = a[i + 3] - b[i + 3];
      s0 += t0 * t0;
      s1 += t1 * t1;
      s2 += t2 * t2;
      s3 += t3 * t3;
    }
    if ((s0 + s1) + (s2 + s3) > bound) return std::numeric_limits<double>::infinity();
  }
  for (; i < d; ++i) {
    const double t = a[i] - b[i];
    s0 += t * t;
  }
  return (s0 + s1) + (s2 + s3);
}

// Nearest centroid, lowest index on ties.
inline int nearest(const double* x, const Codebook& cb, double* dist = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < cb.k; ++j) {
    const double dj = sq_dist(x, cb.row(j).data(), static_cast<std::size_t>(cb.d), best_d);
    if (dj < best_d) {
      best_d = dj;
      best = j;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

inline std::string bytes_of(std::span<const double> v) {
  return std::string(reinterpret_cast<const char*>(v.data()), v.size_bytes());
}

}  // namespace detail

// Lloyd's algorithm from k distinct seeded samples. Empty clusters are
// reseeded with the points farthest from their centroids. Final centroids
// are rounded to float precision so that codebook files are lossless.
inline Codebook kmeans(std::span<const Vector> data, const KMeansOptions& opt, KMeansTrace* trace = nullptr) {
  require(!data.empty(), ErrorCode::kEmptyInput, "no descriptors to cluster");
  require(opt.k >= 1, ErrorCode::kInvalidArgument, "k must be >= 1");
  const std::size_t n = data.size();
  const std::size_t d = data.front().size();
  for (const auto& x : data) {
    require(x.size() == d, ErrorCode::kDimensionMismatch, "descriptors differ in length");
    for (double v : x) require(std::isfinite(v), ErrorCode::kNotANumber, "non-finite descriptor value");
  }
  const auto k = static_cast<std::size_t>(opt.k);

  Codebook cb;
  cb.k = opt.k;
  cb.d = static_cast<int>(d);
  cb.seed = opt.seed;
  cb.centroids.resize(k * d);
  Rng rng(opt.seed);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(std::span(order));
  std::vector<std::size_t> chosen;
  std::unordered_set<std::string> distinct;
  for (std::size_t i : order) {
    if (chosen.size() == k) break;
    if (distinct.insert(detail::bytes_of(data[i])).second) chosen.push_back(i);
  }
  for (std::size_t j = 0; j < chosen.size(); ++j)
    std::copy(data[chosen[j]].begin(), data[chosen[j]].end(), cb.centroids.begin() + static_cast<std::ptrdiff_t>(j * d));
  // Fewer distinct points than clusters: cycle through them with a small
  // deterministic perturbation.
  for (std::size_t j = chosen.size(); j < k; ++j) {
    const auto& src = data[chosen[j % chosen.size()]];
    for (std::size_t c = 0; c < d; ++c)
      cb.centroids[j * d + c] = src[c] + 1e-9 * (1.0 + std::abs(src[c])) * rng.normal();
  }

  std::vector<int> assign(n, 0);
  std::vector<double> dist(n, 0.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opt.max_iters; ++iter) {
    parallel_for(n, opt.jobs, [&](std::size_t i) { assign[i] = detail::nearest(data[i].data(), cb, &dist[i]); });
    double distortion = 0.0;
    for (double v : dist) distortion += v;
    if (trace) trace->distortion.push_back(distortion);

    std::vector<double> sums(k * d, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(assign[i]);
      ++counts[j];
      for (std::size_t c = 0; c < d; ++c) sums[j * d + c] += data[i][c];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] > 0) {
        for (std::size_t c = 0; c < d; ++c) cb.centroids[j * d + c] = sums[j * d + c] / static_cast<double>(counts[j]);
        continue;
      }
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i] && (far == n || dist[i] > dist[far])) far = i;
      if (far == n) continue;
      taken[far] = true;
      dist[far] = 0.0;
      std::copy(data[far].begin(), data[far].end(), cb.centroids.begin() + static_cast<std::ptrdiff_t>(j * d));
    }

    if (distortion == 0.0) break;
    if (std::isfinite(prev) && (prev - distortion) < opt.tol * prev) break;
    prev = distortion;
  }
  for (double& v : cb.centroids) v = static_cast<double>(static_cast<float>(v));
  return cb;
}

inline double distortion(std::span<const Vector> data, const Codebook& cb) {
  double total = 0.0;
  for (const auto& x : data) {
    double dj = 0.0;
    detail::nearest(x.data(), cb, &dj);
    total += dj;
  }
  return total;
}

// Best of `restarts` runs (seeds seed, seed+1, ...) by final distortion.
inline Codebook kmeans_best_of(std::span<const Vector> data, KMeansOptions opt, int restarts) {
  require(restarts >= 1, ErrorCode::kInvalidArgument, "restarts must be >= 1");
  Codebook best;
  double best_d = std::numeric_limits<double>::infinity();
  const auto base = opt.seed;
  for (int i = 0; i < restarts; ++i) {
    opt.seed = base + static_cast<std::uint64_t>(i);
    auto cb = kmeans(data, opt);
    const double dd = distortion(data, cb);
    if (dd < best_d) {
      best_d = dd;
      best = std::move(cb);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Histograms

inline void l1_normalize(Vector& h) {
  double s = 0.0;
  for (double v : h) s += v;
  if (s > 0.0)
    for (double& v : h) v /= s;
}

// Hard-assignment counts over the codebook, L1-normalized; the empty set
// gives a zero vector.
inline Vector vq_histogram(std::span<const Vector> descriptors, const Codebook& cb) {
  Vector h(static_cast<std::size_t>(cb.k), 0.0);
  for (const auto& x : descriptors) {
    require(x.size() == static_cast<std::size_t>(cb.d), ErrorCode::kDimensionMismatch,
            "descriptor length " + std::to_string(x.size()) + " does not match codebook dimension " +
                std::to_string(cb.d));
    h[static_cast<std::size_t>(detail::nearest(x.data(), cb))] += 1.0;
  }
  l1_normalize(h);
  return h;
}

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
  bool operator==(const Segment&) const = default;
};

struct Representation {
  Vector values;
  std::vector<Segment> layout;

  std::span<const double> segment(std::size_t i) const {
    return std::span(values).subspan(layout[i].offset, layout[i].length);
  }

  void append(std::string name, std::span<const double> hist) {
    layout.push_back({std::move(name), values.size(), hist.size()});
    values.insert(values.end(), hist.begin(), hist.end());
  }

  bool same_layout(const Representation& o) const { return layout == o.layout; }
};

// [motion histogram per scale..., shape histogram].
inline Representation fuse(std::span<const Vector> motion_hists, std::span<const double> shape_hist) {
  Representation rep;
  for (std::size_t l = 0; l < motion_hists.size(); ++l) {
    require(motion_hists[l].size() == motion_hists.front().size(), ErrorCode::kDimensionMismatch,
            "per-scale histograms differ in length");
    rep.append("motion_scale_" + std::to_string(l + 1), motion_hists[l]);
  }
  rep.append("shape", shape_hist);
  return rep;
}

// ---------------------------------------------------------------------------
// Comparison encoders

// Cells along (t, y, x).
struct PyramidLevel {
  int nt = 1;
  int ny = 1;
  int nx = 1;
  int cells() const { return nt * ny * nx; }
};

struct SequenceExtent {
  int width = 0;
  int height = 0;
  int frames = 0;
};

inline int pyramid_cell(const Stip& s, const PyramidLevel& lv, const SequenceExtent& ext) {
  auto slot = [](int v, int extent, int n) {
    if (extent <= 0) return 0;
    return std::clamp(static_cast<int>(static_cast<long long>(v) * n / extent), 0, n - 1);
  };
  const int ct = slot(s.f, ext.frames, lv.nt), cy = slot(s.y, ext.height, lv.ny), cx = slot(s.x, ext.width, lv.nx);
  return (ct * lv.ny + cy) * lv.nx + cx;
}

inline Representation stp_encode(std::span<const Stip> stips, std::span<const Vector> descriptors, const Codebook& cb,
                                 std::span<const PyramidLevel> levels, const SequenceExtent& ext) {
  require(!levels.empty(), ErrorCode::kInvalidArgument, "at least one pyramid level required");
  require(stips.size() == descriptors.size(), ErrorCode::kDimensionMismatch, "one descriptor per point required");
  Representation rep;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto& lv = levels[l];
    require(lv.nt >= 1 && lv.ny >= 1 && lv.nx >= 1, ErrorCode::kInvalidArgument, "pyramid cells must be >= 1");
    std::vector<std::vector<Vector>> cells(static_cast<std::size_t>(lv.cells()));
    for (std::size_t i = 0; i < stips.size(); ++i)
      cells[static_cast<std::size_t>(pyramid_cell(stips[i], lv, ext))].push_back(descriptors[i]);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      rep.append("stp_l" + std::to_string(l + 1) + "_c" + std::to_string(c), vq_histogram(cells[c], cb));
    }
  }
  return rep;
}

// Votes weighted by each point's distance to `origin`, scaled so the
// farthest point weighs 1; L1-normalized.
inline Vector stw_encode(std::span<const Stip> stips, std::span<const Vector> descriptors, const Codebook& cb,
                         const std::array<double, 4>& origin) {
  require(!stips.empty(), ErrorCode::kEmptyInput, "no points to encode");
  require(stips.size() == descriptors.size(), ErrorCode::kDimensionMismatch, "one descriptor per point required");
  std::vector<double> dist(stips.size());
  double far = 0.0;
  for (std::size_t i = 0; i < stips.size(); ++i) {
    const auto& s = stips[i];
    const double dx = s.x - origin[0], dy = s.y - origin[1], dz = s.z - origin[2], df = s.f - origin[3];
    dist[i] = std::sqrt(dx * dx + dy * dy + dz * dz + df * df);
    far = std::max(far, dist[i]);
  }
  Vector h(static_cast<std::size_t>(cb.k), 0.0);
  for (std::size_t i = 0; i < stips.size(); ++i) {
    require(descriptors[i].size() == static_cast<std::size_t>(cb.d), ErrorCode::kDimensionMismatch,
            "descriptor length does not match codebook");
    const double w = far > 0.0 ? dist[i] / far : 0.0;
    h[static_cast<std::size_t>(detail::nearest(descriptors[i].data(), cb))] += w;
  }
  l1_normalize(h);
  return h;
}

// Component-wise minimum of a point set.
inline std::array<double, 4> stip_origin(std::span<const Stip> stips) {
  require(!stips.empty(), ErrorCode::kEmptyInput, "no points");
  std::array<double, 4> o{static_cast<double>(stips[0].x), static_cast<double>(stips[0].y),
                          static_cast<double>(stips[0].z), static_cast<double>(stips[0].f)};
  for (const auto& s : stips) {
    o[0] = std::min(o[0], static_cast<double>(s.x));
    o[1] = std::min(o[1], static_cast<double>(s.y));
    o[2] = std::min(o[2], static_cast<double>(s.z));
    o[3] = std::min(o[3], static_cast<double>(s.f));
  }
  return o;
}

// ---------------------------------------------------------------------------
// CDBK files

inline void write_codebook(binio::Writer& w, const Codebook& cb) {
  w.bytes("CDBK");
  w.put<std::uint16_t>(1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cb.k));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cb.d));
  w.put<std::uint64_t>(cb.seed);
  for (double v : cb.centroids) w.put<float>(static_cast<float>(v));
}

inline Codebook read_codebook(binio::Reader& r) {
  require(r.bytes(4) == "CDBK", ErrorCode::kMalformedHeader, "missing CDBK magic");
  require(r.get<std::uint16_t>() == 1, ErrorCode::kMalformedHeader, "unsupported CDBK version");
  Codebook cb;
  cb.k = static_cast<int>(r.get<std::uint32_t>());
  cb.d = static_cast<int>(r.get<std::uint32_t>());
  cb.seed = r.get<std::uint64_t>();
  require(cb.k >= 1, ErrorCode::kMalformedHeader, "codebook with no centroids");
  cb.centroids.resize(static_cast<std::size_t>(cb.k) * static_cast<std::size_t>(cb.d));
  for (auto& v : cb.centroids) v = r.get<float>();
  return cb;
}

inline std::string encode_codebook(const Codebook& cb) {
  binio::Writer w;
  write_codebook(w, cb);
  return w.buffer();
}

inline Codebook decode_codebook(std::string_view bytes) {
  binio::Reader r(bytes);
  auto cb = read_codebook(r);
  require(r.remaining() == 0, ErrorCode::kMalformedHeader, "trailing bytes after codebook");
  return cb;
}

}  // namespace depthact
