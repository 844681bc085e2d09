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

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "depthact/error.hpp"
#include "depthact/grid.hpp"

namespace depthact {

enum class Connectivity { kFour = 4, kEight = 8 };

struct Labeling {
  // 0 = background, components are numbered densely from 1 in raster order
  // of their first pixel.
  Grid<std::int32_t> labels;
  // areas[i] is the pixel count of label i + 1.
  std::vector<std::size_t> areas;

  int count() const { return static_cast<int>(areas.size()); }
};

namespace detail {

class DisjointSets {
 public:
  std::int32_t make() {
    parent_.push_back(static_cast<std::int32_t>(parent_.size()));
    return parent_.back();
  }

  std::int32_t find(std::int32_t x) {
    std::int32_t root = x;
    while (parent_[static_cast<std::size_t>(root)] != root) root = parent_[static_cast<std::size_t>(root)];
    while (parent_[static_cast<std::size_t>(x)] != root) {
      const auto next = parent_[static_cast<std::size_t>(x)];
      parent_[static_cast<std::size_t>(x)] = root;
      x = next;
    }
    return root;
  }

  void join(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
  }

 private:
  std::vector<std::int32_t> parent_;
};

}  // namespace detail

// Classical two-pass labeling: provisional labels from the already-visited
// neighbours, equivalences recorded in a union-find, then resolved.
template <typename T>
Labeling label_components(const Grid<T>& mask, Connectivity conn = Connectivity::kEight) {
  const int w = mask.width, h = mask.height;
  Grid<std::int32_t> provisional(w, h, -1);
  detail::DisjointSets sets;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask(x, y) == T{}) continue;
      std::int32_t label = -1;
      auto visit = [&](int nx, int ny) {
        if (!mask.contains(nx, ny)) return;
        const auto n = provisional(nx, ny);
        if (n < 0) return;
        if (label < 0) label = n;
        else sets.join(label, n);
      };
      visit(x - 1, y);
      visit(x, y - 1);
      if (conn == Connectivity::kEight) {
        visit(x - 1, y - 1);
        visit(x + 1, y - 1);
      }
      provisional(x, y) = label >= 0 ? label : sets.make();
    }
  }

  Labeling out;
  out.labels = Grid<std::int32_t>(w, h, 0);
  std::vector<std::int32_t> dense;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto p = provisional(x, y);
      if (p < 0) continue;
      const auto root = static_cast<std::size_t>(sets.find(p));
      if (dense.size() <= root) dense.resize(root + 1, 0);
      if (dense[root] == 0) {
        out.areas.push_back(0);
        dense[root] = static_cast<std::int32_t>(out.areas.size());
      }
      out.labels(x, y) = dense[root];
      ++out.areas[static_cast<std::size_t>(dense[root] - 1)];
    }
  }
  return out;
}

// Label of the largest component (first one on ties), or 0 when empty.
inline std::int32_t largest_component(const Labeling& lab) {
  std::int32_t best = 0;
  std::size_t best_area = 0;
  for (std::size_t i = 0; i < lab.areas.size(); ++i) {
    if (lab.areas[i] > best_area) {
      best_area = lab.areas[i];
      best = static_cast<std::int32_t>(i + 1);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Background model

using ProbabilityMap = Grid<double>;
using MaxDepthMap = Grid<std::uint16_t>;

struct BackgroundModel {
  Grid<std::uint16_t> depth;
  double t1 = 0.8;
};

namespace detail {

inline void check_history(std::span<const Grid<std::uint16_t>> frames) {
  require(!frames.empty(), ErrorCode::kEmptyInput, "no frames for background model");
  for (const auto& f : frames) require_same_shape(f, frames.front(), "background history frames differ in size");
}

}  // namespace detail

// Fraction of frames in which each pixel has no reading.
inline ProbabilityMap probability_map(std::span<const Grid<std::uint16_t>> frames) {
  detail::check_history(frames);
  const auto& first = frames.front();
  std::vector<std::uint32_t> zeros(first.size(), 0);
  for (const auto& f : frames)
    for (std::size_t i = 0; i < f.size(); ++i) zeros[i] += f.data[i] == 0 ? 1u : 0u;
  ProbabilityMap p(first.width, first.height);
  const double n = static_cast<double>(frames.size());
  for (std::size_t i = 0; i < zeros.size(); ++i) p.data[i] = static_cast<double>(zeros[i]) / n;
  return p;
}

inline MaxDepthMap max_depth_map(std::span<const Grid<std::uint16_t>> frames) {
  detail::check_history(frames);
  MaxDepthMap m = frames.front();
  for (const auto& f : frames.subspan(1))
    for (std::size_t i = 0; i < f.size(); ++i) m.data[i] = std::max(m.data[i], f.data[i]);
  return m;
}

inline BackgroundModel build_background(const ProbabilityMap& p, const MaxDepthMap& m, double t1) {
  require(t1 >= 0.0 && t1 <= 1.0, ErrorCode::kInvalidArgument, "t1 must be in [0, 1]");
  require_same_shape(p, m, "probability and max-depth maps");
  BackgroundModel b{m, t1};
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.data[i] > t1) b.depth.data[i] = 0;
  return b;
}

inline BackgroundModel build_background(std::span<const Grid<std::uint16_t>> frames, double t1) {
  return build_background(probability_map(frames), max_depth_map(frames), t1);
}

// Pixels with a reading that sit in front of the background by more than
// t2_factor times the largest such gap. Far-field pixels (B == 0) with a
// reading are always candidates. Only the largest 8-connected component is
// returned.
inline BinaryMask extract_foreground(const BackgroundModel& bg, const Grid<std::uint16_t>& frame, double t2_factor) {
  require_same_shape(bg.depth, frame, "background model and frame");
  require(t2_factor >= 0.0, ErrorCode::kInvalidArgument, "t2_factor must be nonnegative");
  int max_gap = 0;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const int z = frame.data[i], b = bg.depth.data[i];
    if (z > 0 && b > 0 && b - z > max_gap) max_gap = b - z;
  }
  const double t2 = t2_factor * max_gap;
  BinaryMask raw(frame.width, frame.height);
  bool any = false;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const int z = frame.data[i], b = bg.depth.data[i];
    if (z == 0) continue;
    if ((b == 0) || (b - z > 0 && b - z > t2)) {
      raw.data[i] = 1;
      any = true;
    }
  }
  if (!any) return raw;
  const auto lab = label_components(raw, Connectivity::kEight);
  const auto keep = largest_component(lab);
  BinaryMask out(frame.width, frame.height);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = lab.labels.data[i] == keep ? 1 : 0;
  return out;
}

}  // namespace depthact
