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

// Binary morphology with a Euclidean disk structuring element
// {(dx, dy) : dx^2 + dy^2 <= r^2}. Pixels outside the image count as unset
// for dilation and as set for erosion, so closing never removes pixels.

#include <algorithm>
#include <cmath>
#include <vector>

#include "depthact/error.hpp"
#include "depthact/grid.hpp"

namespace depthact {

namespace detail {

inline std::vector<int> disk_half_widths(int r) {
  std::vector<int> hw(static_cast<std::size_t>(2 * r + 1));
  for (int dy = -r; dy <= r; ++dy) {
    hw[static_cast<std::size_t>(dy + r)] = static_cast<int>(std::floor(std::sqrt(static_cast<double>(r * r - dy * dy))));
  }
  return hw;
}

// Per-row inclusive prefix counts of `pred(x, y)` over a w x h region;
// prefix(x + 1, y) = count of set pixels in row y at columns [0, x].
template <typename Pred>
Grid<int> row_prefix(int w, int h, Pred pred) {
  Grid<int> p(w + 1, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) p(x + 1, y) = p(x, y) + (pred(x, y) ? 1 : 0);
  return p;
}

inline int row_count(const Grid<int>& prefix, int y, int xa, int xb) {
  xa = std::max(xa, 0);
  xb = std::min(xb, prefix.width - 2);
  if (xa > xb) return 0;
  return prefix(xb + 1, y) - prefix(xa, y);
}

}  // namespace detail

inline BinaryMask dilate_disk(const BinaryMask& m, int r) {
  require(r >= 0, ErrorCode::kInvalidArgument, "negative disk radius");
  const auto hw = detail::disk_half_widths(r);
  const auto prefix = detail::row_prefix(m.width, m.height, [&](int x, int y) { return m(x, y) != 0; });
  BinaryMask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= m.height) continue;
        const int h = hw[static_cast<std::size_t>(dy + r)];
        if (detail::row_count(prefix, yy, x - h, x + h) > 0) {
          out(x, y) = 1;
          break;
        }
      }
    }
  }
  return out;
}

inline BinaryMask erode_disk(const BinaryMask& m, int r) {
  require(r >= 0, ErrorCode::kInvalidArgument, "negative disk radius");
  const auto hw = detail::disk_half_widths(r);
  const auto zeros = detail::row_prefix(m.width, m.height, [&](int x, int y) { return m(x, y) == 0; });
  BinaryMask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      bool all = m(x, y) != 0;
      for (int dy = -r; all && dy <= r; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= m.height) continue;
        const int h = hw[static_cast<std::size_t>(dy + r)];
        if (detail::row_count(zeros, yy, x - h, x + h) > 0) all = false;
      }
      out(x, y) = all ? 1 : 0;
    }
  }
  return out;
}

// Dilation followed by erosion. Work is restricted to the set pixels'
// bounding box grown by 2r, outside of which the result is always empty.
inline BinaryMask close_disk(const BinaryMask& m, int r) {
  require(r >= 0, ErrorCode::kInvalidArgument, "negative disk radius");
  BinaryMask out(m.width, m.height);
  const auto bbox = bounding_box(m);
  if (!bbox) return out;
  const int cx0 = std::max(0, bbox->x0 - 2 * r), cy0 = std::max(0, bbox->y0 - 2 * r);
  const int cx1 = std::min(m.width - 1, bbox->x1 + 2 * r), cy1 = std::min(m.height - 1, bbox->y1 + 2 * r);
  // Dilated values over the crop grown by r; outside the image reads as set.
  const int ex0 = cx0 - r, ey0 = cy0 - r;
  const int ew = (cx1 - cx0 + 1) + 2 * r, eh = (cy1 - cy0 + 1) + 2 * r;
  const auto hw = detail::disk_half_widths(r);
  const auto src = detail::row_prefix(m.width, m.height, [&](int x, int y) { return m(x, y) != 0; });
  BinaryMask dilated(ew, eh);
  for (int ly = 0; ly < eh; ++ly) {
    for (int lx = 0; lx < ew; ++lx) {
      const int x = ex0 + lx, y = ey0 + ly;
      if (!m.contains(x, y)) {
        dilated(lx, ly) = 1;
        continue;
      }
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = y + dy;
        if (yy < bbox->y0 || yy > bbox->y1) continue;
        const int h = hw[static_cast<std::size_t>(dy + r)];
        if (detail::row_count(src, yy, x - h, x + h) > 0) {
          dilated(lx, ly) = 1;
          break;
        }
      }
    }
  }
  const auto zeros = detail::row_prefix(ew, eh, [&](int x, int y) { return dilated(x, y) == 0; });
  for (int y = cy0; y <= cy1; ++y) {
    for (int x = cx0; x <= cx1; ++x) {
      const int lx = x - ex0, ly = y - ey0;
      if (dilated(lx, ly) == 0) continue;
      bool all = true;
      for (int dy = -r; all && dy <= r; ++dy) {
        const int h = hw[static_cast<std::size_t>(dy + r)];
        if (detail::row_count(zeros, ly + dy, lx - h, lx + h) > 0) all = false;
      }
      out(x, y) = all ? 1 : 0;
    }
  }
  return out;
}

}  // namespace depthact
