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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "depthact/error.hpp"

namespace depthact {

// Row-major 2-D raster. Everything per-pixel in the library (depth frames,
// masks, probability maps, plane projections) is a Grid of some scalar.
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    require(w >= 0 && h >= 0, ErrorCode::kInvalidArgument, "negative grid size");
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
  }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  T& operator()(int x, int y) { return data[index(x, y)]; }
  const T& operator()(int x, int y) const { return data[index(x, y)]; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width == other.width && height == other.height;
  }

  bool operator==(const Grid&) const = default;
};

using BinaryMask = Grid<std::uint8_t>;

template <typename T, typename U>
void require_same_shape(const Grid<T>& a, const Grid<U>& b, const std::string& what) {
  require(a.same_shape(b), ErrorCode::kGridMismatch,
          what + " (" + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
              std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
}

// Inclusive axis-aligned rectangle.
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = -1;
  int y1 = -1;

  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  bool contains(const Box& b) const { return b.x0 >= x0 && b.x1 <= x1 && b.y0 >= y0 && b.y1 <= y1; }
  int area() const { return (x1 - x0 + 1) * (y1 - y0 + 1); }

  void expand(int x, int y) {
    x0 = std::min(x0, x);
    y0 = std::min(y0, y);
    x1 = std::max(x1, x);
    y1 = std::max(y1, y);
  }

  bool operator==(const Box&) const = default;
};

inline Box box_union(const Box& a, const Box& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1), std::max(a.y1, b.y1)};
}

inline std::optional<Box> box_union(const std::optional<Box>& a, const std::optional<Box>& b) {
  if (!a) return b;
  if (!b) return a;
  return box_union(*a, *b);
}

template <typename T>
std::optional<Box> bounding_box(const Grid<T>& g) {
  std::optional<Box> box;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      if (g(x, y) == T{}) continue;
      if (!box) box = Box{x, y, x, y};
      else box->expand(x, y);
    }
  }
  return box;
}

inline std::size_t count_set(const BinaryMask& m) {
  return static_cast<std::size_t>(std::count_if(m.data.begin(), m.data.end(), [](auto v) { return v != 0; }));
}

}  // namespace depthact
