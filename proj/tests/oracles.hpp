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

// Slow reference implementations used by the unit and acceptance tests.

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "depthact/background.hpp"
#include "depthact/grid.hpp"
#include "depthact/rng.hpp"

namespace depthact::oracle {

inline BinaryMask random_mask(Rng& rng, int w, int h, double density) {
  BinaryMask m(w, h);
  for (auto& v : m.data) v = rng.uniform() < density ? 1 : 0;
  return m;
}

struct FloodLabels {
  Grid<std::int32_t> labels;
  std::vector<std::size_t> areas;
};

inline FloodLabels flood_fill(const BinaryMask& m, int connectivity) {
  FloodLabels out{Grid<std::int32_t>(m.width, m.height, 0), {}};
  std::vector<std::pair<int, int>> steps = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  if (connectivity == 8) steps.insert(steps.end(), {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}});
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m(x, y) || out.labels(x, y)) continue;
      const auto id = static_cast<std::int32_t>(out.areas.size() + 1);
      out.areas.push_back(0);
      std::deque<std::pair<int, int>> queue{{x, y}};
      out.labels(x, y) = id;
      while (!queue.empty()) {
        const auto [cx, cy] = queue.front();
        queue.pop_front();
        ++out.areas.back();
        for (const auto& [dx, dy] : steps) {
          const int nx = cx + dx, ny = cy + dy;
          if (m.contains(nx, ny) && m(nx, ny) && !out.labels(nx, ny)) {
            out.labels(nx, ny) = id;
            queue.emplace_back(nx, ny);
          }
        }
      }
    }
  }
  return out;
}

// True when both label maps describe the same partition with the same
// per-component areas (label numbers may differ).
inline bool same_partition(const Labeling& a, const FloodLabels& b) {
  if (a.areas.size() != b.areas.size()) return false;
  std::map<std::int32_t, std::int32_t> fwd, bwd;
  for (std::size_t i = 0; i < a.labels.data.size(); ++i) {
    const auto la = a.labels.data[i], lb = b.labels.data[i];
    if ((la == 0) != (lb == 0)) return false;
    if (la == 0) continue;
    auto [it, fresh] = fwd.emplace(la, lb);
    if (!fresh && it->second != lb) return false;
    auto [jt, fresh2] = bwd.emplace(lb, la);
    if (!fresh2 && jt->second != la) return false;
  }
  for (const auto& [la, lb] : fwd)
    if (a.areas[static_cast<std::size_t>(la - 1)] != b.areas[static_cast<std::size_t>(lb - 1)]) return false;
  return true;
}

// Direct disk closing: dilation reads outside pixels as unset, erosion
// reads them as set.
inline BinaryMask naive_close(const BinaryMask& m, int r) {
  BinaryMask dil(m.width, m.height), out(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      for (int dy = -r; dy <= r && !dil(x, y); ++dy)
        for (int dx = -r; dx <= r; ++dx)
          if (dx * dx + dy * dy <= r * r && m.contains(x + dx, y + dy) && m(x + dx, y + dy)) {
            dil(x, y) = 1;
            break;
          }
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      bool all = true;
      for (int dy = -r; dy <= r && all; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          if (dx * dx + dy * dy <= r * r && dil.contains(x + dx, y + dy) && !dil(x + dx, y + dy)) {
            all = false;
            break;
          }
      out(x, y) = all ? 1 : 0;
    }
  return out;
}

inline double iou(const BinaryMask& a, const BinaryMask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    inter += (a.data[i] && b.data[i]) ? 1 : 0;
    uni += (a.data[i] || b.data[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace depthact::oracle
