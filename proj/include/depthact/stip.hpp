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

// Interest point detection. Each foreground frame is projected onto the
// xy, xz and zy planes; points sampled along the projected silhouettes'
// contours are the candidates. Motion boxes from consecutive projections
// select motion-based points per frame, and boxes from the motion
// accumulated over the whole sequence select shape-based points.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "depthact/background.hpp"
#include "depthact/depthio.hpp"
#include "depthact/error.hpp"
#include "depthact/grid.hpp"
#include "depthact/morphology.hpp"

namespace depthact {

enum class PlaneView { kXY = 0, kXZ = 1, kZY = 2 };

inline constexpr std::array<PlaneView, 3> kViews = {PlaneView::kXY, PlaneView::kXZ, PlaneView::kZY};

struct ProjectionParams {
  double z_bin_mm = 10.0;
  int z_bins = 512;

  int bin(int z_mm) const {
    const int b = static_cast<int>(std::floor(z_mm / z_bin_mm));
    return std::clamp(b, 0, z_bins - 1);
  }
  // Smallest millimetre value that falls into bin b.
  int lift(int b) const { return static_cast<int>(std::ceil(b * z_bin_mm)); }
};

// xy: depth at (x, y). xz: largest y at (x, z-bin), stored in row z-bin.
// zy: largest x at (z-bin, y), stored in column z-bin. `occupied` marks
// cells that carry a value since 0 is a legal coordinate.
struct PlaneMap {
  PlaneView view = PlaneView::kXY;
  Grid<std::uint16_t> values;
  BinaryMask occupied;
  double z_bin_mm = 10.0;
};

struct PlaneSet {
  std::array<PlaneMap, 3> maps;

  const PlaneMap& operator[](PlaneView v) const { return maps[static_cast<std::size_t>(v)]; }
  PlaneMap& operator[](PlaneView v) { return maps[static_cast<std::size_t>(v)]; }
};

enum class StipKind { kCandidate, kMotion, kShape };

inline std::string_view to_string(StipKind k) {
  switch (k) {
    case StipKind::kCandidate: return "candidate";
    case StipKind::kMotion: return "motion";
    case StipKind::kShape: return "shape";
  }
  return "?";
}

struct Stip {
  int x = 0;
  int y = 0;
  int z = 0;  // mm
  int f = 0;
  StipKind kind = StipKind::kCandidate;

  bool same_point(const Stip& o) const { return x == o.x && y == o.y && z == o.z && f == o.f; }
  bool operator==(const Stip&) const = default;
};

// ---------------------------------------------------------------------------
// Projection

inline PlaneSet empty_planes(int width, int height, const ProjectionParams& p) {
  require(p.z_bin_mm >= 1.0 && p.z_bins >= 1, ErrorCode::kInvalidArgument, "bad projection parameters");
  PlaneSet s;
  s[PlaneView::kXY] = {PlaneView::kXY, Grid<std::uint16_t>(width, height), BinaryMask(width, height), p.z_bin_mm};
  s[PlaneView::kXZ] = {PlaneView::kXZ, Grid<std::uint16_t>(width, p.z_bins), BinaryMask(width, p.z_bins), p.z_bin_mm};
  s[PlaneView::kZY] = {PlaneView::kZY, Grid<std::uint16_t>(p.z_bins, height), BinaryMask(p.z_bins, height), p.z_bin_mm};
  return s;
}

namespace detail {

// Fills unoccupied cells between occupied ones along one line of a side
// view by linear interpolation of the stored coordinate.
template <typename At>
void interpolate_line(int n, At at, Grid<std::uint16_t>& values, BinaryMask& occ) {
  int prev = -1;
  for (int i = 0; i < n; ++i) {
    const auto [x, y] = at(i);
    if (occ(x, y) == 0) continue;
    if (prev >= 0 && i - prev > 1) {
      const auto [px, py] = at(prev);
      const double a = values(px, py), b = values(x, y);
      for (int j = prev + 1; j < i; ++j) {
        const auto [jx, jy] = at(j);
        const double t = static_cast<double>(j - prev) / (i - prev);
        values(jx, jy) = static_cast<std::uint16_t>(std::lround(a + (b - a) * t));
        occ(jx, jy) = 1;
      }
    }
    prev = i;
  }
}

}  // namespace detail

inline PlaneSet project_foreground(const DepthFrame& frame, const BinaryMask& mask, const ProjectionParams& p) {
  require_same_shape(frame, mask, "frame and foreground mask");
  PlaneSet s = empty_planes(frame.width, frame.height, p);
  auto& xy = s[PlaneView::kXY];
  auto& xz = s[PlaneView::kXZ];
  auto& zy = s[PlaneView::kZY];
  bool any = false;
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const int z = frame(x, y);
      if (mask(x, y) == 0 || z == 0) continue;
      any = true;
      xy.values(x, y) = static_cast<std::uint16_t>(z);
      xy.occupied(x, y) = 1;
      const int b = p.bin(z);
      xz.values(x, b) = std::max<std::uint16_t>(xz.values(x, b), static_cast<std::uint16_t>(y));
      xz.occupied(x, b) = 1;
      zy.values(b, y) = std::max<std::uint16_t>(zy.values(b, y), static_cast<std::uint16_t>(x));
      zy.occupied(b, y) = 1;
    }
  }
  require(any, ErrorCode::kEmptyInput, "empty foreground mask");
  for (int x = 0; x < frame.width; ++x) {
    detail::interpolate_line(p.z_bins, [x](int i) { return std::pair{x, i}; }, xz.values, xz.occupied);
  }
  for (int y = 0; y < frame.height; ++y) {
    detail::interpolate_line(p.z_bins, [y](int i) { return std::pair{i, y}; }, zy.values, zy.occupied);
  }
  return s;
}

// Plane coordinates of a 4-D point in the given view.
inline std::pair<int, int> plane_coords(const Stip& s, PlaneView v, const ProjectionParams& p) {
  switch (v) {
    case PlaneView::kXY: return {s.x, s.y};
    case PlaneView::kXZ: return {s.x, p.bin(s.z)};
    case PlaneView::kZY: return {p.bin(s.z), s.y};
  }
  return {0, 0};
}

// ---------------------------------------------------------------------------
// Contours

struct Point {
  int x = 0;
  int y = 0;
  bool operator==(const Point&) const = default;
};

// Moore-neighbour tracing of the outer boundary of the component that
// contains `start`, which must be its first pixel in raster order. Stops
// when the step from `start` to the second contour pixel repeats.
template <typename InComponent>
std::vector<Point> trace_outer_contour(Point start, InComponent inside) {
  // Clockwise (y down) starting west.
  static constexpr std::array<Point, 8> kDirs = {
      Point{-1, 0}, Point{-1, -1}, Point{0, -1}, Point{1, -1}, Point{1, 0}, Point{1, 1}, Point{0, 1}, Point{-1, 1}};
  auto dir_index = [](Point from, Point to) {
    for (int i = 0; i < 8; ++i)
      if (from.x + kDirs[static_cast<std::size_t>(i)].x == to.x && from.y + kDirs[static_cast<std::size_t>(i)].y == to.y)
        return i;
    return 0;
  };
  std::vector<Point> contour{start};
  Point cur = start, back{start.x - 1, start.y};
  std::optional<Point> second;
  for (std::size_t guard = 0; guard < (1u << 26); ++guard) {
    const int bi = dir_index(cur, back);
    bool found = false;
    Point prev = back;
    const Point from = cur;
    for (int k = 1; k <= 8; ++k) {
      const auto& d = kDirs[static_cast<std::size_t>((bi + k) % 8)];
      const Point n{cur.x + d.x, cur.y + d.y};
      if (inside(n.x, n.y)) {
        back = prev;
        cur = n;
        found = true;
        break;
      }
      prev = n;
    }
    if (!found) break;  // isolated pixel
    if (!second) {
      second = cur;
    } else if (from == start && cur == *second) {
      contour.pop_back();
      break;
    }
    contour.push_back(cur);
  }
  return contour;
}

// Walks an open contour accumulating arc length (1 per axial step, sqrt(2)
// per diagonal step) and keeps the first point plus one point each time
// the length since the last kept point reaches `lambda`.
inline std::vector<Point> sample_contour(std::span<const Point> contour, double lambda) {
  require(lambda >= 1.0, ErrorCode::kInvalidArgument, "lambda must be >= 1");
  std::vector<Point> out;
  if (contour.empty()) return out;
  out.push_back(contour.front());
  double acc = 0.0;
  for (std::size_t i = 1; i < contour.size(); ++i) {
    const bool diagonal = contour[i].x != contour[i - 1].x && contour[i].y != contour[i - 1].y;
    acc += diagonal ? std::sqrt(2.0) : 1.0;
    if (acc >= lambda) {
      out.push_back(contour[i]);
      acc = 0.0;
    }
  }
  return out;
}

// Samples along the outer contour of every 8-connected component of a
// binary silhouette, components in label order.
inline std::vector<Point> sample_silhouette(const BinaryMask& silhouette, double lambda) {
  const auto lab = label_components(silhouette, Connectivity::kEight);
  std::vector<Point> out;
  std::vector<bool> seen(lab.areas.size(), false);
  for (int y = 0; y < silhouette.height; ++y) {
    for (int x = 0; x < silhouette.width; ++x) {
      const auto l = lab.labels(x, y);
      if (l == 0 || seen[static_cast<std::size_t>(l - 1)]) continue;
      seen[static_cast<std::size_t>(l - 1)] = true;
      const auto contour = trace_outer_contour(
          Point{x, y}, [&](int px, int py) { return lab.labels.contains(px, py) && lab.labels(px, py) == l; });
      const auto samples = sample_contour(contour, lambda);
      out.insert(out.end(), samples.begin(), samples.end());
    }
  }
  return out;
}

// Contour samples of all three views lifted to 4-D. Side-view samples take
// their missing image coordinate from the stored value; lifted points that
// do not land on the xy foreground are dropped. Duplicates keep their first
// occurrence (xy, then xz, then zy).
inline std::vector<Stip> sample_contour_candidates(const PlaneSet& planes, int frame_index, double lambda,
                                                   const ProjectionParams& p) {
  require(lambda >= 1.0, ErrorCode::kInvalidArgument, "lambda must be >= 1");
  const auto& xy = planes[PlaneView::kXY];
  require(count_set(xy.occupied) > 0, ErrorCode::kEmptyInput, "empty silhouette");
  std::vector<Stip> out;
  std::unordered_set<std::uint64_t> seen;
  auto emit = [&](int x, int y, int z) {
    if (!xy.occupied.contains(x, y) || xy.occupied(x, y) == 0) return;
    const auto key = (static_cast<std::uint64_t>(x) << 40) | (static_cast<std::uint64_t>(y) << 20) |
                     static_cast<std::uint64_t>(z);
    if (!seen.insert(key).second) return;
    out.push_back(Stip{x, y, z, frame_index, StipKind::kCandidate});
  };
  for (const auto& pt : sample_silhouette(xy.occupied, lambda)) emit(pt.x, pt.y, xy.values(pt.x, pt.y));
  const auto& xz = planes[PlaneView::kXZ];
  for (const auto& pt : sample_silhouette(xz.occupied, lambda)) emit(pt.x, xz.values(pt.x, pt.y), p.lift(pt.y));
  const auto& zy = planes[PlaneView::kZY];
  for (const auto& pt : sample_silhouette(zy.occupied, lambda)) emit(zy.values(pt.x, pt.y), pt.y, p.lift(pt.x));
  return out;
}

// ---------------------------------------------------------------------------
// Motion

inline BinaryMask motion_region(const PlaneMap& current, const PlaneMap& previous, double epsilon) {
  require(current.view == previous.view, ErrorCode::kInvalidArgument, "plane views differ");
  require_same_shape(current.values, previous.values, "plane maps");
  BinaryMask r(current.values.width, current.values.height);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = std::abs(static_cast<double>(current.values.data[i]) - previous.values.data[i]);
    r.data[i] = d > epsilon ? 1 : 0;
  }
  return r;
}

struct RefinedMotion {
  BinaryMask mask;
  std::optional<Box> box;
};

// Closing, then every component with area > keep_ratio * largest area is
// kept; the box spans all kept components.
inline RefinedMotion refine_motion(const BinaryMask& region, int disk_radius, double keep_ratio = 0.8) {
  RefinedMotion out{BinaryMask(region.width, region.height), std::nullopt};
  if (count_set(region) == 0) return out;
  const auto closed = close_disk(region, disk_radius);
  const auto lab = label_components(closed, Connectivity::kEight);
  std::size_t largest = 0;
  for (auto a : lab.areas) largest = std::max(largest, a);
  std::vector<bool> keep(lab.areas.size());
  for (std::size_t i = 0; i < keep.size(); ++i)
    keep[i] = static_cast<double>(lab.areas[i]) > keep_ratio * static_cast<double>(largest);
  for (int y = 0; y < region.height; ++y) {
    for (int x = 0; x < region.width; ++x) {
      const auto l = lab.labels(x, y);
      if (l == 0 || !keep[static_cast<std::size_t>(l - 1)]) continue;
      out.mask(x, y) = 1;
      if (!out.box) out.box = Box{x, y, x, y};
      else out.box->expand(x, y);
    }
  }
  return out;
}

struct AccumulatedMotion {
  Grid<std::uint32_t> counts;
  RefinedMotion refined;
};

inline AccumulatedMotion accumulate_motion(std::span<const BinaryMask> regions, int disk_radius,
                                           double keep_ratio = 0.8) {
  require(!regions.empty(), ErrorCode::kEmptyInput, "no motion regions to accumulate");
  AccumulatedMotion out;
  out.counts = Grid<std::uint32_t>(regions.front().width, regions.front().height, 0);
  for (const auto& r : regions) {
    require_same_shape(r, regions.front(), "motion regions");
    for (std::size_t i = 0; i < r.size(); ++i) out.counts.data[i] += r.data[i] != 0 ? 1u : 0u;
  }
  BinaryMask any(out.counts.width, out.counts.height);
  for (std::size_t i = 0; i < any.size(); ++i) any.data[i] = out.counts.data[i] > 0 ? 1 : 0;
  out.refined = refine_motion(any, disk_radius, keep_ratio);
  return out;
}

// ---------------------------------------------------------------------------
// Selection

struct MotionBoxes {
  std::array<std::optional<Box>, 3> boxes;

  const std::optional<Box>& operator[](PlaneView v) const { return boxes[static_cast<std::size_t>(v)]; }
  std::optional<Box>& operator[](PlaneView v) { return boxes[static_cast<std::size_t>(v)]; }
  bool complete() const { return boxes[0] && boxes[1] && boxes[2]; }
};

// Keeps candidates whose three projections fall inside the three boxes.
// With any box missing the result is empty; the shape-level fallback for
// motionless sequences lives in detect_stips.
inline std::vector<Stip> select_stips(std::span<const Stip> candidates, const MotionBoxes& boxes, StipKind kind,
                                      const ProjectionParams& p) {
  std::vector<Stip> out;
  if (!boxes.complete()) return out;
  for (const auto& c : candidates) {
    bool inside = true;
    for (auto v : kViews) {
      const auto [u, w] = plane_coords(c, v, p);
      if (!boxes[v]->contains(u, w)) {
        inside = false;
        break;
      }
    }
    if (!inside) continue;
    Stip s = c;
    s.kind = kind;
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Whole-sequence detection

struct DetectParams {
  double lambda = 3.0;
  double epsilon = 50.0;
  int disk_radius = 5;
  double keep_ratio = 0.8;
  ProjectionParams projection;
};

struct Detection {
  // All lists are frame-major; within a frame, candidate order.
  std::vector<Stip> candidates;
  std::vector<Stip> motion;
  std::vector<Stip> shape;
  // Per frame; frame 0 has no predecessor and no boxes.
  std::vector<MotionBoxes> frame_boxes;
  MotionBoxes shape_boxes;
  bool shape_fallback = false;
};

// Runs detection over one sequence given its per-frame foreground masks.
// The shape-level box of each view is widened to include every per-frame
// motion box so that motion-based points are always shape-based too.
inline Detection detect_stips(const DepthSequence& seq, std::span<const BinaryMask> masks, const DetectParams& params) {
  validate(seq);
  require(masks.size() == seq.frames.size(), ErrorCode::kDimensionMismatch, "one foreground mask per frame required");
  Detection det;
  det.frame_boxes.resize(seq.frames.size());
  std::vector<std::vector<Stip>> per_frame(seq.frames.size());
  std::array<std::vector<BinaryMask>, 3> regions;
  PlaneSet prev;
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    const auto& frame = seq.frames[f];
    require_same_shape(frame, masks[f], "frame and foreground mask");
    const bool has_fg = count_set(masks[f]) > 0;
    PlaneSet planes = has_fg ? project_foreground(frame, masks[f], params.projection)
                             : empty_planes(frame.width, frame.height, params.projection);
    if (has_fg) per_frame[f] = sample_contour_candidates(planes, static_cast<int>(f), params.lambda, params.projection);
    if (f > 0) {
      MotionBoxes boxes;
      for (auto v : kViews) {
        auto r = motion_region(planes[v], prev[v], params.epsilon);
        boxes[v] = refine_motion(r, params.disk_radius, params.keep_ratio).box;
        regions[static_cast<std::size_t>(v)].push_back(std::move(r));
      }
      det.frame_boxes[f] = boxes;
      auto selected = select_stips(per_frame[f], boxes, StipKind::kMotion, params.projection);
      det.motion.insert(det.motion.end(), selected.begin(), selected.end());
    }
    prev = std::move(planes);
  }
  for (const auto& c : per_frame) det.candidates.insert(det.candidates.end(), c.begin(), c.end());

  for (auto v : kViews) {
    auto acc = accumulate_motion(regions[static_cast<std::size_t>(v)], params.disk_radius, params.keep_ratio);
    std::optional<Box> box = acc.refined.box;
    if (box) {
      for (const auto& fb : det.frame_boxes)
        if (fb.complete()) box = box_union(box, fb[v]);
    }
    det.shape_boxes[v] = box;
  }
  if (det.shape_boxes.complete()) {
    det.shape = select_stips(det.candidates, det.shape_boxes, StipKind::kShape, params.projection);
  } else {
    det.shape_fallback = true;
    det.shape = det.candidates;
    for (auto& s : det.shape) s.kind = StipKind::kShape;
  }
  return det;
}

// One "f x y z kind" line per point.
inline void write_stips(std::ostream& out, std::span<const Stip> stips) {
  for (const auto& s : stips) out << s.f << ' ' << s.x << ' ' << s.y << ' ' << s.z << ' ' << to_string(s.kind) << '\n';
}

}  // namespace depthact
