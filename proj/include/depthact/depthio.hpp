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

// Depth sequences: data model, DSEQ/PGM I/O, a synthetic action generator
// used as an oracle substrate, and the occlusion/pepper perturbations used
// by robustness sweeps.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "depthact/binio.hpp"
#include "depthact/error.hpp"
#include "depthact/grid.hpp"
#include "depthact/rng.hpp"

namespace depthact {

// Millimetres, 0 = no reading / far field.
using DepthFrame = Grid<std::uint16_t>;

struct DepthSequence {
  std::vector<DepthFrame> frames;
  std::int32_t subject_id = 0;
  std::int32_t action_label = 0;
  std::string name;

  int width() const { return frames.empty() ? 0 : frames.front().width; }
  int height() const { return frames.empty() ? 0 : frames.front().height; }
  int size() const { return static_cast<int>(frames.size()); }

  std::uint16_t at(int x, int y, int f) const { return frames[static_cast<std::size_t>(f)](x, y); }

  bool operator==(const DepthSequence&) const = default;
};

inline void validate(const DepthSequence& seq) {
  require(!seq.frames.empty(), ErrorCode::kEmptySequence, "sequence has no frames");
  require(seq.frames.size() >= 2, ErrorCode::kEmptySequence, "sequence needs at least 2 frames");
  for (const auto& f : seq.frames) {
    require(f.same_shape(seq.frames.front()), ErrorCode::kDimensionMismatch, "frames differ in size");
    require(f.size() == static_cast<std::size_t>(f.width) * static_cast<std::size_t>(f.height),
            ErrorCode::kDimensionMismatch, "frame buffer does not match its size");
  }
}

// Octant of the (x, y, t) volume, numbered 1 + bit_x + 2*bit_y + 4*bit_t
// where a bit is set for the upper half [mid, dim).
struct OcclusionType {
  int index = 1;
};

// ---------------------------------------------------------------------------
// DSEQ

inline constexpr char kDseqMagic[4] = {'D', 'S', 'E', 'Q'};
inline constexpr std::uint16_t kDseqVersion = 1;

inline std::string encode_dseq(const DepthSequence& seq) {
  validate(seq);
  require(seq.width() <= 0xFFFF && seq.height() <= 0xFFFF, ErrorCode::kInvalidArgument, "frame too large for DSEQ");
  binio::Writer w;
  w.bytes({kDseqMagic, 4});
  w.put<std::uint16_t>(kDseqVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(seq.width()));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(seq.height()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(seq.frames.size()));
  w.put<std::int32_t>(seq.subject_id);
  w.put<std::int32_t>(seq.action_label);
  for (const auto& f : seq.frames)
    for (auto v : f.data) w.put<std::uint16_t>(v);
  return w.buffer();
}

inline DepthSequence decode_dseq(std::string_view bytes, std::string name = {}) {
  if (bytes.size() < 20 || bytes.substr(0, 4) != std::string_view(kDseqMagic, 4))
    fail(ErrorCode::kMalformedHeader, "missing DSEQ magic");
  binio::Reader r(bytes.substr(4));
  const auto version = r.get<std::uint16_t>();
  require(version == kDseqVersion, ErrorCode::kMalformedHeader, "unsupported DSEQ version " + std::to_string(version));
  const int width = r.get<std::uint16_t>();
  const int height = r.get<std::uint16_t>();
  const auto count = r.get<std::uint32_t>();
  DepthSequence seq;
  seq.subject_id = r.get<std::int32_t>();
  seq.action_label = r.get<std::int32_t>();
  seq.name = std::move(name);
  require(count != 0, ErrorCode::kEmptySequence, "empty sequence");
  require(width > 0 && height > 0, ErrorCode::kMalformedHeader, "zero frame size");
  const std::size_t pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (r.remaining() != pixels * count * 2)
    fail(ErrorCode::kTruncatedPayload, "expected " + std::to_string(pixels * count * 2) + " payload bytes, found " +
                                           std::to_string(r.remaining()));
  seq.frames.reserve(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    DepthFrame f(width, height);
    for (auto& v : f.data) v = r.get<std::uint16_t>();
    seq.frames.push_back(std::move(f));
  }
  require(seq.frames.size() >= 2, ErrorCode::kEmptySequence, "sequence needs at least 2 frames");
  return seq;
}

// ---------------------------------------------------------------------------
// PGM (binary P5, 16-bit big-endian samples)

inline std::string encode_pgm16(const Grid<std::uint16_t>& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n65535\n";
  out.reserve(out.size() + img.size() * 2);
  for (auto v : img.data) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xFF));
  }
  return out;
}

inline Grid<std::uint16_t> decode_pgm16(std::string_view bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> long {
    skip_space();
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) fail(ErrorCode::kMalformedHeader, "bad PGM header");
    return std::stol(std::string(bytes.substr(start, pos - start)));
  };
  if (bytes.substr(0, 2) != "P5") fail(ErrorCode::kMalformedHeader, "not a binary PGM");
  pos = 2;
  const long w = number();
  const long h = number();
  const long maxval = number();
  require(w > 0 && h > 0 && w <= 0xFFFF && h <= 0xFFFF, ErrorCode::kMalformedHeader, "bad PGM size");
  require(maxval == 65535, ErrorCode::kMalformedHeader, "PGM maxval must be 65535");
  require(pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos])), ErrorCode::kMalformedHeader,
          "bad PGM header terminator");
  ++pos;
  Grid<std::uint16_t> img(static_cast<int>(w), static_cast<int>(h));
  if (bytes.size() - pos < img.size() * 2) fail(ErrorCode::kTruncatedPayload, "PGM payload too short");
  for (std::size_t i = 0; i < img.size(); ++i) {
    const auto hi = static_cast<unsigned char>(bytes[pos + 2 * i]);
    const auto lo = static_cast<unsigned char>(bytes[pos + 2 * i + 1]);
    img.data[i] = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return img;
}

inline void write_pgm16(const std::filesystem::path& path, const Grid<std::uint16_t>& img) {
  binio::write_file(path, encode_pgm16(img));
}

// ---------------------------------------------------------------------------
// Sequence files

inline void save_sequence(const DepthSequence& seq, const std::filesystem::path& path) {
  binio::write_file(path, encode_dseq(seq));
}

// Accepts a DSEQ file or a directory of P5 frames (read in lexicographic
// filename order).
inline DepthSequence load_sequence(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    require(!files.empty(), ErrorCode::kEmptySequence, "no PGM frames in " + path.string());
    DepthSequence seq;
    seq.name = path.filename().string();
    for (const auto& f : files) {
      auto frame = decode_pgm16(binio::read_file(f));
      if (!seq.frames.empty() && !frame.same_shape(seq.frames.front()))
        fail(ErrorCode::kDimensionMismatch, f.string() + " differs in size from the first frame");
      seq.frames.push_back(std::move(frame));
    }
    require(seq.frames.size() >= 2, ErrorCode::kEmptySequence, "sequence needs at least 2 frames");
    return seq;
  }
  return decode_dseq(binio::read_file(path), path.stem().string());
}

// ---------------------------------------------------------------------------
// Synthetic actions

// Elliptical blob inscribed in a width x height box. Position is the box's
// top-left corner at frame 0; depth is the nearest point, increasing by
// `dome_mm` towards the rim.
struct SynthBlob {
  int width = 20;
  int height = 20;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double depth_mm = 2000.0;
  double vz_mm = 0.0;
  double dome_mm = 0.0;
  int first_frame = 0;
  int last_frame = -1;  // inclusive; -1 runs to the end

  bool visible(int f) const { return f >= first_frame && (last_frame < 0 || f <= last_frame); }
  int left(int f) const { return static_cast<int>(std::lround(x + vx * f)); }
  int top(int f) const { return static_cast<int>(std::lround(y + vy * f)); }
  double depth(int f) const { return depth_mm + vz_mm * f; }
};

struct SynthSpec {
  int width = 160;
  int height = 120;
  int frames = 20;
  std::uint16_t background_mm = 4000;
  // Pixels with no reading in the empty scene.
  std::optional<Box> far_field;
  SynthBlob actor;
  std::optional<SynthBlob> object;
  // Uniform integer noise in [-noise_mm, noise_mm] on blob pixels.
  int noise_mm = 0;
  std::int32_t subject_id = 0;
  std::int32_t action_label = 0;
  std::string name = "synth";
};

struct SynthResult {
  DepthSequence sequence;
  DepthFrame background;
  std::vector<BinaryMask> masks;
  std::vector<std::optional<Box>> boxes;
};

namespace detail {

inline void check_blob(const SynthSpec& spec, const SynthBlob& b, const char* what) {
  require(b.width > 0 && b.height > 0, ErrorCode::kInvalidArgument, std::string(what) + " has no area");
  for (int f = 0; f < spec.frames; ++f) {
    if (!b.visible(f)) continue;
    const int l = b.left(f), t = b.top(f);
    require(l >= 0 && t >= 0 && l + b.width <= spec.width && t + b.height <= spec.height, ErrorCode::kInvalidArgument,
            std::string(what) + " leaves the frame at frame " + std::to_string(f));
    const double far = b.depth(f) + b.dome_mm + spec.noise_mm;
    require(b.depth(f) - spec.noise_mm >= 1.0, ErrorCode::kInvalidArgument, std::string(what) + " depth must be positive");
    require(far < spec.background_mm, ErrorCode::kInvalidArgument,
            std::string(what) + " depth must stay in front of the background");
  }
}

inline bool blob_covers(const SynthBlob& b, int f, int x, int y, double& depth) {
  const double cx = b.left(f) + (b.width - 1) / 2.0;
  const double cy = b.top(f) + (b.height - 1) / 2.0;
  const double rx = b.width / 2.0, ry = b.height / 2.0;
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  const double rr = dx * dx + dy * dy;
  if (rr > 1.0) return false;
  depth = b.depth(f) + b.dome_mm * rr;
  return true;
}

}  // namespace detail

inline SynthResult synth_action(const SynthSpec& spec, std::uint64_t seed) {
  require(spec.width > 0 && spec.height > 0, ErrorCode::kInvalidArgument, "empty scene");
  require(spec.frames >= 2, ErrorCode::kInvalidArgument, "need at least 2 frames");
  require(spec.noise_mm >= 0, ErrorCode::kInvalidArgument, "negative noise");
  detail::check_blob(spec, spec.actor, "actor");
  if (spec.object) detail::check_blob(spec, *spec.object, "object");

  SynthResult out;
  out.background = DepthFrame(spec.width, spec.height, spec.background_mm);
  if (spec.far_field) {
    for (int y = std::max(0, spec.far_field->y0); y <= std::min(spec.height - 1, spec.far_field->y1); ++y)
      for (int x = std::max(0, spec.far_field->x0); x <= std::min(spec.width - 1, spec.far_field->x1); ++x)
        out.background(x, y) = 0;
  }

  Rng rng(seed);
  auto& seq = out.sequence;
  seq.subject_id = spec.subject_id;
  seq.action_label = spec.action_label;
  seq.name = spec.name;
  for (int f = 0; f < spec.frames; ++f) {
    DepthFrame frame = out.background;
    BinaryMask mask(spec.width, spec.height);
    std::optional<Box> box;
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        double best = 0.0;
        bool hit = false;
        double d = 0.0;
        for (const SynthBlob* b : {&spec.actor, spec.object ? &*spec.object : nullptr}) {
          if (b == nullptr || !b->visible(f) || !detail::blob_covers(*b, f, x, y, d)) continue;
          if (!hit || d < best) best = d;
          hit = true;
        }
        if (!hit) continue;
        // Noise is drawn only for covered pixels so that a noise-free spec
        // never touches the generator.
        const int noise = spec.noise_mm > 0 ? rng.integer(-spec.noise_mm, spec.noise_mm) : 0;
        frame(x, y) = static_cast<std::uint16_t>(std::lround(best) + noise);
        mask(x, y) = 1;
        if (!box) box = Box{x, y, x, y};
        else box->expand(x, y);
      }
    }
    seq.frames.push_back(std::move(frame));
    out.masks.push_back(std::move(mask));
    out.boxes.push_back(box);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Perturbations

inline DepthSequence apply_occlusion(const DepthSequence& seq, OcclusionType type) {
  validate(seq);
  require(type.index >= 1 && type.index <= 8, ErrorCode::kInvalidArgument, "occlusion type must be in 1..8");
  const int bits = type.index - 1;
  const int want_x = bits & 1, want_y = (bits >> 1) & 1, want_t = (bits >> 2) & 1;
  const int mid_x = seq.width() / 2, mid_y = seq.height() / 2, mid_t = seq.size() / 2;
  DepthSequence out = seq;
  for (int f = 0; f < out.size(); ++f) {
    if ((f >= mid_t) != (want_t == 1)) continue;
    auto& frame = out.frames[static_cast<std::size_t>(f)];
    for (int y = 0; y < frame.height; ++y) {
      if ((y >= mid_y) != (want_y == 1)) continue;
      for (int x = 0; x < frame.width; ++x) {
        if ((x >= mid_x) == (want_x == 1)) frame(x, y) = 0;
      }
    }
  }
  return out;
}

// Zeroes exactly round(fraction * W * H) distinct pixels per frame.
inline DepthSequence add_pepper_noise(const DepthSequence& seq, double fraction, std::uint64_t seed) {
  validate(seq);
  require(fraction >= 0.0 && fraction <= 1.0, ErrorCode::kInvalidArgument, "pepper fraction must be in [0, 1]");
  DepthSequence out = seq;
  const std::size_t pixels = static_cast<std::size_t>(seq.width()) * static_cast<std::size_t>(seq.height());
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pixels)));
  if (count == 0) return out;
  Rng rng(seed);
  std::vector<std::size_t> order(pixels);
  for (auto& frame : out.frames) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Partial Fisher-Yates: the first `count` slots are a uniform sample.
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(order[i], order[i + rng.index(pixels - i)]);
      frame.data[order[i]] = 0;
    }
  }
  return out;
}

}  // namespace depthact
