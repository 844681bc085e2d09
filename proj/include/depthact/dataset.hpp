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

// Dataset directories (one `aAA_sSS_eEE.dseq` file per sequence),
// cross-subject splits, and the synthetic three-action benchmark.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "depthact/depthio.hpp"
#include "depthact/error.hpp"
#include "depthact/rng.hpp"

namespace depthact {

inline std::string sequence_filename(int action, int subject, int episode) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "a%02d_s%02d_e%02d.dseq", action, subject, episode);
  return buf;
}

struct SequenceName {
  int action = 0;
  int subject = 0;
  int episode = 0;
};

inline std::optional<SequenceName> parse_sequence_name(std::string_view name) {
  SequenceName n;
  char tail = 0;
  const std::string s(name);
  if (std::sscanf(s.c_str(), "a%d_s%d_e%d%c", &n.action, &n.subject, &n.episode, &tail) != 3) return std::nullopt;
  return n;
}

// Reads every `.dseq` file and every directory of PGM frames, in name
// order. PGM directories take subject and label from their name.
inline std::vector<DepthSequence> load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), ErrorCode::kIo, "dataset directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".dseq") files.push_back(e.path());
    else if (e.is_directory() && parse_sequence_name(e.path().filename().string())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorCode::kIo, "no sequences in " + dir.string());
  std::vector<DepthSequence> out;
  for (const auto& f : files) {
    auto seq = load_sequence(f);
    if (fs::is_directory(f)) {
      const auto n = parse_sequence_name(seq.name);
      seq.subject_id = n->subject;
      seq.action_label = n->action;
    }
    out.push_back(std::move(seq));
  }
  return out;
}

inline void save_dataset(const std::filesystem::path& dir, const std::vector<DepthSequence>& seqs) {
  std::filesystem::create_directories(dir);
  for (const auto& s : seqs) save_sequence(s, dir / (s.name + ".dseq"));
}

struct SplitSpec {
  std::set<int> train_subjects;
  std::set<int> test_subjects;

  void validate() const {
    require(!train_subjects.empty() && !test_subjects.empty(), ErrorCode::kUsage, "both splits need subjects");
    for (int s : train_subjects)
      require(!test_subjects.contains(s), ErrorCode::kUsage, "subject " + std::to_string(s) + " is in both splits");
  }
};

struct SplitData {
  std::vector<DepthSequence> train;
  std::vector<DepthSequence> test;
};

inline SplitData split_dataset(const std::vector<DepthSequence>& all, const SplitSpec& split) {
  split.validate();
  SplitData out;
  for (const auto& s : all) {
    if (split.train_subjects.contains(s.subject_id)) out.train.push_back(s);
    else if (split.test_subjects.contains(s.subject_id)) out.test.push_back(s);
  }
  require(!out.train.empty(), ErrorCode::kUsage, "no sequences for the training subjects");
  require(!out.test.empty(), ErrorCode::kUsage, "no sequences for the test subjects");
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

// Labels: 1 = actor moves up, 2 = actor moves right, 3 = static actor with
// an object appearing in front of it halfway through.
struct BenchmarkSpec {
  int subjects = 6;
  int repetitions = 4;
  int width = 160;
  int height = 120;
  int frames = 20;
  int noise_mm = 2;
};

inline constexpr int kBenchmarkClasses = 3;

inline SynthSpec benchmark_scene(const BenchmarkSpec& b, int action, int subject, int episode, std::uint64_t seed) {
  // Body proportions and depth depend on the subject only.
  Rng body(seed * 1000003ULL + static_cast<std::uint64_t>(subject) * 7919ULL);
  const int w = body.integer(20, 28);
  const int h = body.integer(26, 34);
  const double depth = body.uniform(1900.0, 2600.0);
  const double dome = body.uniform(60.0, 110.0);
  Rng rep(seed * 999983ULL + static_cast<std::uint64_t>(subject) * 131ULL + static_cast<std::uint64_t>(action) * 17ULL +
          static_cast<std::uint64_t>(episode));

  SynthSpec s;
  s.width = b.width;
  s.height = b.height;
  s.frames = b.frames;
  s.background_mm = 4000;
  s.far_field = Box{0, 0, b.width / 6, b.height / 8};
  s.noise_mm = b.noise_mm;
  s.subject_id = subject;
  s.action_label = action;
  s.name = sequence_filename(action, subject, episode);
  s.name.resize(s.name.size() - 5);
  SynthBlob a;
  a.width = w;
  a.height = h;
  a.depth_mm = depth;
  a.dome_mm = dome;
  const double travel = b.frames - 1;
  switch (action) {
    case 1: {
      a.vy = -rep.uniform(1.6, 2.2);
      a.vz_mm = rep.uniform(4.0, 8.0) * (rep.uniform() < 0.5 ? -1.0 : 1.0);
      a.x = rep.uniform(0.35, 0.55) * (b.width - w);
      a.y = b.height - h - rep.uniform(2.0, 6.0);
      break;
    }
    case 2: {
      a.vx = rep.uniform(2.4, 3.2);
      a.vz_mm = rep.uniform(4.0, 8.0) * (rep.uniform() < 0.5 ? -1.0 : 1.0);
      a.x = rep.uniform(20.0, 30.0);
      a.y = rep.uniform(0.45, 0.6) * (b.height - h);
      break;
    }
    default: {
      a.x = rep.uniform(0.35, 0.5) * (b.width - w);
      a.y = rep.uniform(0.35, 0.5) * (b.height - h);
      SynthBlob o;
      o.width = rep.integer(10, 14);
      o.height = rep.integer(10, 14);
      o.x = a.x + w * rep.uniform(0.4, 0.8);
      o.y = a.y + h * rep.uniform(0.4, 0.7);
      o.depth_mm = depth - rep.uniform(300.0, 500.0);
      o.dome_mm = 30.0;
      o.first_frame = b.frames / 2 + rep.integer(-2, 2);
      s.object = o;
      break;
    }
  }
  // Keep the moving actor within the frame.
  if (a.vz_mm < 0.0) a.depth_mm = std::max(a.depth_mm, -a.vz_mm * travel + 1200.0);
  s.actor = a;
  return s;
}

inline std::vector<DepthSequence> make_benchmark(const BenchmarkSpec& b, std::uint64_t seed) {
  std::vector<DepthSequence> out;
  for (int action = 1; action <= kBenchmarkClasses; ++action)
    for (int subject = 1; subject <= b.subjects; ++subject)
      for (int episode = 1; episode <= b.repetitions; ++episode) {
        const auto scene = benchmark_scene(b, action, subject, episode, seed);
        const std::uint64_t noise_seed = seed ^ (static_cast<std::uint64_t>(action) << 40) ^
                                         (static_cast<std::uint64_t>(subject) << 20) ^
                                         static_cast<std::uint64_t>(episode);
        out.push_back(synth_action(scene, noise_seed).sequence);
      }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

}  // namespace depthact
