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

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "depthact/background.hpp"
#include "depthact/classify.hpp"
#include "depthact/dataset.hpp"
#include "depthact/descriptor.hpp"
#include "depthact/encode.hpp"
#include "depthact/pipeline.hpp"
#include "depthact/rng.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

namespace depthact {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

int g_jobs = 1;

Outcome background_oracle() {
  const auto t0 = Clock::now();
  double worst_recovery = 1.0, worst_iou = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = synth_action(testing::random_scene(seed), seed);
    const std::span<const DepthFrame> frames(r.sequence.frames);
    const auto p = probability_map(frames);
    const auto bg = build_background(frames, 0.8);
    std::size_t eligible = 0, recovered = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.data[i] > 0.8) continue;
      ++eligible;
      recovered += bg.depth.data[i] == r.background.data[i] ? 1 : 0;
    }
    worst_recovery = std::min(worst_recovery, eligible ? static_cast<double>(recovered) / eligible : 1.0);
    for (std::size_t f = 0; f < frames.size(); ++f)
      worst_iou = std::min(worst_iou, oracle::iou(extract_foreground(bg, frames[f], 0.01), r.masks[f]));
  }
  const double secs = seconds_since(t0);
  return {worst_recovery >= 0.99 && worst_iou >= 0.95 && secs < 30.0,
          fmt("worst background recovery %.4f (>= 0.99), worst frame IoU %.4f (>= 0.95), %.2f s (< 30)",
              worst_recovery, worst_iou, secs)};
}

Outcome ccl_equivalence() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto m = oracle::random_mask(rng, 64, 64, 0.1 + 0.8 * rng.uniform());
    for (int conn : {4, 8})
      if (!oracle::same_partition(label_components(m, static_cast<Connectivity>(conn)), oracle::flood_fill(m, conn)))
        ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0, fmt("%d mismatches over 2000 labelings, %.2f s (< 10)", mismatches, secs)};
}

Outcome subset_invariant() {
  const PipelineConfig c;
  std::size_t violations = 0, motion = 0, shape = 0, frames_with_motion = 0;
  for (std::uint64_t seed = 100; seed < 200; ++seed) {
    auto seq = synth_action(testing::random_scene(seed), seed).sequence;
    const auto feat = detect_sequence(seq, c);
    std::map<int, std::set<std::tuple<int, int, int>>> by_frame;
    for (const auto& s : feat.detection.shape) by_frame[s.f].emplace(s.x, s.y, s.z);
    std::set<int> seen;
    for (const auto& s : feat.detection.motion) {
      seen.insert(s.f);
      if (!by_frame[s.f].contains({s.x, s.y, s.z})) ++violations;
    }
    motion += feat.detection.motion.size();
    shape += feat.detection.shape.size();
    frames_with_motion += seen.size();
  }
  return {violations == 0 && motion > 0,
          fmt("%zu violations; %zu motion points in %zu frames, %zu shape points over 100 sequences", violations,
              motion, frames_with_motion, shape)};
}

Cube mirror(const Cube& c, int axis) {
  Cube m(c.side);
  const int s = c.side;
  for (int t = 0; t < s; ++t)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        m(x, y, t) = c(axis == 0 ? s - 1 - x : x, axis == 1 ? s - 1 - y : y, axis == 2 ? s - 1 - t : t);
  return m;
}

Outcome descriptor_invariants() {
  Rng rng(4);
  const DescriptorParams p;
  double worst_sum = 0, worst_mirror = 0, worst_scale = 0;
  bool negative = false, stv_ok = true;
  for (int trial = 0; trial < 500; ++trial) {
    const int side = 3 + 2 * static_cast<int>(rng.index(5));
    Cube cube(side);
    const double amp = std::exp(rng.uniform(-3.0, 3.0));
    for (auto& v : cube.v) v = amp * rng.normal();
    const auto d = lsk3d(cube, p).values;
    double sum = 0;
    for (double v : d) {
      negative = negative || v < 0.0;
      sum += v;
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    const int axis = trial % 3;
    const auto dm = lsk3d(mirror(cube, axis), p).values;
    for (int t = 0; t < side; ++t)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const int mx = axis == 0 ? side - 1 - x : x, my = axis == 1 ? side - 1 - y : y,
                    mt = axis == 2 ? side - 1 - t : t;
          worst_mirror = std::max(worst_mirror, std::abs(dm[cube.index(x, y, t)] - d[cube.index(mx, my, mt)]));
        }

    const double z0 = rng.uniform(500.0, 4500.0), zbar = rng.uniform(500.0, 4500.0);
    const double r = static_cast<double>(rng.integer(1, 15));
    const double lhs = adaptive_scale(z0, zbar, r) * zbar;
    worst_scale = std::max(worst_scale, std::abs(lhs - z0 * r) / (z0 * r));

    std::vector<Stip> pts, moved;
    const int n = rng.integer(1, 60);
    const std::array<int, 4> shift{rng.integer(-20, 20), rng.integer(-20, 20), rng.integer(-300, 300),
                                   rng.integer(-5, 5)};
    for (int i = 0; i < n; ++i) {
      pts.push_back({rng.integer(30, 130), rng.integer(30, 100), rng.integer(800, 4000), rng.integer(6, 40)});
      moved.push_back({pts.back().x + shift[0], pts.back().y + shift[1], pts.back().z + shift[2],
                       pts.back().f + shift[3]});
    }
    const auto a = stv(pts);
    stv_ok = stv_ok && a == stv(moved);
    for (const auto& v : a)
      for (double x : v) stv_ok = stv_ok && x >= 0.0 && x <= 1.0;
  }
  return {!negative && worst_sum <= 1e-9 && worst_mirror <= 1e-6 && worst_scale <= 1e-9 && stv_ok,
          fmt("max |sum-1| %.2e (<= 1e-9), negative entries: %s, max mirror error %.2e (<= 1e-6), max scale "
              "identity error %.2e (<= 1e-9), STV bounded and translation invariant: %s",
              worst_sum, negative ? "yes" : "no", worst_mirror, worst_scale, stv_ok ? "yes" : "no")};
}

Outcome kernel_properties() {
  Rng rng(5);
  double worst_eig = INFINITY, worst_hom = 0, worst_g1 = 0;
  bool symmetric = true;
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = 1 + rng.index(20);
    const auto d = 2 + rng.index(60);
    const double gamma = trial == 0 ? 1.0 : rng.uniform(0.2, 1.5);
    std::vector<Vector> xs(n, Vector(d));
    for (auto& x : xs) {
      double s = 0;
      for (auto& v : x) s += (v = rng.uniform() < 0.3 ? 0.0 : rng.uniform());
      if (s > 0)
        for (auto& v : x) v /= s;
    }
    const auto g = gram_matrix(xs, gamma);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g[i * n + j];
        symmetric = symmetric && g[i * n + j] == g[j * n + i];
      }
    const double trace = m.trace();
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff();
    worst_eig = std::min(worst_eig, trace > 0 ? min_eig / trace : 0.0);

    const double c = std::exp(rng.uniform(-3.0, 3.0));
    for (std::size_t i = 0; i + 1 < n; ++i) {
      Vector a = xs[i], b = xs[i + 1];
      for (auto& v : a) v *= c;
      for (auto& v : b) v *= c;
      const double k = chi2_kernel(xs[i], xs[i + 1], gamma), want = std::pow(c, gamma) * k;
      if (want > 0) worst_hom = std::max(worst_hom, std::abs(chi2_kernel(a, b, gamma) - want) / want);
    }
    for (int s = 0; s < 20; ++s) {
      const double a = std::exp(rng.uniform(-10.0, 5.0)), b = std::exp(rng.uniform(-10.0, 5.0));
      const double want = 2 * a * b / (a + b);
      worst_g1 = std::max(worst_g1, std::abs(chi2_kernel(Vector{a}, Vector{b}, 1.0) - want) / want);
    }
  }
  return {worst_eig >= -1e-8 && symmetric && worst_hom <= 1e-9 && worst_g1 <= 1e-12,
          fmt("min eigenvalue / trace %.2e (>= -1e-8), symmetric: %s, homogeneity error %.2e (<= 1e-9), gamma=1 "
              "error %.2e (<= 1e-12)",
              worst_eig, symmetric ? "yes" : "no", worst_hom, worst_g1)};
}

Outcome dimension_checks() {
  Rng rng(6);
  bool fused_ok = fuse(std::vector<Vector>(1, Vector(2000, 0.0)), Vector(1000, 0.0)).values.size() == 3000;
  for (int l = 1; l <= 4; ++l) {
    const int k1 = rng.integer(2, 300), k2 = rng.integer(2, 300);
    fused_ok = fused_ok && fuse(std::vector<Vector>(static_cast<std::size_t>(l), Vector(static_cast<std::size_t>(k1))),
                                Vector(static_cast<std::size_t>(k2)))
                                   .values.size() == static_cast<std::size_t>(l * k1 + k2);
  }
  const int k1 = 64;
  Codebook cb;
  cb.k = k1;
  cb.d = 2;
  for (int i = 0; i < 2 * k1; ++i) cb.centroids.push_back(rng.normal());
  std::vector<Stip> stips;
  std::vector<Vector> descs;
  for (int i = 0; i < 50; ++i) {
    stips.push_back({rng.integer(0, 159), rng.integer(0, 119), 2000, rng.integer(0, 19)});
    descs.push_back({rng.normal(), rng.normal()});
  }
  const std::vector<PyramidLevel> levels = {{1, 1, 1}, {2, 2, 1}, {3, 3, 2}};
  const auto dim = stp_encode(stips, descs, cb, levels, {160, 120, 20}).values.size();
  const bool stp_ok = dim == static_cast<std::size_t>(21 * k1);
  return {fused_ok && stp_ok,
          fmt("fused length L*k1+k2: %s; STP with levels 1x1x1, 2x2x1, 3x3x2 and k1=%d gives %zu = %zu*k1 "
              "dimensions (required 21*k1 = %d)",
              fused_ok ? "ok" : "wrong", k1, dim, dim / k1, 21 * k1)};
}

// Cross-subject synthetic benchmark shared by the end-to-end criteria.
struct Benchmark {
  PipelineConfig config;
  SplitData split;
  std::vector<DepthSequence> all;
};

const Benchmark& benchmark() {
  static const Benchmark b = [] {
    Benchmark out;
    out.config.k1 = 64;
    out.config.k2 = 32;
    out.config.scales = {3, 5};
    out.config.seed = 7;
    out.all = make_benchmark(BenchmarkSpec{}, 7);
    out.split = split_dataset(out.all, {{1, 2, 3}, {4, 5, 6}});
    return out;
  }();
  return b;
}

const std::vector<std::string> kOutputFiles = {"model.modl",    "representations_train.csv",
                                               "representations_test.csv", "confusion.csv",
                                               "report.txt",    "manifest.txt"};

std::filesystem::path run_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "depthact_acceptance" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

PipelineRun run_and_write(const std::filesystem::path& dir, int jobs) {
  const auto& b = benchmark();
  auto run = run_pipeline(b.split.train, b.split.test, b.config, jobs);
  const std::vector<std::pair<std::string, std::string>> extra = {{"train_subjects", "1,2,3"},
                                                                  {"test_subjects", "4,5,6"}};
  write_pipeline_outputs(dir, run, make_manifest("pipeline", b.config, extra, b.all));
  return run;
}

std::vector<std::string> differing_files(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::vector<std::string> out;
  for (const auto& f : kOutputFiles)
    if (binio::read_file(a / f) != binio::read_file(b / f)) out.push_back(f);
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out.empty() ? "none" : out;
}

Outcome end_to_end() {
  const auto t0 = Clock::now();
  const auto a = run_dir("e2e_a"), b = run_dir("e2e_b");
  const auto run = run_and_write(a, g_jobs);
  const double secs = seconds_since(t0);
  run_and_write(b, g_jobs);
  const auto diff = differing_files(a, b);
  const double acc = run.evaluation.accuracy;
  return {acc >= 0.95 && secs < 300.0 && diff.empty(),
          fmt("accuracy %.4f (>= 0.95) on %zu test sequences, %.1f s (< 300), rerun differing files: %s", acc,
              run.test.reps.size(), secs, join(diff).c_str())};
}

Outcome robustness() {
  const auto& b = benchmark();
  const auto run = run_pipeline(b.split.train, b.split.test, b.config, g_jobs);
  const double base = run.evaluation.accuracy;
  const auto levels = default_pepper_levels();
  const auto pepper =
      robustness_sweep(run.trained.model, b.split.test, b.config, PerturbationMode::kPepper, levels, g_jobs);
  const auto occl =
      robustness_sweep(run.trained.model, b.split.test, b.config, PerturbationMode::kOcclusion, {}, g_jobs);
  bool ok = pepper.size() == 7 && occl.size() == 8 && pepper[0].accuracy == base;
  std::string table = "pepper";
  for (std::size_t i = 0; i < pepper.size(); ++i) {
    table += fmt(" %s%%=%.3f", pepper[i].level.c_str(), pepper[i].accuracy);
    if (i > 0) ok = ok && pepper[i].accuracy - pepper[i - 1].accuracy <= 0.05 + 1e-12;
  }
  table += "; occlusion";
  for (const auto& r : occl) {
    table += fmt(" %s=%.3f", r.level.c_str(), r.accuracy);
    ok = ok && r.accuracy <= base + 0.02 + 1e-12;
  }
  return {ok, fmt("baseline %.3f; ", base) + table};
}

Outcome determinism() {
  const auto a = run_dir("det_a"), b = run_dir("det_b");
  run_and_write(a, 1);
  run_and_write(b, 2);
  const auto diff = differing_files(a, b);
  return {diff.empty() && binio::read_file(a / "manifest.txt") == binio::read_file(b / "manifest.txt"),
          fmt("two runs (1 and 2 workers) with identical manifests; differing files: %s", join(diff).c_str())};
}

const std::vector<std::function<Outcome()>> kCriteria = {background_oracle, ccl_equivalence,      subset_invariant,
                                                         descriptor_invariants, kernel_properties, dimension_checks,
                                                         end_to_end,        robustness,           determinism};

}  // namespace
}  // namespace depthact

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      which.push_back(std::atoi(argv[++i]));
    } else if (arg == "--jobs" && i + 1 < argc) {
      depthact::g_jobs = std::max(1, std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: acceptance [--criterion N]... [--jobs N]\n");
      return 2;
    }
  }
  if (which.empty())
    for (int n = 1; n <= static_cast<int>(depthact::kCriteria.size()); ++n) which.push_back(n);
  int failed = 0;
  for (int n : which) {
    if (n < 1 || n > static_cast<int>(depthact::kCriteria.size())) {
      std::fprintf(stderr, "no criterion %d\n", n);
      return 2;
    }
    depthact::Outcome o;
    try {
      o = depthact::kCriteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", n, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
