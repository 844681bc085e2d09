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


#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "depthact/pipeline.hpp"

namespace fs = std::filesystem;
using namespace depthact;

namespace {

constexpr int kExitPipeline = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out;
};

std::set<int> parse_subjects(const std::string& text, const char* flag) {
  std::set<int> out;
  for (const auto& item : config_detail::split(text, ',')) {
    const auto t = config_detail::trim(item);
    if (t.empty()) continue;
    int v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
      fail(ErrorCode::kUsage, std::string("bad subject id '") + t + "' in " + flag);
    out.insert(v);
  }
  return out;
}

PipelineConfig load_config(const Common& c) {
  PipelineConfig cfg;
  if (!c.config_path.empty()) {
    std::string text;
    try {
      text = binio::read_file(c.config_path);
    } catch (const Error& e) {
      fail(ErrorCode::kUsage, e.what());
    }
    cfg = parse_config(text);
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) { binio::write_file(path, text); }

Grid<std::uint16_t> scale_probability(const ProbabilityMap& p) {
  Grid<std::uint16_t> g(p.width, p.height);
  for (std::size_t i = 0; i < p.data.size(); ++i)
    g.data[i] = static_cast<std::uint16_t>(std::lround(std::clamp(p.data[i], 0.0, 1.0) * 65535.0));
  return g;
}

Grid<std::uint16_t> scale_mask(const BinaryMask& m) {
  Grid<std::uint16_t> g(m.width, m.height);
  for (std::size_t i = 0; i < m.data.size(); ++i) g.data[i] = m.data[i] ? 65535 : 0;
  return g;
}

std::string frame_name(const char* prefix, std::size_t f, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04zu%s", prefix, f, ext);
  return buf;
}

int cmd_synth(const Common& c, const BenchmarkSpec& b) {
  const auto cfg = load_config(c);
  const auto seqs = make_benchmark(b, cfg.seed);
  const fs::path out(c.out);
  save_dataset(out, seqs);
  const std::vector<std::pair<std::string, std::string>> extra = {
      {"subjects", std::to_string(b.subjects)},       {"repetitions", std::to_string(b.repetitions)},
      {"width", std::to_string(b.width)},             {"height", std::to_string(b.height)},
      {"frames", std::to_string(b.frames)},           {"noise_mm", std::to_string(b.noise_mm)}};
  write_text(out / "manifest.txt", make_manifest("synth", cfg, extra, seqs));
  std::cout << "wrote " << seqs.size() << " sequences to " << out.string() << "\n";
  return 0;
}

struct SplitArgs {
  std::string data;
  std::string train;
  std::string test;
};

SplitData load_split(const SplitArgs& a, std::vector<DepthSequence>& all) {
  SplitSpec spec{parse_subjects(a.train, "--train-subjects"), parse_subjects(a.test, "--test-subjects")};
  all = load_dataset(a.data);
  return split_dataset(all, spec);
}

std::vector<std::pair<std::string, std::string>> split_entries(const SplitArgs& a) {
  SplitSpec spec{parse_subjects(a.train, "--train-subjects"), parse_subjects(a.test, "--test-subjects")};
  return {{"train_subjects", set_to_string(spec.train_subjects)}, {"test_subjects", set_to_string(spec.test_subjects)}};
}

int cmd_pipeline(const Common& c, const SplitArgs& a) {
  const auto cfg = load_config(c);
  std::vector<DepthSequence> all;
  const auto split = load_split(a, all);
  const auto run = run_pipeline(split.train, split.test, cfg, c.jobs);
  std::vector<DepthSequence> inputs = split.train;
  inputs.insert(inputs.end(), split.test.begin(), split.test.end());
  write_pipeline_outputs(c.out, run, make_manifest("pipeline", cfg, split_entries(a), inputs));
  std::cout << "accuracy " << format_real(run.evaluation.accuracy) << "\n";
  return 0;
}

int cmd_robustness(const Common& c, const SplitArgs& a, const std::string& mode, const std::string& levels_text) {
  const auto cfg = load_config(c);
  std::vector<double> levels;
  if (mode == "pepper") {
    if (levels_text.empty()) {
      levels = default_pepper_levels();
    } else {
      for (const auto& item : config_detail::split(levels_text, ',')) {
        const auto t = config_detail::trim(item);
        double v = 0.0;
        const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || !(v >= 0.0 && v <= 100.0))
          fail(ErrorCode::kUsage, "bad pepper level '" + t + "' (percent in [0, 100])");
        levels.push_back(v / 100.0);
      }
    }
  } else if (!levels_text.empty()) {
    fail(ErrorCode::kUsage, "--levels only applies to the pepper mode");
  }
  std::vector<DepthSequence> all;
  const auto split = load_split(a, all);
  const auto trained = train_pipeline(split.train, cfg, c.jobs);
  const auto pmode = mode == "pepper" ? PerturbationMode::kPepper : PerturbationMode::kOcclusion;
  const auto rows = robustness_sweep(trained.model, split.test, cfg, pmode, levels, c.jobs);
  const fs::path out(c.out);
  fs::create_directories(out);
  write_text(out / "robustness.csv", robustness_csv(mode, rows));
  auto extra = split_entries(a);
  extra.emplace_back("mode", mode);
  std::string lv;
  for (double l : levels) lv += (lv.empty() ? "" : ",") + format_real(l * 100.0);
  if (!lv.empty()) extra.emplace_back("levels", lv);
  std::vector<DepthSequence> inputs = split.train;
  inputs.insert(inputs.end(), split.test.begin(), split.test.end());
  write_text(out / "manifest.txt", make_manifest("robustness", cfg, extra, inputs));
  std::cout << robustness_csv(mode, rows);
  return 0;
}

int cmd_inspect(const Common& c, const std::string& sequence, const std::string& stage, const std::string& model_path) {
  const auto cfg = load_config(c);
  const auto seq = load_sequence(sequence);
  validate(seq);
  const fs::path out(c.out);
  fs::create_directories(out);
  const std::span<const DepthFrame> frames(seq.frames);
  if (stage == "background") {
    const auto p = probability_map(frames);
    const auto m = max_depth_map(frames);
    const auto b = build_background(p, m, cfg.t1);
    write_pgm16(out / "probability.pgm", scale_probability(p));
    write_pgm16(out / "max_depth.pgm", m);
    write_pgm16(out / "background.pgm", b.depth);
  } else if (stage == "foreground") {
    const auto masks = foreground_masks(seq, cfg);
    for (std::size_t f = 0; f < masks.size(); ++f) write_pgm16(out / frame_name("mask", f, ".pgm"), scale_mask(masks[f]));
  } else if (stage == "stips") {
    const auto feat = detect_sequence(seq, cfg);
    auto write = [&](const char* name, const std::vector<Stip>& s) {
      std::ostringstream os;
      write_stips(os, s);
      write_text(out / name, os.str());
    };
    write("candidates.txt", feat.detection.candidates);
    write("motion.txt", feat.detection.motion);
    write("shape.txt", feat.detection.shape);
  } else {
    const auto feat = detect_sequence(seq, cfg);
    double z0 = 0.0;
    if (!model_path.empty()) {
      z0 = decode_model(binio::read_file(model_path)).z_bar0;
    } else {
      z0 = fit_z_bar0(std::span<const SequenceFeatures>(&feat, 1));
    }
    const auto d = describe_sequence(feat, cfg, z0);
    for (std::size_t l = 0; l < d.per_scale.size(); ++l)
      binio::write_file(out / ("lsk_scale_" + std::to_string(l + 1) + ".desc"), encode_descriptors(d.per_scale[l]));
    binio::write_file(out / "stv.desc", encode_descriptors(d.stv));
    std::ostringstream os;
    write_stips(os, d.motion);
    write_text(out / "described_points.txt", os.str());
  }
  write_text(out / "manifest.txt",
             make_manifest("inspect", cfg, {{{"stage", stage}, {"sequence", seq.name}}}, std::span(&seq, 1)));
  return 0;
}

int cmd_gridsearch(const Common& c, const SplitArgs& a) {
  const auto cfg = load_config(c);
  const auto all = load_dataset(a.data);
  const SplitSpec spec{parse_subjects(a.train, "--train-subjects"), {}};
  require(!spec.train_subjects.empty(), ErrorCode::kUsage, "--train-subjects is required");
  std::vector<DepthSequence> train;
  for (const auto& s : all)
    if (spec.train_subjects.contains(s.subject_id)) train.push_back(s);
  require(!train.empty(), ErrorCode::kUsage, "no sequences for the training subjects");
  DetectionCache cache;
  const auto& feats = cache.get(train, cfg, c.jobs);
  const auto run = run_grid_search(feats, cfg, c.jobs);
  const fs::path out(c.out);
  fs::create_directories(out);
  write_text(out / "gridsearch.csv", grid_search_csv(run));
  const auto best = apply_point(cfg, run.points[run.result.best]);
  write_text(out / "best.conf", format_config(best));
  write_text(out / "manifest.txt",
             make_manifest("gridsearch", cfg, {{{"train_subjects", set_to_string(spec.train_subjects)}}}, train));
  std::cout << "best " << describe_point(run.points[run.result.best]) << " mean_accuracy "
            << format_real(run.result.mean_accuracy[run.result.best]) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth-video action recognition with interest points and two-layer bag of visual words"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", common.config_path, "config file (key = value lines)");
    sub->add_option("--seed", common.seed, "override the config seed");
    sub->add_option("--jobs", common.jobs, "worker threads")->check(CLI::Range(1, 256));
    auto* o = sub->add_option("--out", common.out, "output directory");
    if (needs_out) o->required();
  };
  SplitArgs split;
  auto add_split = [&](CLI::App* sub, bool need_test) {
    sub->add_option("--data", split.data, "dataset directory")->required();
    sub->add_option("--train-subjects", split.train, "comma-separated subject ids")->required();
    auto* t = sub->add_option("--test-subjects", split.test, "comma-separated subject ids");
    if (need_test) t->required();
  };

  BenchmarkSpec bench;
  auto* synth = app.add_subcommand("synth", "generate the synthetic three-action benchmark");
  add_common(synth, true);
  synth->add_option("--subjects", bench.subjects)->check(CLI::Range(1, 99));
  synth->add_option("--repetitions", bench.repetitions)->check(CLI::Range(1, 99));
  synth->add_option("--frames", bench.frames)->check(CLI::Range(2, 10000));

  auto* pipe = app.add_subcommand("pipeline", "train on one subject split and evaluate on the other");
  add_common(pipe, true);
  add_split(pipe, true);

  std::string mode, levels;
  auto* robust = app.add_subcommand("robustness", "accuracy under pepper noise or occlusion of the test split");
  add_common(robust, true);
  add_split(robust, true);
  robust->add_option("--mode", mode, "pepper or occlusion")->required()->check(CLI::IsMember({"pepper", "occlusion"}));
  robust->add_option("--levels", levels, "pepper percentages, comma-separated");

  std::string sequence, stage, model_path;
  auto* inspect = app.add_subcommand("inspect", "dump the intermediate results of one stage");
  add_common(inspect, true);
  inspect->add_option("--sequence", sequence, "DSEQ file or directory of PGM frames")->required();
  inspect->add_option("--stage", stage, "background, foreground, stips or descriptors")
      ->required()
      ->check(CLI::IsMember({"background", "foreground", "stips", "descriptors"}));
  inspect->add_option("--model", model_path, "model supplying the reference depth for descriptors");

  auto* grid = app.add_subcommand("gridsearch", "cross-validated parameter search on the training subjects");
  add_common(grid, true);
  add_split(grid, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(common, bench);
    if (*pipe) return cmd_pipeline(common, split);
    if (*robust) return cmd_robustness(common, split, mode, levels);
    if (*inspect) return cmd_inspect(common, sequence, stage, model_path);
    if (*grid) return cmd_gridsearch(common, split);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return e.code() == ErrorCode::kUsage ? kExitUsage : kExitPipeline;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitUsage;
}
