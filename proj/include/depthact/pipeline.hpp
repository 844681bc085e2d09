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

// End-to-end pipeline: background subtraction, detection, description,
// codebook fitting on the training split, encoding, SVM training and
// evaluation.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "depthact/background.hpp"
#include "depthact/classify.hpp"
#include "depthact/config.hpp"
#include "depthact/dataset.hpp"
#include "depthact/depthio.hpp"
#include "depthact/descriptor.hpp"
#include "depthact/encode.hpp"
#include "depthact/parallel.hpp"
#include "depthact/stip.hpp"

namespace depthact {

inline constexpr const char* kVersion = "1.0.0";

inline DetectParams detect_params(const PipelineConfig& c) {
  DetectParams p;
  p.lambda = c.lambda;
  p.epsilon = c.epsilon;
  p.disk_radius = c.disk_radius;
  p.keep_ratio = c.keep_ratio;
  p.projection.z_bin_mm = c.z_bin_mm;
  p.projection.z_bins = c.z_bins;
  return p;
}

inline DescriptorParams descriptor_params(const PipelineConfig& c) {
  DescriptorParams p;
  p.scales = c.scales;
  p.probe_radius = c.probe_radius;
  p.h = c.lsk_h;
  p.cov_window = c.lsk_cov_window;
  p.reg_lambda = c.lsk_reg;
  return p;
}

// Per-sequence output of the detection stage.
struct SequenceFeatures {
  std::string name;
  int subject = 0;
  int label = 0;
  // Depth restricted to the per-frame foreground; background is 0.
  DepthSequence foreground;
  Detection detection;
  // Probe depth of each motion point; nullopt for points that get dropped.
  std::vector<std::optional<double>> motion_depths;
};

inline std::vector<BinaryMask> foreground_masks(const DepthSequence& seq, const PipelineConfig& c) {
  validate(seq);
  const auto bg = build_background(std::span<const DepthFrame>(seq.frames), c.t1);
  std::vector<BinaryMask> masks;
  masks.reserve(seq.frames.size());
  for (const auto& f : seq.frames) masks.push_back(extract_foreground(bg, f, c.t2_factor));
  return masks;
}

inline SequenceFeatures detect_sequence(const DepthSequence& seq, const PipelineConfig& c) {
  SequenceFeatures out;
  out.name = seq.name;
  out.subject = seq.subject_id;
  out.label = seq.action_label;
  const auto masks = foreground_masks(seq, c);
  out.foreground = seq;
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    auto& frame = out.foreground.frames[f];
    for (std::size_t i = 0; i < frame.size(); ++i)
      if (masks[f].data[i] == 0) frame.data[i] = 0;
  }
  out.detection = detect_stips(seq, masks, detect_params(c));
  for (const auto& s : out.detection.motion)
    out.motion_depths.push_back(mean_foreground_depth(out.foreground, s, c.probe_radius));
  return out;
}

// Mean probe depth over the surviving motion points of the training split.
inline double fit_z_bar0(std::span<const SequenceFeatures> train) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& f : train)
    for (const auto& d : f.motion_depths)
      if (d) {
        sum += *d;
        ++n;
      }
  require(n > 0, ErrorCode::kEmptyInput, "no motion-based points with depth in the training split");
  return sum / static_cast<double>(n);
}

struct SequenceDescriptors {
  // Motion points that survived the probe, and their per-scale descriptors.
  std::vector<Stip> motion;
  std::vector<std::vector<Vector>> per_scale;
  std::vector<Stip> shape;
  std::vector<Vector> stv;
  SequenceExtent extent;
};

inline SequenceDescriptors describe_sequence(const SequenceFeatures& feat, const PipelineConfig& c, double z_bar0) {
  SequenceDescriptors out;
  const auto params = descriptor_params(c);
  auto ms = m3dlsk(feat.foreground, feat.detection.motion, params, z_bar0);
  for (auto i : ms.kept) out.motion.push_back(feat.detection.motion[i]);
  out.per_scale = std::move(ms.per_scale);
  out.shape = feat.detection.shape;
  if (!out.shape.empty()) {
    for (const auto& d : stv(out.shape)) out.stv.emplace_back(d.begin(), d.end());
  }
  out.extent = {feat.foreground.width(), feat.foreground.height(), feat.foreground.size()};
  return out;
}

// ---------------------------------------------------------------------------
// Codebooks

namespace pipeline_detail {

inline std::vector<Vector> sample_rows(std::vector<const Vector*> rows, int limit, std::uint64_t seed) {
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (rows.size() > static_cast<std::size_t>(limit)) {
    Rng rng(seed);
    for (std::size_t i = 0; i < static_cast<std::size_t>(limit); ++i)
      std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
    idx.resize(static_cast<std::size_t>(limit));
    std::sort(idx.begin(), idx.end());
  }
  std::vector<Vector> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(*rows[i]);
  return out;
}

}  // namespace pipeline_detail

// Codebooks in model order: one "motion" codebook per scale, then "shape"
// when the encoding uses shape points.
inline std::vector<Codebook> fit_codebooks(std::span<const SequenceDescriptors> train, const PipelineConfig& c,
                                           int jobs = 1) {
  std::vector<Codebook> out;
  for (std::size_t l = 0; l < c.scales.size(); ++l) {
    std::vector<const Vector*> rows;
    for (const auto& d : train)
      for (const auto& v : d.per_scale[l]) rows.push_back(&v);
    require(!rows.empty(), ErrorCode::kEmptyInput, "no motion descriptors in the training split");
    const auto data = pipeline_detail::sample_rows(rows, c.codebook_samples, c.seed + 101 + l);
    KMeansOptions opt{c.k1, c.seed + l, c.kmeans_iters, c.kmeans_tol, jobs};
    auto cb = kmeans_best_of(data, opt, c.kmeans_restarts);
    cb.kind = "motion";
    cb.scale_index = static_cast<int>(l);
    out.push_back(std::move(cb));
  }
  if (c.encoding == Encoding::kStv) {
    std::vector<const Vector*> rows;
    for (const auto& d : train)
      for (const auto& v : d.stv) rows.push_back(&v);
    require(!rows.empty(), ErrorCode::kEmptyInput, "no shape descriptors in the training split");
    const auto data = pipeline_detail::sample_rows(rows, c.codebook_samples, c.seed + 997);
    KMeansOptions opt{c.k2, c.seed + 500, c.kmeans_iters, c.kmeans_tol, jobs};
    auto cb = kmeans_best_of(data, opt, c.kmeans_restarts);
    cb.kind = "shape";
    out.push_back(std::move(cb));
  }
  return out;
}

inline Representation encode_sequence(const SequenceDescriptors& d, std::span<const Codebook> codebooks,
                                      const PipelineConfig& c) {
  const std::size_t scales = c.scales.size();
  require(codebooks.size() >= scales, ErrorCode::kLayoutMismatch, "missing motion codebooks");
  switch (c.encoding) {
    case Encoding::kStv: {
      require(codebooks.size() == scales + 1, ErrorCode::kLayoutMismatch, "missing shape codebook");
      std::vector<Vector> motion;
      for (std::size_t l = 0; l < scales; ++l) motion.push_back(vq_histogram(d.per_scale[l], codebooks[l]));
      return fuse(motion, vq_histogram(d.stv, codebooks[scales]));
    }
    case Encoding::kStp: {
      Representation rep;
      for (std::size_t l = 0; l < scales; ++l) {
        auto part = stp_encode(d.motion, d.per_scale[l], codebooks[l], c.stp_levels, d.extent);
        for (std::size_t s = 0; s < part.layout.size(); ++s)
          rep.append("scale_" + std::to_string(l + 1) + "_" + part.layout[s].name, part.segment(s));
      }
      return rep;
    }
    case Encoding::kStw: {
      Representation rep;
      const auto& ref = d.shape.empty() ? d.motion : d.shape;
      for (std::size_t l = 0; l < scales; ++l) {
        Vector h(static_cast<std::size_t>(codebooks[l].k), 0.0);
        if (!d.motion.empty()) h = stw_encode(d.motion, d.per_scale[l], codebooks[l], stip_origin(ref));
        rep.append("motion_scale_" + std::to_string(l + 1), h);
      }
      return rep;
    }
    case Encoding::kMotionOnly: {
      Representation rep;
      for (std::size_t l = 0; l < scales; ++l)
        rep.append("motion_scale_" + std::to_string(l + 1), vq_histogram(d.per_scale[l], codebooks[l]));
      return rep;
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Training and evaluation

struct StageError : Error {
  StageError(const std::string& sequence, const std::string& stage, const Error& e)
      : Error(e.code(), "sequence '" + sequence + "', stage " + stage + ": " + e.what()) {}
};

inline std::vector<SequenceFeatures> detect_all(std::span<const DepthSequence> seqs, const PipelineConfig& c,
                                                int jobs) {
  std::vector<SequenceFeatures> out(seqs.size());
  parallel_for(seqs.size(), jobs, [&](std::size_t i) {
    try {
      out[i] = detect_sequence(seqs[i], c);
    } catch (const Error& e) {
      throw StageError(seqs[i].name, "detection", e);
    }
  });
  return out;
}

inline std::vector<SequenceDescriptors> describe_all(std::span<const SequenceFeatures> feats, const PipelineConfig& c,
                                                     double z_bar0, int jobs) {
  std::vector<SequenceDescriptors> out(feats.size());
  parallel_for(feats.size(), jobs, [&](std::size_t i) {
    try {
      out[i] = describe_sequence(feats[i], c, z_bar0);
    } catch (const Error& e) {
      throw StageError(feats[i].name, "description", e);
    }
  });
  return out;
}

inline std::vector<Representation> encode_all(std::span<const SequenceDescriptors> descs,
                                              std::span<const SequenceFeatures> feats,
                                              std::span<const Codebook> codebooks, const PipelineConfig& c, int jobs) {
  std::vector<Representation> out(descs.size());
  parallel_for(descs.size(), jobs, [&](std::size_t i) {
    try {
      out[i] = encode_sequence(descs[i], codebooks, c);
    } catch (const Error& e) {
      throw StageError(feats[i].name, "encoding", e);
    }
  });
  return out;
}

inline SvmOptions svm_options(const PipelineConfig& c) {
  SvmOptions o;
  o.C = c.C;
  o.max_epochs = c.svm_epochs;
  o.seed = c.seed;
  return o;
}

struct TrainedPipeline {
  TrainedModel model;
  std::vector<SequenceFeatures> features;
  std::vector<Representation> reps;
};

// Fits z_bar0, codebooks and the classifier from already-detected training
// features. Nothing outside `train` is read.
inline TrainedPipeline train_from_features(std::vector<SequenceFeatures> train, const PipelineConfig& c, int jobs = 1) {
  c.validate();
  require(!train.empty(), ErrorCode::kEmptyInput, "empty training split");
  TrainedPipeline tp;
  const double z0 = fit_z_bar0(train);
  const auto descs = describe_all(train, c, z0, jobs);
  auto codebooks = fit_codebooks(descs, c, jobs);
  tp.reps = encode_all(descs, train, codebooks, c, jobs);
  std::vector<int> labels;
  for (const auto& f : train) labels.push_back(f.label);
  try {
    tp.model = train_svm(tp.reps, labels, svm_options(c), KernelParams{c.gamma}, nullptr, jobs);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage training: ") + e.what());
  }
  tp.model.z_bar0 = z0;
  tp.model.codebooks = std::move(codebooks);
  tp.model.params = config_entries(c);
  tp.features = std::move(train);
  return tp;
}

inline TrainedPipeline train_pipeline(std::span<const DepthSequence> train, const PipelineConfig& c, int jobs = 1) {
  c.validate();
  return train_from_features(detect_all(train, c, jobs), c, jobs);
}

struct EncodedSet {
  std::vector<Representation> reps;
  std::vector<int> labels;
};

inline EncodedSet encode_with_model(std::span<const SequenceFeatures> feats, const TrainedModel& model,
                                    const PipelineConfig& c, int jobs = 1) {
  const auto descs = describe_all(feats, c, model.z_bar0, jobs);
  EncodedSet out;
  out.reps = encode_all(descs, feats, model.codebooks, c, jobs);
  for (const auto& f : feats) out.labels.push_back(f.label);
  return out;
}

struct PipelineRun {
  TrainedPipeline trained;
  std::vector<SequenceFeatures> test_features;
  EncodedSet test;
  Evaluation evaluation;
};

inline PipelineRun run_pipeline(std::span<const DepthSequence> train, std::span<const DepthSequence> test,
                                const PipelineConfig& c, int jobs = 1) {
  PipelineRun run;
  run.trained = train_pipeline(train, c, jobs);
  run.test_features = detect_all(test, c, jobs);
  run.test = encode_with_model(run.test_features, run.trained.model, c, jobs);
  run.evaluation = evaluate(run.trained.model, run.test.reps, run.test.labels);
  return run;
}

// ---------------------------------------------------------------------------
// Robustness sweeps

enum class PerturbationMode { kPepper, kOcclusion };

struct RobustnessRow {
  std::string level;
  double accuracy = 0.0;
};

inline std::vector<double> default_pepper_levels() { return {0.0, 0.01, 0.025, 0.05, 0.075, 0.10, 0.20}; }

// Only the test sequences are perturbed; the trained model is reused.
inline std::vector<RobustnessRow> robustness_sweep(const TrainedModel& model, std::span<const DepthSequence> test,
                                                   const PipelineConfig& c, PerturbationMode mode,
                                                   std::span<const double> pepper_levels, int jobs = 1) {
  std::vector<RobustnessRow> rows;
  auto run_level = [&](const std::string& name, auto perturb) {
    std::vector<DepthSequence> seqs;
    for (std::size_t i = 0; i < test.size(); ++i) seqs.push_back(perturb(test[i], i));
    const auto feats = detect_all(seqs, c, jobs);
    const auto enc = encode_with_model(feats, model, c, jobs);
    rows.push_back({name, evaluate(model, enc.reps, enc.labels).accuracy});
  };
  if (mode == PerturbationMode::kPepper) {
    for (std::size_t li = 0; li < pepper_levels.size(); ++li) {
      const double p = pepper_levels[li];
      require(p >= 0.0 && p <= 1.0, ErrorCode::kUsage, "pepper level out of range");
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof(buf), p * 100.0);
      run_level(std::string(buf, res.ptr), [&](const DepthSequence& s, std::size_t i) {
        return add_pepper_noise(s, p, c.seed * 7919 + li * 104729 + i);
      });
    }
  } else {
    for (int t = 1; t <= 8; ++t)
      run_level(std::to_string(t), [&](const DepthSequence& s, std::size_t) { return apply_occlusion(s, {t}); });
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output files

inline std::string format_real(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string representations_csv(std::span<const SequenceFeatures> feats,
                                       std::span<const Representation> reps) {
  std::string out;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    out += std::to_string(feats[i].subject) + "," + std::to_string(feats[i].label);
    for (double v : reps[i].values) out += "," + format_real(v);
    out += "\n";
  }
  return out;
}

inline std::string confusion_csv(const Evaluation& ev) {
  std::ostringstream out;
  write_confusion_csv(out, ev);
  return out.str();
}

// ---------------------------------------------------------------------------
// Grid search

// Detections keyed by the detection-relevant part of the config, so grid
// points that differ only in description, encoding or SVM parameters share
// one detection pass.
class DetectionCache {
 public:
  const std::vector<SequenceFeatures>& get(std::span<const DepthSequence> seqs, const PipelineConfig& c, int jobs) {
    const auto key = detection_hash(c);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      it = cache_.emplace(key, detect_all(seqs, c, jobs)).first;
      ++misses_;
    }
    return it->second;
  }
  int misses() const { return misses_; }

 private:
  std::map<std::uint64_t, std::vector<SequenceFeatures>> cache_;
  int misses_ = 0;
};

struct GridPoint {
  int k1 = 0;
  int k2 = 0;
  std::vector<int> scales;
  double C = 1.0;
};

inline PipelineConfig apply_point(PipelineConfig c, const GridPoint& p) {
  c.k1 = p.k1;
  c.k2 = p.k2;
  c.scales = p.scales;
  c.C = p.C;
  return c;
}

// Cartesian product of the grid lists; an empty list means the config value.
inline std::vector<GridPoint> grid_points(const PipelineConfig& c) {
  const std::vector<int> k1s = c.grid_k1.empty() ? std::vector<int>{c.k1} : c.grid_k1;
  const std::vector<int> k2s = c.grid_k2.empty() ? std::vector<int>{c.k2} : c.grid_k2;
  const auto scales = c.grid_scales.empty() ? std::vector<std::vector<int>>{c.scales} : c.grid_scales;
  const std::vector<double> cs = c.grid_C.empty() ? std::vector<double>{c.C} : c.grid_C;
  std::vector<GridPoint> out;
  for (int k1 : k1s)
    for (int k2 : k2s)
      for (const auto& sc : scales)
        for (double C : cs) out.push_back({k1, k2, sc, C});
  return out;
}

inline std::string describe_point(const GridPoint& p) {
  std::string sc;
  for (int r : p.scales) sc += (sc.empty() ? "" : " ") + std::to_string(r);
  return "k1=" + std::to_string(p.k1) + ";k2=" + std::to_string(p.k2) + ";scales=" + sc + ";C=" + format_real(p.C);
}

struct GridSearchRun {
  std::vector<GridPoint> points;
  GridSearchResult result;
};

// Cross-validation over the training features only.
inline GridSearchRun run_grid_search(std::span<const SequenceFeatures> train, const PipelineConfig& c, int jobs = 1) {
  GridSearchRun run;
  run.points = grid_points(c);
  std::vector<SampleKey> keys;
  for (const auto& f : train) keys.push_back({f.subject, f.label, f.name});
  const auto fold_of = stratified_folds(keys, c.folds);
  run.result = grid_search<GridPoint>(
      run.points, fold_of, c.folds,
      [&](const GridPoint& p, std::span<const std::size_t> tr, std::span<const std::size_t> va) {
        const auto pc = apply_point(c, p);
        std::vector<SequenceFeatures> tf, vf;
        for (auto i : tr) tf.push_back(train[i]);
        for (auto i : va) vf.push_back(train[i]);
        const auto tp = train_from_features(std::move(tf), pc, jobs);
        const auto enc = encode_with_model(vf, tp.model, pc, jobs);
        return evaluate(tp.model, enc.reps, enc.labels).accuracy;
      });
  return run;
}

inline std::string grid_search_csv(const GridSearchRun& run) {
  std::string out = "point,k1,k2,scales,C,mean_accuracy,fold_accuracies\n";
  for (std::size_t i = 0; i < run.points.size(); ++i) {
    const auto& p = run.points[i];
    std::string sc, folds;
    for (int r : p.scales) sc += (sc.empty() ? "" : " ") + std::to_string(r);
    for (double a : run.result.fold_accuracy[i]) folds += (folds.empty() ? "" : " ") + format_real(a);
    out += std::to_string(i) + "," + std::to_string(p.k1) + "," + std::to_string(p.k2) + "," + sc + "," +
           format_real(p.C) + "," + format_real(run.result.mean_accuracy[i]) + "," + folds + "\n";
  }
  return out;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Run manifest: everything that determines the outputs of a run.
inline std::string make_manifest(std::string_view command, const PipelineConfig& c,
                                 std::span<const std::pair<std::string, std::string>> extra,
                                 std::span<const DepthSequence> inputs) {
  std::string out;
  out += "tool = depthact " + std::string(kVersion) + "\n";
  out += "command = " + std::string(command) + "\n";
  out += "seed = " + std::to_string(c.seed) + "\n";
  for (const auto& [k, v] : extra) out += k + " = " + v + "\n";
  out += "[config]\n" + format_config(c);
  if (!inputs.empty()) {
    out += "[inputs]\n";
    for (const auto& s : inputs) out += s.name + " " + hex64(fnv1a(encode_dseq(s))) + "\n";
  }
  return out;
}

inline std::string set_to_string(const std::set<int>& s) {
  std::string out;
  for (int v : s) out += (out.empty() ? "" : ",") + std::to_string(v);
  return out;
}

// Writes model.modl, representations_{train,test}.csv, confusion.csv,
// report.txt and manifest.txt into `dir`.
inline void write_pipeline_outputs(const std::filesystem::path& dir, const PipelineRun& run,
                                   const std::string& manifest) {
  std::filesystem::create_directories(dir);
  binio::write_file(dir / "model.modl", encode_model(run.trained.model));
  binio::write_file(dir / "representations_train.csv", representations_csv(run.trained.features, run.trained.reps));
  binio::write_file(dir / "representations_test.csv", representations_csv(run.test_features, run.test.reps));
  binio::write_file(dir / "confusion.csv", confusion_csv(run.evaluation));
  std::string report = "accuracy = " + format_real(run.evaluation.accuracy) + "\n";
  report += "train_sequences = " + std::to_string(run.trained.features.size()) + "\n";
  report += "test_sequences = " + std::to_string(run.test_features.size()) + "\n";
  report += "dimension = " + std::to_string(run.test.reps.empty() ? 0 : run.test.reps.front().values.size()) + "\n";
  report += "z_bar0 = " + format_real(run.trained.model.z_bar0) + "\n";
  for (std::size_t i = 0; i < run.test_features.size(); ++i)
    report += "predicted " + run.test_features[i].name + " " + std::to_string(run.evaluation.predicted[i]) + "\n";
  binio::write_file(dir / "report.txt", report);
  binio::write_file(dir / "manifest.txt", manifest);
}

inline std::string robustness_csv(std::string_view mode, std::span<const RobustnessRow> rows) {
  std::string out = "mode,level,accuracy\n";
  for (const auto& r : rows) out += std::string(mode) + "," + r.level + "," + format_real(r.accuracy) + "\n";
  return out;
}

}  // namespace depthact
