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
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "depthact/binio.hpp"
#include "depthact/encode.hpp"
#include "depthact/error.hpp"
#include "depthact/parallel.hpp"
#include "depthact/rng.hpp"

namespace depthact {

struct KernelParams {
  double gamma = 0.8;
  bool operator==(const KernelParams&) const = default;
};

// Homogeneous chi-squared kernel of degree gamma:
//   sum_i (a b)^(gamma/2) * sech(ln(b/a) / 2),  a = x_i, b = y_i,
// with sech(ln(b/a)/2) = 2 sqrt(ab) / (a + b). gamma = 1 gives 2ab/(a+b).
inline double chi2_term(double a, double b, double gamma) {
  if (a <= 0.0 || b <= 0.0) return 0.0;
  const double ab = a * b;
  if (gamma == 1.0) return 2.0 * ab / (a + b);
  return std::pow(ab, gamma / 2.0) * (2.0 * std::sqrt(ab) / (a + b));
}

inline double chi2_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
  require(x.size() == y.size(), ErrorCode::kDimensionMismatch, "kernel arguments differ in length");
  require(gamma > 0.0, ErrorCode::kInvalidArgument, "gamma must be positive");
  double k = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] >= 0.0 && y[i] >= 0.0, ErrorCode::kInvalidArgument, "kernel arguments must be nonnegative");
    k += chi2_term(x[i], y[i], gamma);
  }
  return k;
}

// Symmetric Gram matrix, row-major n x n.
inline std::vector<double> gram_matrix(std::span<const Vector> xs, double gamma, int jobs = 1) {
  const std::size_t n = xs.size();
  std::vector<double> g(n * n, 0.0);
  parallel_for(n, jobs, [&](std::size_t i) {
    for (std::size_t j = 0; j <= i; ++j) g[i * n + j] = chi2_kernel(xs[i], xs[j], gamma);
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) g[i * n + j] = g[j * n + i];
  return g;
}

// ---------------------------------------------------------------------------
// SDCA

struct SvmOptions {
  double C = 1.0;
  int max_epochs = 200;
  // Stop once the duality gap drops below gap_per_sample * n.
  double gap_per_sample = 1e-3;
  // The bias is learned as a weight on a constant feature of this value.
  double bias_multiplier = 1.0;
  std::uint64_t seed = 0;
};

struct SdcaTrace {
  std::vector<double> dual;
  std::vector<double> gap;
};

struct BinarySolution {
  std::vector<double> alpha;
  double bias = 0.0;
};

// Dual coordinate ascent for the hinge-loss SVM on a precomputed kernel,
// targets in {-1, +1}, box constraint 0 <= alpha <= C.
inline BinarySolution sdca_binary(std::span<const double> gram, std::span<const int> y, const SvmOptions& opt,
                                  SdcaTrace* trace = nullptr) {
  const std::size_t n = y.size();
  require(gram.size() == n * n, ErrorCode::kDimensionMismatch, "Gram matrix does not match sample count");
  require(opt.C > 0.0, ErrorCode::kInvalidArgument, "C must be positive");
  const double b2 = opt.bias_multiplier * opt.bias_multiplier;
  auto kern = [&](std::size_t i, std::size_t j) { return gram[i * n + j] + b2; };

  BinarySolution sol{std::vector<double>(n, 0.0), 0.0};
  std::vector<double> f(n, 0.0);  // sum_j alpha_j y_j K'(j, i)
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(opt.seed);

  auto objectives = [&](double& dual, double& gap) {
    double sum_alpha = 0.0, wnorm = 0.0, hinge = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum_alpha += sol.alpha[i];
      wnorm += sol.alpha[i] * y[i] * f[i];
      hinge += std::max(0.0, 1.0 - y[i] * f[i]);
    }
    dual = sum_alpha - 0.5 * wnorm;
    gap = (0.5 * wnorm + opt.C * hinge) - dual;
  };

  for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t i : order) {
      const double kii = kern(i, i);
      if (kii <= 0.0) continue;
      const double grad = y[i] * f[i] - 1.0;
      const double next = std::clamp(sol.alpha[i] - grad / kii, 0.0, opt.C);
      const double delta = next - sol.alpha[i];
      if (delta == 0.0) continue;
      sol.alpha[i] = next;
      for (std::size_t j = 0; j < n; ++j) f[j] += delta * y[i] * kern(i, j);
    }
    double dual = 0.0, gap = 0.0;
    objectives(dual, gap);
    if (trace) {
      trace->dual.push_back(dual);
      trace->gap.push_back(gap);
    }
    if (gap < opt.gap_per_sample * static_cast<double>(n)) break;
  }
  for (std::size_t i = 0; i < n; ++i) sol.bias += sol.alpha[i] * y[i] * b2;
  return sol;
}

// ---------------------------------------------------------------------------
// One-vs-rest model

struct TrainedModel {
  std::vector<int> classes;
  std::vector<Segment> layout;
  std::vector<Vector> supports;
  // coefs[c][s] = alpha_s * y_s for the class-c problem.
  std::vector<std::vector<double>> coefs;
  std::vector<double> bias;
  KernelParams kernel;
  double z_bar0 = 0.0;
  std::vector<Codebook> codebooks;
  // Pipeline settings the model was trained with, as config key/value pairs.
  std::vector<std::pair<std::string, std::string>> params;

  bool operator==(const TrainedModel&) const = default;
};

inline TrainedModel train_svm(std::span<const Representation> reps, std::span<const int> labels, const SvmOptions& opt,
                              const KernelParams& kernel, std::vector<SdcaTrace>* traces = nullptr, int jobs = 1) {
  require(reps.size() == labels.size(), ErrorCode::kDimensionMismatch, "one label per representation required");
  require(!reps.empty(), ErrorCode::kEmptyInput, "no training data");
  std::set<int> class_set(labels.begin(), labels.end());
  require(class_set.size() >= 2, ErrorCode::kSingleClass, "training data has a single class");
  std::vector<Vector> xs;
  xs.reserve(reps.size());
  for (const auto& r : reps) {
    require(r.same_layout(reps.front()), ErrorCode::kLayoutMismatch, "training representations differ in layout");
    for (double v : r.values) require(std::isfinite(v), ErrorCode::kNotANumber, "non-finite representation value");
    xs.push_back(r.values);
  }
  const auto gram = gram_matrix(xs, kernel.gamma, jobs);

  TrainedModel model;
  model.classes.assign(class_set.begin(), class_set.end());
  model.layout = reps.front().layout;
  model.kernel = kernel;
  std::vector<BinarySolution> sols(model.classes.size());
  if (traces) traces->assign(model.classes.size(), {});
  parallel_for(model.classes.size(), jobs, [&](std::size_t c) {
    std::vector<int> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == model.classes[c] ? 1 : -1;
    SvmOptions o = opt;
    o.seed = opt.seed + 0x9E3779B97F4A7C15ULL * (c + 1);
    sols[c] = sdca_binary(gram, y, o, traces ? &(*traces)[c] : nullptr);
  });

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    bool used = false;
    for (const auto& s : sols) used = used || s.alpha[i] != 0.0;
    if (used) keep.push_back(i);
  }
  model.coefs.assign(model.classes.size(), {});
  for (std::size_t i : keep) model.supports.push_back(xs[i]);
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    for (std::size_t i : keep) model.coefs[c].push_back(sols[c].alpha[i] * (labels[i] == model.classes[c] ? 1 : -1));
    model.bias.push_back(sols[c].bias);
  }
  return model;
}

struct Prediction {
  int label = 0;
  std::vector<double> scores;
};

inline Prediction predict(const TrainedModel& model, const Representation& rep) {
  require(rep.layout == model.layout, ErrorCode::kLayoutMismatch, "representation layout does not match the model");
  std::vector<double> kv(model.supports.size());
  for (std::size_t s = 0; s < kv.size(); ++s) kv[s] = chi2_kernel(model.supports[s], rep.values, model.kernel.gamma);
  Prediction p;
  p.scores.resize(model.classes.size());
  std::size_t best = 0;
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    double score = model.bias[c];
    for (std::size_t s = 0; s < kv.size(); ++s) score += model.coefs[c][s] * kv[s];
    p.scores[c] = score;
    if (score > p.scores[best]) best = c;
  }
  p.label = model.classes[best];
  return p;
}

struct Evaluation {
  double accuracy = 0.0;
  std::vector<int> labels;
  // confusion[i][j]: true labels[i] predicted as labels[j].
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<int> predicted;
};

inline Evaluation evaluate(const TrainedModel& model, std::span<const Representation> reps, std::span<const int> truth) {
  require(!reps.empty(), ErrorCode::kEmptyInput, "empty test set");
  require(reps.size() == truth.size(), ErrorCode::kDimensionMismatch, "one label per representation required");
  Evaluation ev;
  std::set<int> all(model.classes.begin(), model.classes.end());
  all.insert(truth.begin(), truth.end());
  ev.labels.assign(all.begin(), all.end());
  std::map<int, std::size_t> slot;
  for (std::size_t i = 0; i < ev.labels.size(); ++i) slot[ev.labels[i]] = i;
  ev.confusion.assign(ev.labels.size(), std::vector<std::size_t>(ev.labels.size(), 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const int label = predict(model, reps[i]).label;
    ev.predicted.push_back(label);
    ++ev.confusion[slot[truth[i]]][slot[label]];
    correct += label == truth[i] ? 1 : 0;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(reps.size());
  return ev;
}

inline void write_confusion_csv(std::ostream& out, const Evaluation& ev) {
  out << "true\\pred";
  for (int l : ev.labels) out << ',' << l;
  out << '\n';
  for (std::size_t i = 0; i < ev.labels.size(); ++i) {
    out << ev.labels[i];
    for (auto c : ev.confusion[i]) out << ',' << c;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Cross-validated grid search

struct SampleKey {
  int subject = 0;
  int label = 0;
  std::string name;
};

// Samples ordered by (subject, label, name) and dealt round-robin, so each
// fold holds a share of every subject.
inline std::vector<int> stratified_folds(std::span<const SampleKey> samples, int folds) {
  require(folds >= 2, ErrorCode::kInvalidArgument, "need at least 2 folds");
  require(samples.size() >= static_cast<std::size_t>(folds), ErrorCode::kInvalidArgument,
          "fewer samples than folds");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = samples[a];
    const auto& y = samples[b];
    return std::tie(x.subject, x.label, x.name) < std::tie(y.subject, y.label, y.name);
  });
  std::vector<int> fold(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) fold[order[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  return fold;
}

struct GridSearchResult {
  std::size_t best = 0;
  std::vector<double> mean_accuracy;
  std::vector<std::vector<double>> fold_accuracy;
};

// eval(point, train_indices, validation_indices) -> accuracy. The first
// grid point wins ties.
template <typename Point, typename Eval>
GridSearchResult grid_search(std::span<const Point> grid, std::span<const int> fold_of, int folds, Eval eval) {
  require(!grid.empty(), ErrorCode::kEmptyInput, "empty grid");
  GridSearchResult res;
  for (const auto& point : grid) {
    std::vector<double> accs;
    for (int k = 0; k < folds; ++k) {
      std::vector<std::size_t> train, val;
      for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == k ? val : train).push_back(i);
      if (val.empty()) continue;
      accs.push_back(eval(point, std::span<const std::size_t>(train), std::span<const std::size_t>(val)));
    }
    double mean = accs.empty() ? 0.0 : std::accumulate(accs.begin(), accs.end(), 0.0) / accs.size();
    res.mean_accuracy.push_back(mean);
    res.fold_accuracy.push_back(std::move(accs));
  }
  for (std::size_t i = 1; i < res.mean_accuracy.size(); ++i)
    if (res.mean_accuracy[i] > res.mean_accuracy[res.best]) res.best = i;
  return res;
}

// ---------------------------------------------------------------------------
// MODL files

inline std::string encode_model(const TrainedModel& m) {
  binio::Writer w;
  w.bytes("MODL");
  w.put<std::uint16_t>(1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.classes.size()));
  for (int c : m.classes) w.put<std::int32_t>(c);
  w.put<double>(m.kernel.gamma);
  w.put<double>(m.z_bar0);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.layout.size()));
  for (const auto& s : m.layout) {
    w.str(s.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.offset));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.length));
  }
  const std::size_t dim = m.supports.empty() ? 0 : m.supports.front().size();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.supports.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
  for (const auto& s : m.supports)
    for (double v : s) w.put<double>(v);
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    w.put<double>(m.bias[c]);
    for (double v : m.coefs[c]) w.put<double>(v);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.codebooks.size()));
  for (const auto& cb : m.codebooks) {
    w.str(cb.kind);
    w.put<std::int32_t>(cb.scale_index);
    write_codebook(w, cb);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.params.size()));
  for (const auto& [k, v] : m.params) {
    w.str(k);
    w.str(v);
  }
  return w.buffer();
}

inline TrainedModel decode_model(std::string_view bytes) {
  require(bytes.substr(0, 4) == "MODL", ErrorCode::kMalformedHeader, "missing MODL magic");
  binio::Reader r(bytes.substr(4));
  require(r.get<std::uint16_t>() == 1, ErrorCode::kMalformedHeader, "unsupported MODL version");
  TrainedModel m;
  m.classes.resize(r.get<std::uint32_t>());
  for (auto& c : m.classes) c = r.get<std::int32_t>();
  m.kernel.gamma = r.get<double>();
  m.z_bar0 = r.get<double>();
  m.layout.resize(r.get<std::uint32_t>());
  for (auto& s : m.layout) {
    s.name = r.str();
    s.offset = r.get<std::uint32_t>();
    s.length = r.get<std::uint32_t>();
  }
  const auto n_sup = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint32_t>();
  m.supports.assign(n_sup, Vector(dim));
  for (auto& s : m.supports)
    for (auto& v : s) v = r.get<double>();
  m.coefs.assign(m.classes.size(), std::vector<double>(n_sup));
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    m.bias.push_back(r.get<double>());
    for (auto& v : m.coefs[c]) v = r.get<double>();
  }
  m.codebooks.resize(r.get<std::uint32_t>());
  for (auto& cb : m.codebooks) {
    auto kind = r.str();
    const int scale = r.get<std::int32_t>();
    cb = read_codebook(r);
    cb.kind = std::move(kind);
    cb.scale_index = scale;
  }
  m.params.resize(r.get<std::uint32_t>());
  for (auto& [k, v] : m.params) {
    k = r.str();
    v = r.str();
  }
  require(r.remaining() == 0, ErrorCode::kMalformedHeader, "trailing bytes after model");
  return m;
}

}  // namespace depthact
