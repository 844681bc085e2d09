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

// Line-based `key = value` configuration with `#` comments. Every key has
// a default; unknown keys are rejected.

#include <charconv>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "depthact/encode.hpp"
#include "depthact/error.hpp"

namespace depthact {

enum class Encoding { kStv, kStp, kStw, kMotionOnly };

inline std::string_view to_string(Encoding e) {
  switch (e) {
    case Encoding::kStv: return "stv";
    case Encoding::kStp: return "stp";
    case Encoding::kStw: return "stw";
    case Encoding::kMotionOnly: return "none";
  }
  return "?";
}

struct PipelineConfig {
  // Detection.
  double lambda = 3.0;
  double epsilon = 50.0;
  double t1 = 0.8;
  double t2_factor = 0.01;
  int disk_radius = 5;
  double keep_ratio = 0.8;
  double z_bin_mm = 10.0;
  int z_bins = 512;
  // Description.
  int probe_radius = 3;
  std::vector<int> scales{7};
  double lsk_h = 1.0;
  int lsk_cov_window = 1;
  double lsk_reg = 1e-3;
  // Encoding.
  int k1 = 2000;
  int k2 = 1000;
  int kmeans_iters = 100;
  double kmeans_tol = 1e-6;
  int kmeans_restarts = 1;
  int codebook_samples = 20000;
  Encoding encoding = Encoding::kStv;
  std::vector<PyramidLevel> stp_levels{{1, 1, 1}, {2, 2, 1}, {3, 3, 2}};
  // Classification.
  double gamma = 0.8;
  double C = 1.0;
  int svm_epochs = 200;
  std::uint64_t seed = 0;
  // Grid search.
  int folds = 5;
  std::vector<int> grid_k1;
  std::vector<int> grid_k2;
  std::vector<std::vector<int>> grid_scales;
  std::vector<double> grid_C;

  void validate() const;
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end || text.empty())
    fail(ErrorCode::kUsage, "bad value for " + key + ": '" + text + "'");
  return v;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text, char sep = ',') {
  std::vector<T> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, sep)) out.push_back(parse_number<T>(key, item));
  return out;
}

template <typename T>
std::string format_number(T v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string format_list(const std::vector<T>& v, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += format_number(v[i]);
  }
  return out;
}

}  // namespace config_detail

inline std::vector<PyramidLevel> parse_levels(const std::string& text) {
  std::vector<PyramidLevel> out;
  for (const auto& item : config_detail::split(text, ',')) {
    const auto parts = config_detail::split(item, 'x');
    require(parts.size() == 3, ErrorCode::kUsage, "pyramid level must look like TxYxX: '" + item + "'");
    out.push_back({config_detail::parse_number<int>("stp_levels", parts[0]),
                   config_detail::parse_number<int>("stp_levels", parts[1]),
                   config_detail::parse_number<int>("stp_levels", parts[2])});
  }
  return out;
}

inline void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
  using namespace config_detail;
  if (key == "lambda") c.lambda = parse_number<double>(key, value);
  else if (key == "epsilon") c.epsilon = parse_number<double>(key, value);
  else if (key == "t1") c.t1 = parse_number<double>(key, value);
  else if (key == "t2_factor") c.t2_factor = parse_number<double>(key, value);
  else if (key == "disk_radius") c.disk_radius = parse_number<int>(key, value);
  else if (key == "keep_ratio") c.keep_ratio = parse_number<double>(key, value);
  else if (key == "z_bin_mm") c.z_bin_mm = parse_number<double>(key, value);
  else if (key == "z_bins") c.z_bins = parse_number<int>(key, value);
  else if (key == "probe_radius") c.probe_radius = parse_number<int>(key, value);
  else if (key == "scales") c.scales = parse_list<int>(key, value);
  else if (key == "lsk_h") c.lsk_h = parse_number<double>(key, value);
  else if (key == "lsk_cov_window") c.lsk_cov_window = parse_number<int>(key, value);
  else if (key == "lsk_reg") c.lsk_reg = parse_number<double>(key, value);
  else if (key == "k1") c.k1 = parse_number<int>(key, value);
  else if (key == "k2") c.k2 = parse_number<int>(key, value);
  else if (key == "kmeans_iters") c.kmeans_iters = parse_number<int>(key, value);
  else if (key == "kmeans_tol") c.kmeans_tol = parse_number<double>(key, value);
  else if (key == "kmeans_restarts") c.kmeans_restarts = parse_number<int>(key, value);
  else if (key == "codebook_samples") c.codebook_samples = parse_number<int>(key, value);
  else if (key == "encoding") {
    if (value == "stv") c.encoding = Encoding::kStv;
    else if (value == "stp") c.encoding = Encoding::kStp;
    else if (value == "stw") c.encoding = Encoding::kStw;
    else if (value == "none") c.encoding = Encoding::kMotionOnly;
    else fail(ErrorCode::kUsage, "unknown encoding '" + value + "'");
  } else if (key == "stp_levels") c.stp_levels = parse_levels(value);
  else if (key == "gamma") c.gamma = parse_number<double>(key, value);
  else if (key == "C") c.C = parse_number<double>(key, value);
  else if (key == "svm_epochs") c.svm_epochs = parse_number<int>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "folds") c.folds = parse_number<int>(key, value);
  else if (key == "grid_k1") c.grid_k1 = parse_list<int>(key, value);
  else if (key == "grid_k2") c.grid_k2 = parse_list<int>(key, value);
  else if (key == "grid_C") c.grid_C = parse_list<double>(key, value);
  else if (key == "grid_scales") {
    c.grid_scales.clear();
    for (const auto& set : split(value, '|')) c.grid_scales.push_back(parse_list<int>(key, set));
  } else fail(ErrorCode::kUsage, "unknown config key '" + key + "'");
}

inline void PipelineConfig::validate() const {
  auto check = [](bool ok, const char* what) { require(ok, ErrorCode::kUsage, what); };
  check(lambda >= 1.0, "lambda must be >= 1");
  check(epsilon >= 0.0, "epsilon must be >= 0");
  check(t1 >= 0.0 && t1 <= 1.0, "t1 must be in [0, 1]");
  check(t2_factor >= 0.0 && t2_factor < 1.0, "t2_factor must be in [0, 1)");
  check(disk_radius >= 0, "disk_radius must be >= 0");
  check(keep_ratio >= 0.0 && keep_ratio < 1.0, "keep_ratio must be in [0, 1)");
  check(z_bin_mm >= 1.0, "z_bin_mm must be >= 1");
  check(z_bins >= 1 && z_bins <= 4096, "z_bins must be in [1, 4096]");
  check(probe_radius >= 0, "probe_radius must be >= 0");
  check(!scales.empty(), "scales must not be empty");
  for (int r : scales) check(r >= 1, "scales must be >= 1");
  check(lsk_h > 0.0 && lsk_reg > 0.0 && lsk_cov_window >= 0, "bad steering kernel parameters");
  check(k1 >= 1 && k2 >= 1, "k1 and k2 must be >= 1");
  check(kmeans_iters >= 1 && kmeans_restarts >= 1 && codebook_samples >= 1, "bad clustering parameters");
  check(!stp_levels.empty(), "stp_levels must not be empty");
  check(gamma > 0.0 && C > 0.0 && svm_epochs >= 1, "bad classifier parameters");
  check(folds >= 2, "folds must be >= 2");
}

inline PipelineConfig parse_config(std::string_view text) {
  PipelineConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto body = config_detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    require(eq != std::string::npos, ErrorCode::kUsage, "line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(c, config_detail::trim(body.substr(0, eq)), config_detail::trim(body.substr(eq + 1)));
  }
  c.validate();
  return c;
}

// Canonical key/value listing; parse_config of its text form reproduces c.
inline std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& c) {
  using namespace config_detail;
  std::string levels;
  for (std::size_t i = 0; i < c.stp_levels.size(); ++i) {
    if (i) levels += ',';
    levels += std::to_string(c.stp_levels[i].nt) + "x" + std::to_string(c.stp_levels[i].ny) + "x" +
              std::to_string(c.stp_levels[i].nx);
  }
  std::string grid_scales;
  for (std::size_t i = 0; i < c.grid_scales.size(); ++i) {
    if (i) grid_scales += '|';
    grid_scales += format_list(c.grid_scales[i]);
  }
  return {
      {"lambda", format_number(c.lambda)},
      {"epsilon", format_number(c.epsilon)},
      {"t1", format_number(c.t1)},
      {"t2_factor", format_number(c.t2_factor)},
      {"disk_radius", format_number(c.disk_radius)},
      {"keep_ratio", format_number(c.keep_ratio)},
      {"z_bin_mm", format_number(c.z_bin_mm)},
      {"z_bins", format_number(c.z_bins)},
      {"probe_radius", format_number(c.probe_radius)},
      {"scales", format_list(c.scales)},
      {"lsk_h", format_number(c.lsk_h)},
      {"lsk_cov_window", format_number(c.lsk_cov_window)},
      {"lsk_reg", format_number(c.lsk_reg)},
      {"k1", format_number(c.k1)},
      {"k2", format_number(c.k2)},
      {"kmeans_iters", format_number(c.kmeans_iters)},
      {"kmeans_tol", format_number(c.kmeans_tol)},
      {"kmeans_restarts", format_number(c.kmeans_restarts)},
      {"codebook_samples", format_number(c.codebook_samples)},
      {"encoding", std::string(to_string(c.encoding))},
      {"stp_levels", levels},
      {"gamma", format_number(c.gamma)},
      {"C", format_number(c.C)},
      {"svm_epochs", format_number(c.svm_epochs)},
      {"seed", format_number(c.seed)},
      {"folds", format_number(c.folds)},
      {"grid_k1", format_list(c.grid_k1)},
      {"grid_k2", format_list(c.grid_k2)},
      {"grid_scales", grid_scales},
      {"grid_C", format_list(c.grid_C)},
  };
}

inline std::string format_config(const PipelineConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_entries(c)) out += k + " = " + v + "\n";
  return out;
}

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return h;
}

// FNV-1a over the detection-relevant keys, for keying cached detections.
inline std::uint64_t detection_hash(const PipelineConfig& c) {
  std::uint64_t h = fnv1a({});
  for (const auto& [k, v] : config_entries(c)) {
    if (k != "lambda" && k != "epsilon" && k != "t1" && k != "t2_factor" && k != "disk_radius" && k != "keep_ratio" &&
        k != "z_bin_mm" && k != "z_bins" && k != "probe_radius")
      continue;
    h = fnv1a(k + "=" + v + ";", h);
  }
  return h;
}

}  // namespace depthact
