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

#include <gtest/gtest.h>

#include "depthact/config.hpp"
#include "test_util.hpp"

namespace depthact {
namespace {

using testing::fails_with;

TEST(Config, Defaults) {
  const PipelineConfig c;
  EXPECT_EQ(c.lambda, 3.0);
  EXPECT_EQ(c.epsilon, 50.0);
  EXPECT_EQ(c.t1, 0.8);
  EXPECT_EQ(c.t2_factor, 0.01);
  EXPECT_EQ(c.disk_radius, 5);
  EXPECT_EQ(c.keep_ratio, 0.8);
  EXPECT_EQ(c.probe_radius, 3);
  EXPECT_EQ(c.scales, (std::vector<int>{7}));
  EXPECT_EQ(c.k1, 2000);
  EXPECT_EQ(c.k2, 1000);
  EXPECT_EQ(c.gamma, 0.8);
  EXPECT_EQ(c.encoding, Encoding::kStv);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(format_config(parse_config("")), format_config(c));
}

TEST(Config, ParsesKeysCommentsAndWhitespace) {
  const auto c = parse_config(
      "# detection\n"
      "  lambda = 4.5   # sampling step\n"
      "\n"
      "scales = 3, 5,7\n"
      "encoding=stp\n"
      "stp_levels = 1x1x1,1x2x2\n"
      "grid_scales = 3|3,5\n"
      "grid_C = 0.1,10\n"
      "seed = 18446744073709551615\n");
  EXPECT_EQ(c.lambda, 4.5);
  EXPECT_EQ(c.scales, (std::vector<int>{3, 5, 7}));
  EXPECT_EQ(c.encoding, Encoding::kStp);
  ASSERT_EQ(c.stp_levels.size(), 2u);
  EXPECT_EQ(c.stp_levels[1].cells(), 4);
  EXPECT_EQ(c.grid_scales, (std::vector<std::vector<int>>{{3}, {3, 5}}));
  EXPECT_EQ(c.grid_C, (std::vector<double>{0.1, 10}));
  EXPECT_EQ(c.seed, 18446744073709551615ULL);
}

TEST(Config, Rejections) {
  for (const char* text : {"bogus = 1", "lambda", "lambda = abc", "lambda = 3x", "k1 = 1.5", "encoding = lbp",
                           "stp_levels = 2x2", "t1 = 1.5", "scales = 0", "folds = 1", "k1 = 0", "scales ="})
    EXPECT_TRUE(fails_with(ErrorCode::kUsage, [&] { parse_config(text); })) << text;
}

TEST(Config, FormatRoundTrip) {
  PipelineConfig c;
  c.lambda = 0.1 + 2.2;
  c.kmeans_tol = 1e-9;
  c.scales = {3, 5};
  c.encoding = Encoding::kStw;
  c.grid_k1 = {16, 32};
  c.grid_scales = {{3}, {3, 5, 7}};
  c.grid_C = {1, 100};
  c.seed = 123456789012345ULL;
  const auto text = format_config(c);
  const auto back = parse_config(text);
  EXPECT_EQ(back.lambda, c.lambda);
  EXPECT_EQ(back.kmeans_tol, c.kmeans_tol);
  EXPECT_EQ(format_config(back), text);
}

TEST(Config, DetectionHashTracksDetectionKeysOnly) {
  const PipelineConfig base;
  const auto h = detection_hash(base);
  EXPECT_EQ(h, detection_hash(PipelineConfig{}));
  for (const char* key : {"lambda = 4", "epsilon = 40", "t1 = 0.7", "t2_factor = 0.02", "disk_radius = 4",
                          "keep_ratio = 0.7", "z_bin_mm = 20", "z_bins = 256", "probe_radius = 2"})
    EXPECT_NE(detection_hash(parse_config(key)), h) << key;
  for (const char* key : {"k1 = 10", "k2 = 10", "scales = 5", "C = 10", "gamma = 0.5", "seed = 3", "encoding = stp"})
    EXPECT_EQ(detection_hash(parse_config(key)), h) << key;
}

TEST(Config, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

}  // namespace
}  // namespace depthact
