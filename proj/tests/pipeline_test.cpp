// Copyright 2026 The cropseg Authors.
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

#include "cropseg/pipeline.hpp"

#include <gtest/gtest.h>

#include "cropseg/synth.hpp"
#include "fixtures.hpp"

namespace cropseg {
namespace {

TEST(PipelineConfigTest, Defaults) {
  const PipelineConfig c;
  EXPECT_DOUBLE_EQ(c.eps, 0.02);
  EXPECT_EQ(c.min_points, 30);
  EXPECT_EQ(c.k, 10);
  EXPECT_FALSE(c.splat_radius.has_value());
  EXPECT_DOUBLE_EQ(c.depth_tolerance_factor, 2.0);
  EXPECT_EQ(c.variant, MergeVariant::kFullLpa);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_NO_THROW(c.validate());
}

TEST(PipelineConfigTest, JsonOverridesAndRejectsUnknownKeys) {
  const auto c = config_from_json({{"k", 6}, {"variant", "mask"}, {"splat_radius", 0.003}});
  EXPECT_EQ(c.k, 6);
  EXPECT_EQ(c.variant, MergeVariant::kMask);
  EXPECT_EQ(c.splat_radius, 0.003);
  EXPECT_EQ(c.eps, 0.02);
  EXPECT_THROW(config_from_json({{"K", 6}}), UsageError);
  EXPECT_THROW(config_from_json({{"variant", "best"}}), UsageError);
  // The echo reloads to the same config.
  const auto echo = config_from_json(to_json(c));
  EXPECT_EQ(to_json(echo), to_json(c));
}

TEST(PipelineConfigTest, Validation) {
  PipelineConfig c;
  c.k = 0;
  EXPECT_THROW(c.validate(), UsageError);
  c = PipelineConfig{};
  c.workers = 0;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(RunPipelineTest, EmptyCropCloud) {
  auto scene = synth::generate_scene(testing::crop_scene(1, 3));
  scene.dataset.crop_cloud = PointCloud{};
  const auto result = run_pipeline({}, scene.dataset);
  EXPECT_EQ(result.report.total, 0);
  EXPECT_TRUE(result.report.point_instance.empty());
  EXPECT_TRUE(point_labels(result.report).empty());
}

TEST(RunPipelineTest, TwentyFiveInstances) {
  const auto scene = synth::generate_scene(testing::crop_scene(25, 25));
  const auto result = run_pipeline({}, scene.dataset);
  EXPECT_EQ(result.report.total, 25);
  // Every surviving point carries the same instance as its ground-truth
  // neighbours: instances map one-to-one onto predicted labels.
  std::map<int, std::set<std::int64_t>> predicted_for_truth;
  for (std::size_t p = 0; p < result.report.point_instance.size(); ++p) {
    if (result.report.point_instance[p] >= 0) {
      predicted_for_truth[scene.truth.point_instance[p]].insert(result.report.point_instance[p]);
    }
  }
  for (const auto& [truth, preds] : predicted_for_truth) EXPECT_EQ(preds.size(), 1u) << truth;
}

TEST(RunPipelineTest, DeterministicReportAcrossWorkers) {
  const auto scene = synth::generate_scene(testing::crop_scene(8, 12));
  PipelineConfig c;
  auto strip = [&](const PipelineResult& r, const PipelineConfig& cfg) {
    auto j = report_to_json(r, cfg);
    j.erase("timing_ms");
    return j.dump();
  };
  const auto a = run_pipeline(c, scene.dataset);
  const auto b = run_pipeline(c, scene.dataset);
  PipelineConfig threaded = c;
  threaded.workers = 4;
  const auto d = run_pipeline(threaded, scene.dataset);
  EXPECT_EQ(strip(a, c), strip(b, c));
  EXPECT_EQ(strip(a, c), strip(d, threaded));
  EXPECT_EQ(a.report.point_instance, d.report.point_instance);
  EXPECT_EQ(a.tables, d.tables);
}

TEST(RunPipelineTest, ReportSchemaIsStable) {
  const auto scene = synth::generate_scene(testing::crop_scene(9, 4));
  const auto j = report_to_json(run_pipeline({}, scene.dataset), {});
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"config", "point_radius", "supercluster_counts",
                                            "timing_ms", "total_count"}));
  std::vector<std::string> timing;
  for (const auto& [k, v] : j["timing_ms"].items()) timing.push_back(k);
  EXPECT_EQ(timing, (std::vector<std::string>{"buffers", "merging", "partition", "scoring", "total"}));
}

TEST(RunPipelineTest, ErrorsNameTheStage) {
  auto scene = synth::generate_scene(testing::crop_scene(1, 3));
  scene.dataset.views[0].camera.rotation *= 2.0;
  try {
    run_pipeline({}, scene.dataset);
    FAIL() << "expected a data error";
  } catch (const DataError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("validate: ", 0), 0u) << e.what();
  }
}

TEST(RunPipelineTest, PointLabelsReserveZeroForNoise) {
  CountReport r;
  r.point_instance = {-1, 0, 2};
  EXPECT_EQ(point_labels(r), (std::vector<std::uint32_t>{0, 1, 3}));
}

}  // namespace
}  // namespace cropseg
