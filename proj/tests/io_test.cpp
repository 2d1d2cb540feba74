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

#include <gtest/gtest.h>
#include <png.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "cropseg/io/cameras.hpp"
#include "cropseg/io/dataset.hpp"
#include "cropseg/io/masks.hpp"
#include "cropseg/io/ply.hpp"
#include "cropseg/metrics.hpp"
#include "cropseg/rng.hpp"
#include "cropseg/synth.hpp"
#include "fixtures.hpp"

namespace cropseg::io {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("cropseg_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

PointCloud three_points() {
  PointCloud c;
  c.points = {Vec3(0.1, -2.5, 3.0), Vec3(1e-3, 7.25, -0.5), Vec3(0, 0, 0)};
  return c;
}

// GCC 11 at -O3 folds a vectorized double->float->double round trip into a
// plain copy for the first two lanes; going through a volatile float keeps
// the rounding.
double to_float(double x) {
  volatile float f = static_cast<float>(x);
  return f;
}

Vec3 as_float(const Vec3& p) { return Vec3(to_float(p.x()), to_float(p.y()), to_float(p.z())); }

TEST(PlyTest, RoundTripBothFormats) {
  for (PlyFormat format : {PlyFormat::kAscii, PlyFormat::kBinaryLittleEndian}) {
    std::stringstream buf;
    write_ply(buf, three_points(), nullptr, format);
    const auto back = read_ply(buf);
    ASSERT_EQ(back.cloud.size(), 3u);
    EXPECT_FALSE(back.instance.has_value());
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back.cloud[i], as_float(three_points()[i]));
  }
}

TEST(PlyTest, LabeledRoundTrip) {
  const std::vector<std::uint32_t> ids = {0, 7, 40};
  for (PlyFormat format : {PlyFormat::kAscii, PlyFormat::kBinaryLittleEndian}) {
    std::stringstream buf;
    write_ply(buf, three_points(), &ids, format);
    const auto back = read_ply(buf);
    ASSERT_TRUE(back.instance.has_value());
    EXPECT_EQ(*back.instance, ids);
  }
  std::stringstream buf;
  const std::vector<std::uint32_t> short_ids = {1};
  EXPECT_THROW(write_ply(buf, three_points(), &short_ids), DataError);
}

TEST(PlyTest, ReadsDoublesAndExtraProperties) {
  std::stringstream buf(
      "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\n"
      "property double x\nproperty double y\nproperty double z\nproperty float nx\n"
      "end_header\n1 2 3 0.5\n4 5 6 0.5\n");
  const auto back = read_ply(buf);
  ASSERT_EQ(back.cloud.size(), 2u);
  EXPECT_EQ(back.cloud[1], Vec3(4, 5, 6));
}

TEST(PlyTest, MissingZIsNamed) {
  std::stringstream buf("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n");
  try {
    read_ply(buf);
    FAIL() << "expected an error";
  } catch (const PlyMissingPropertyError& e) {
    EXPECT_NE(std::string(e.what()).find("'z'"), std::string::npos) << e.what();
  }
}

TEST(PlyTest, DistinctErrors) {
  std::stringstream not_ply("obj\n");
  EXPECT_THROW(read_ply(not_ply), PlyHeaderError);
  std::stringstream big_endian("ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n");
  EXPECT_THROW(read_ply(big_endian), PlyHeaderError);
  std::stringstream full;
  write_ply(full, three_points());
  std::string bytes = full.str();
  bytes.resize(bytes.size() - 5);
  std::stringstream truncated(bytes);
  EXPECT_THROW(read_ply(truncated), PlyTruncatedError);
  std::stringstream short_ascii("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n");
  EXPECT_THROW(read_ply(short_ascii), PlyTruncatedError);
}

TEST(PlyTest, MillionPointBenchmark) {
  TempDir dir;
  Rng rng(1);
  PointCloud big;
  big.points.resize(1'000'000);
  for (auto& p : big.points) p = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
  const auto t0 = std::chrono::steady_clock::now();
  write_point_cloud(dir.path() / "big.ply", big);
  const PointCloud back = read_point_cloud(dir.path() / "big.ply");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_EQ(back.size(), big.size());
  EXPECT_EQ(back[123456], as_float(big[123456]));
  EXPECT_LT(seconds, 2.0);
}

nlohmann::json identity_view_json() {
  return {{"fx", 100}, {"fy", 100}, {"cx", 50}, {"cy", 50}, {"width", 100}, {"height", 100},
          {"world_to_camera", {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0}}};
}

TEST(CamerasTest, IdentityPose) {
  const auto views = parse_cameras({{"views", {identity_view_json()}}});
  ASSERT_EQ(views.size(), 1u);
  EXPECT_EQ(views[0].rotation, Mat3::Identity());
  EXPECT_EQ(views[0].translation, Vec3::Zero());
  EXPECT_EQ(views[0].width, 100);
}

TEST(CamerasTest, Errors) {
  auto v = identity_view_json();
  v["world_to_camera"] = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  EXPECT_THROW(parse_cameras({{"views", {v}}}), DataError);
  v = identity_view_json();
  v.erase("fy");
  EXPECT_THROW(parse_cameras({{"views", {v}}}), DataError);
  v = identity_view_json();
  v["world_to_camera"] = {2, 0, 0, 0, 0, 2, 0, 0, 0, 0, 2, 0};
  EXPECT_THROW(parse_cameras({{"views", {v}}}), DataError);
  EXPECT_THROW(parse_cameras(nlohmann::json::array()), DataError);
}

TEST(CamerasTest, CameraToWorldIsInverted) {
  auto v = identity_view_json();
  v.erase("world_to_camera");
  // Camera at (1, 2, 3), axes aligned with the world.
  v["camera_to_world"] = {1, 0, 0, 1, 0, 1, 0, 2, 0, 0, 1, 3};
  const auto views = parse_cameras({{"views", {v}}});
  EXPECT_TRUE(views[0].center().isApprox(Vec3(1, 2, 3)));
  EXPECT_TRUE(views[0].translation.isApprox(Vec3(-1, -2, -3)));
}

TEST(CamerasTest, SyntheticRoundTripIsBitIdentical) {
  TempDir dir;
  const auto scene = synth::generate_scene(testing::crop_scene(2, 5));
  std::vector<CameraView> cams;
  for (const auto& v : scene.dataset.views) cams.push_back(v.camera);
  write_cameras(dir.path() / "cameras.json", cams);
  const auto back = read_cameras(dir.path() / "cameras.json");
  ASSERT_EQ(back.size(), cams.size());
  for (std::size_t j = 0; j < cams.size(); ++j) {
    EXPECT_EQ(back[j].rotation, cams[j].rotation);
    EXPECT_EQ(back[j].translation, cams[j].translation);
    EXPECT_EQ(back[j].fx, cams[j].fx);
    EXPECT_EQ(back[j].cy, cams[j].cy);
  }
}

// Writes an 8-bit grayscale PNG with plain libpng.
void write_8bit_png(const fs::path& path, int w, int h) {
  FILE* f = std::fopen(path.c_str(), "wb");
  ASSERT_NE(f, nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(w), 3);
  for (int y = 0; y < h; ++y) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

TEST(MasksTest, AllZeroMask) {
  TempDir dir;
  write_mask_png(dir.path() / mask_filename(0), InstanceMask(30, 20));
  const auto back = read_mask_png(dir.path() / mask_filename(0));
  EXPECT_EQ(back, InstanceMask(30, 20));
}

TEST(MasksTest, EightBitIsRejected) {
  TempDir dir;
  write_8bit_png(dir.path() / "mask_00000.png", 8, 8);
  EXPECT_THROW(read_mask_png(dir.path() / "mask_00000.png"), MaskBitDepthError);
  EXPECT_THROW(read_masks(dir.path()), MaskBitDepthError);
}

TEST(MasksTest, LargeIdsAndSequenceGap) {
  TempDir dir;
  InstanceMask m(4, 3);
  m[0] = kMaxMaskId;
  m[11] = 258;
  write_masks(dir.path(), {m, m});
  EXPECT_EQ(read_masks(dir.path()), (std::vector<InstanceMask>{m, m}));
  fs::rename(dir.path() / mask_filename(1), dir.path() / mask_filename(2));
  EXPECT_THROW(read_masks(dir.path()), MaskSequenceError);
  InstanceMask too_big(2, 2);
  too_big[0] = kMaxMaskId + 1;
  EXPECT_THROW(write_mask_png(dir.path() / "x.png", too_big), DataError);
}

TEST(MasksTest, PairingChecksCountAndSize) {
  CameraView cam;
  cam.width = 4;
  cam.height = 3;
  EXPECT_THROW(pair_views({cam, cam}, {InstanceMask(4, 3)}), MaskSequenceError);
  EXPECT_THROW(pair_views({cam}, {InstanceMask(5, 3)}), MaskSizeError);
  EXPECT_EQ(pair_views({cam}, {InstanceMask(4, 3)}).size(), 1u);
}

TEST(DatasetTest, SyntheticRoundTrip) {
  TempDir dir;
  const auto scene = synth::generate_scene(testing::crop_scene(4, 6));
  save_dataset(dir.path(), scene.dataset);
  const Dataset back = load_dataset(dir.path());
  ASSERT_EQ(back.views.size(), scene.dataset.views.size());
  for (std::size_t j = 0; j < back.views.size(); ++j) {
    EXPECT_EQ(back.views[j].mask, scene.dataset.views[j].mask);
  }
  ASSERT_EQ(back.crop_cloud.size(), scene.dataset.crop_cloud.size());
  for (std::size_t i = 0; i < back.crop_cloud.size(); ++i) {
    EXPECT_EQ(back.crop_cloud[i], as_float(scene.dataset.crop_cloud[i]));
  }
  EXPECT_EQ(back.env_cloud.size(), scene.dataset.env_cloud.size());
}

TEST(DatasetTest, TruthRoundTrip) {
  const auto scene = synth::generate_scene(testing::crop_scene(4, 6));
  const auto back = truth_from_json(truth_to_json(scene.truth));
  EXPECT_EQ(back.count, scene.truth.count);
  EXPECT_EQ(back.point_instance, scene.truth.point_instance);
  EXPECT_EQ(back.view_ids, scene.truth.view_ids);
}

TEST(SpecJsonTest, KnownAndUnknownKeys) {
  const auto spec = scene_spec_from_json({{"instance_count", 7}, {"shape", "ellipsoid"}, {"seed", 9}});
  EXPECT_EQ(spec.instance_count, 7);
  EXPECT_EQ(spec.shape, synth::Shape::kEllipsoid);
  EXPECT_EQ(spec.seed, 9u);
  EXPECT_THROW(scene_spec_from_json({{"instances", 7}}), UsageError);
  EXPECT_THROW(scene_spec_from_json({{"shape", "cube"}}), UsageError);
  const auto c = corruption_spec_from_json({{"merge_probability", 0.2}, {"merge_targeting", "occluded"}});
  EXPECT_DOUBLE_EQ(c.merge_probability, 0.2);
  EXPECT_EQ(c.merge_targeting, synth::MergeTargeting::kOccluded);
  EXPECT_THROW(corruption_spec_from_json({{"merge", 0.2}}), UsageError);
}

TEST(EvaluateTest, Examples) {
  const auto exact = evaluate({5, 9}, {5, 9});
  EXPECT_DOUBLE_EQ(exact.rmse, 0.0);
  EXPECT_DOUBLE_EQ(exact.mape, 0.0);
  const auto one = evaluate({24}, {25});
  EXPECT_DOUBLE_EQ(one.rmse, 1.0);
  EXPECT_DOUBLE_EQ(one.mape, 4.0);
  const auto two = evaluate({20, 30}, {25, 25});
  EXPECT_DOUBLE_EQ(two.rmse, 5.0);
  EXPECT_DOUBLE_EQ(two.mape, 20.0);
}

TEST(EvaluateTest, Errors) {
  EXPECT_THROW(evaluate({1, 2}, {1}), DataError);
  EXPECT_THROW(evaluate({1}, {0}), DataError);
  EXPECT_THROW(evaluate({}, {}), DataError);
}

}  // namespace
}  // namespace cropseg::io
