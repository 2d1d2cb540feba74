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

#include "cropseg/scene.hpp"

#include <gtest/gtest.h>

#include "cropseg/rng.hpp"

namespace cropseg {
namespace {

CameraView identity_view(int size = 100) {
  CameraView v;
  v.fx = v.fy = 100.0;
  v.cx = v.cy = 50.0;
  v.width = v.height = size;
  return v;
}

TEST(CameraProjectTest, OpticalAxisPoint) {
  const auto hit = camera_project(identity_view(), Vec3(0, 0, 2));
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(hit->first, (Pixel{50, 50}));
  EXPECT_DOUBLE_EQ(hit->second, 2.0);
}

TEST(CameraProjectTest, BehindCamera) {
  EXPECT_FALSE(camera_project(identity_view(), Vec3(0, 0, -1)).has_value());
  EXPECT_FALSE(camera_project(identity_view(), Vec3(0, 0, 0)).has_value());
}

TEST(CameraProjectTest, RightEdgeIsOutOfFrame) {
  // 100 * 1 / 2 + 50 = 100, one past the last column.
  EXPECT_FALSE(camera_project(identity_view(), Vec3(1, 0, 2)).has_value());
  const auto inside = camera_project(identity_view(), Vec3(0.98, 0, 2));
  ASSERT_TRUE(inside.has_value());
  EXPECT_EQ(inside->first.x, 99);
}

TEST(CameraProjectTest, PoseIsWorldToCamera) {
  CameraView v = identity_view();
  v.translation = Vec3(0, 0, 3);  // world origin sits 3 m ahead
  const auto hit = camera_project(v, Vec3::Zero());
  ASSERT_TRUE(hit.has_value());
  EXPECT_DOUBLE_EQ(hit->second, 3.0);
  EXPECT_TRUE(v.center().isApprox(Vec3(0, 0, -3)));
}

TEST(CameraProjectTest, RayScaleInvariance) {
  Rng rng(3);
  const CameraView v = CameraView::look_at(Vec3(1, -2, 0.5), Vec3(0, 0, 0), Vec3::UnitZ(), 250,
                                           240, 159.5, 119.5, 320, 240);
  for (int trial = 0; trial < 500; ++trial) {
    const Vec3 p(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    const auto a = camera_project(v, p);
    if (!a) continue;
    // Same camera ray, twice as far.
    const Vec3 cam = v.to_camera(p) * 2.0;
    const Vec3 far = v.rotation.transpose() * (cam - v.translation);
    const auto b = camera_project(v, far);
    ASSERT_TRUE(b.has_value());
    EXPECT_EQ(a->first, b->first);
    EXPECT_NEAR(b->second, 2.0 * a->second, 1e-9);
  }
}

TEST(CameraProjectTest, PixelCenterRayRoundTrip) {
  const CameraView v = CameraView::look_at(Vec3(0, -1, 0.2), Vec3::Zero(), Vec3::UnitZ(), 300,
                                           300, 199.5, 149.5, 400, 300);
  for (int y = 0; y < v.height; y += 7) {
    for (int x = 0; x < v.width; x += 7) {
      const double depth = 0.5 + 0.01 * (x % 13);
      const Vec3 cam((x - v.cx) / v.fx * depth, (y - v.cy) / v.fy * depth, depth);
      const Vec3 world = v.rotation.transpose() * (cam - v.translation);
      const auto hit = camera_project(v, world);
      ASSERT_TRUE(hit.has_value());
      EXPECT_EQ(hit->first, (Pixel{x, y}));
    }
  }
}

Dataset three_view_dataset() {
  Dataset ds;
  for (int j = 0; j < 3; ++j) {
    CameraView v = identity_view(64);
    ds.views.push_back({v, InstanceMask(64, 64)});
  }
  ds.env_cloud.points = {Vec3(0, 0, 1), Vec3(0.1, 0, 1)};
  ds.crop_cloud.points = {Vec3(0, 0, 1)};
  return ds;
}

TEST(ValidateDatasetTest, WellFormed) { EXPECT_TRUE(validate_dataset(three_view_dataset()).empty()); }

TEST(ValidateDatasetTest, MaskSizeMismatch) {
  Dataset ds = three_view_dataset();
  ds.views[1].camera.width = ds.views[1].camera.height = 128;
  const auto report = validate_dataset(ds);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].kind, ValidationFinding::Kind::kDimensionMismatch);
  EXPECT_EQ(report[0].view, 1);
}

TEST(ValidateDatasetTest, ScaledRotation) {
  Dataset ds = three_view_dataset();
  ds.views[2].camera.rotation *= 2.0;
  const auto report = validate_dataset(ds);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].kind, ValidationFinding::Kind::kNonOrthonormalRotation);
}

TEST(ValidateDatasetTest, ReflectionIsNotARotation) {
  Dataset ds = three_view_dataset();
  ds.views[0].camera.rotation(0, 0) = -1.0;
  const auto report = validate_dataset(ds);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].kind, ValidationFinding::Kind::kNonOrthonormalRotation);
}

TEST(ValidateDatasetTest, EmptyCloudsAndNoViews) {
  Dataset ds;
  const auto report = validate_dataset(ds);
  ASSERT_EQ(report.size(), 3u);
  EXPECT_EQ(report[0].kind, ValidationFinding::Kind::kNoViews);
  EXPECT_EQ(report[1].kind, ValidationFinding::Kind::kEmptyCloud);
  EXPECT_EQ(report[2].kind, ValidationFinding::Kind::kEmptyCloud);
}

TEST(InstanceMaskTest, RejectsWrongGridSize) {
  EXPECT_THROW(InstanceMask(4, 4, std::vector<std::uint32_t>(15)), DataError);
}

}  // namespace
}  // namespace cropseg
