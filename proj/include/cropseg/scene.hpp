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

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "cropseg/error.hpp"

namespace cropseg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Pinhole camera with a world-to-camera pose.
///
/// Camera frame: +x right, +y down, +z forward. A world point p maps to the
/// camera frame as `rotation * p + translation`.
struct CameraView {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 center() const { return -rotation.transpose() * translation; }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  /// Camera at `eye` looking at `target`; `up` is a world hint for -y.
  static CameraView look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
                            double fy, double cx, double cy, int width, int height) {
    const Vec3 z = (target - eye).normalized();
    Vec3 x = z.cross(up);
    if (x.norm() < 1e-12) x = z.unitOrthogonal();
    x.normalize();
    const Vec3 y = z.cross(x);
    CameraView view;
    view.fx = fx;
    view.fy = fy;
    view.cx = cx;
    view.cy = cy;
    view.width = width;
    view.height = height;
    view.rotation.row(0) = x.transpose();
    view.rotation.row(1) = y.transpose();
    view.rotation.row(2) = z.transpose();
    view.translation = -view.rotation * eye;
    return view;
  }
};

inline bool is_rotation(const Mat3& r, double tolerance = 1e-6) {
  if (!r.allFinite()) return false;
  const double ortho = (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tolerance && std::abs(r.determinant() - 1.0) <= tolerance;
}

/// Per-view instance label image. 0 is background; positive ids are
/// view-local instances with no correspondence across views.
class InstanceMask {
 public:
  InstanceMask() = default;
  InstanceMask(int width, int height)
      : width_(width),
        height_(height),
        labels_(static_cast<std::size_t>(std::max(width, 0)) *
                    static_cast<std::size_t>(std::max(height, 0)),
                0u) {}
  InstanceMask(int width, int height, std::vector<std::uint32_t> labels)
      : width_(width), height_(height), labels_(std::move(labels)) {
    if (labels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw DataError("mask label grid size does not match " + std::to_string(width) + "x" +
                      std::to_string(height));
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint32_t at(int x, int y) const { return labels_[index(x, y)]; }
  std::uint32_t& at(int x, int y) { return labels_[index(x, y)]; }
  std::uint32_t operator[](std::size_t linear) const { return labels_[linear]; }
  std::uint32_t& operator[](std::size_t linear) { return labels_[linear]; }
  const std::vector<std::uint32_t>& labels() const { return labels_; }
  std::vector<std::uint32_t>& labels() { return labels_; }

  friend bool operator==(const InstanceMask&, const InstanceMask&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint32_t> labels_;
};

/// Unordered 3D points in meters.
struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Vec3& operator[](std::size_t i) const { return points[i]; }

  void append(const PointCloud& other) {
    points.insert(points.end(), other.points.begin(), other.points.end());
  }
};

struct View {
  CameraView camera;
  InstanceMask mask;
};

struct Dataset {
  std::vector<View> views;
  PointCloud env_cloud;
  PointCloud crop_cloud;
};

/// Maps a world point to its pixel and camera-frame depth. Returns nothing
/// for points at or behind the image plane or outside the frame.
inline std::optional<std::pair<Pixel, double>> camera_project(const CameraView& view,
                                                              const Vec3& point) {
  const Vec3 c = view.to_camera(point);
  if (!(c.z() > 0.0)) return std::nullopt;
  const double u = view.fx * c.x() / c.z() + view.cx;
  const double v = view.fy * c.y() / c.z() + view.cy;
  if (!std::isfinite(u) || !std::isfinite(v)) return std::nullopt;
  const double ru = std::round(u);
  const double rv = std::round(v);
  if (ru < 0.0 || rv < 0.0 || ru >= view.width || rv >= view.height) return std::nullopt;
  return std::pair{Pixel{static_cast<int>(ru), static_cast<int>(rv)}, c.z()};
}

struct ValidationFinding {
  enum class Kind {
    kNoViews,
    kBadIntrinsics,
    kNonOrthonormalRotation,
    kDimensionMismatch,
    kEmptyCloud,
    kNonFinitePoint,
  };
  Kind kind;
  int view = -1;  // -1 when the finding is not tied to a view
  std::string message;
};

using ValidationReport = std::vector<ValidationFinding>;

namespace detail {
inline void check_cloud(const PointCloud& cloud, const char* name, ValidationReport& report) {
  if (cloud.empty()) {
    report.push_back({ValidationFinding::Kind::kEmptyCloud, -1, std::string(name) + " is empty"});
    return;
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud[i].allFinite()) {
      report.push_back({ValidationFinding::Kind::kNonFinitePoint, -1,
                        std::string(name) + " point " + std::to_string(i) + " is not finite"});
      return;
    }
  }
}
}  // namespace detail

/// Lists every invariant violation in a dataset; empty iff valid.
inline ValidationReport validate_dataset(const Dataset& dataset) {
  ValidationReport report;
  if (dataset.views.empty()) {
    report.push_back({ValidationFinding::Kind::kNoViews, -1, "dataset has no views"});
  }
  for (std::size_t j = 0; j < dataset.views.size(); ++j) {
    const auto& cam = dataset.views[j].camera;
    const auto& mask = dataset.views[j].mask;
    const int view = static_cast<int>(j);
    if (!(cam.fx > 0.0) || !(cam.fy > 0.0) || cam.width < 1 || cam.height < 1) {
      report.push_back({ValidationFinding::Kind::kBadIntrinsics, view,
                        "view " + std::to_string(j) + " has invalid intrinsics"});
    }
    if (!is_rotation(cam.rotation)) {
      report.push_back({ValidationFinding::Kind::kNonOrthonormalRotation, view,
                        "view " + std::to_string(j) + " rotation is not orthonormal"});
    }
    if (mask.width() != cam.width || mask.height() != cam.height) {
      report.push_back({ValidationFinding::Kind::kDimensionMismatch, view,
                        "view " + std::to_string(j) + " mask is " + std::to_string(mask.width()) +
                            "x" + std::to_string(mask.height()) + " but camera is " +
                            std::to_string(cam.width) + "x" + std::to_string(cam.height)});
    }
  }
  detail::check_cloud(dataset.env_cloud, "env cloud", report);
  detail::check_cloud(dataset.crop_cloud, "crop cloud", report);
  return report;
}

}  // namespace cropseg
