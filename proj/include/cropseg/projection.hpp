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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cropseg/error.hpp"
#include "cropseg/rng.hpp"
#include "cropseg/scene.hpp"

namespace cropseg {

/// Set of in-bounds pixels, stored as sorted unique linear indices
/// (y * width + x). Area is the pixel count.
class Footprint {
 public:
  Footprint() = default;
  Footprint(int width, int height, std::vector<std::uint32_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    std::sort(pixels_.begin(), pixels_.end());
    pixels_.erase(std::unique(pixels_.begin(), pixels_.end()), pixels_.end());
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t area() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }
  const std::vector<std::uint32_t>& pixels() const { return pixels_; }

  bool contains(std::uint32_t linear) const {
    return std::binary_search(pixels_.begin(), pixels_.end(), linear);
  }
  bool contains(Pixel p) const {
    return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_ &&
           contains(static_cast<std::uint32_t>(p.y * width_ + p.x));
  }
  bool is_subset_of(const Footprint& other) const {
    return std::includes(other.pixels_.begin(), other.pixels_.end(), pixels_.begin(),
                         pixels_.end());
  }

  friend bool operator==(const Footprint&, const Footprint&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint32_t> pixels_;
};

/// Per-pixel nearest depth, +infinity where nothing was splatted.
class DepthBuffer {
 public:
  DepthBuffer() = default;
  DepthBuffer(int width, int height)
      : width_(width),
        height_(height),
        depth_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
               std::numeric_limits<double>::infinity()) {}

  int width() const { return width_; }
  int height() const { return height_; }
  double at(std::uint32_t linear) const { return depth_[linear]; }
  double at(int x, int y) const { return depth_[static_cast<std::size_t>(y) * width_ + x]; }
  void write_min(std::uint32_t linear, double depth) {
    if (depth < depth_[linear]) depth_[linear] = depth;
  }
  const std::vector<double>& depths() const { return depth_; }

  friend bool operator==(const DepthBuffer&, const DepthBuffer&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> depth_;
};

/// Pixel radius of a splat: the world radius scaled by focal length over
/// depth, rounded, never below one pixel.
inline int splat_pixel_radius(const CameraView& view, double radius, double depth) {
  const double r = std::round(view.fx * radius / depth);
  const double cap = static_cast<double>(std::max(view.width, view.height));
  return static_cast<int>(std::clamp(r, 1.0, cap));
}

/// Calls fn(linear_pixel, depth) for every in-bounds pixel of the disc a
/// point splats to. Points at or behind the image plane produce nothing.
template <class Fn>
void for_each_splat_pixel(const CameraView& view, const Vec3& point, double radius, Fn&& fn) {
  const Vec3 c = view.to_camera(point);
  const double depth = c.z();
  if (!(depth > 0.0)) return;
  const double u = view.fx * c.x() / depth + view.cx;
  const double v = view.fy * c.y() / depth + view.cy;
  if (!std::isfinite(u) || !std::isfinite(v)) return;
  const int pr = splat_pixel_radius(view, radius, depth);
  const double cu = std::round(u);
  const double cv = std::round(v);
  if (cu + pr < 0.0 || cv + pr < 0.0 || cu - pr >= view.width || cv - pr >= view.height) return;
  const int px = static_cast<int>(cu);
  const int py = static_cast<int>(cv);
  const int r2 = pr * pr;
  const int y0 = std::max(py - pr, 0);
  const int y1 = std::min(py + pr, view.height - 1);
  for (int y = y0; y <= y1; ++y) {
    const int dy = y - py;
    const int span = static_cast<int>(std::floor(std::sqrt(static_cast<double>(r2 - dy * dy))));
    const int x0 = std::max(px - span, 0);
    const int x1 = std::min(px + span, view.width - 1);
    for (int x = x0; x <= x1; ++x) {
      fn(static_cast<std::uint32_t>(y * view.width + x), depth);
    }
  }
}

namespace detail {

// Grid nearest-neighbour search used by estimate_point_radius.
class NearestGrid {
 public:
  explicit NearestGrid(const std::vector<Vec3>& points) : points_(points) {
    lo_ = points.front();
    Vec3 hi = points.front();
    for (const auto& p : points) {
      lo_ = lo_.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Vec3 extent = (hi - lo_).cwiseMax(1e-9);
    const double volume = extent.x() * extent.y() * extent.z();
    cell_ = std::cbrt(volume / static_cast<double>(points.size())) * 2.0;
    cell_ = std::max({cell_, extent.maxCoeff() / 1000.0, 1e-9});
    const double max_cells = 8.0 * static_cast<double>(points.size()) + 64.0;
    while ((std::floor(extent.x() / cell_) + 1.0) * (std::floor(extent.y() / cell_) + 1.0) *
               (std::floor(extent.z() / cell_) + 1.0) >
           max_cells) {
      cell_ *= 1.5;
    }
    for (int a = 0; a < 3; ++a) dims_[a] = static_cast<int>(std::floor(extent[a] / cell_) + 1.0);
    cells_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2], {});
    for (std::size_t i = 0; i < points.size(); ++i) cells_[flat(cell_of(points[i]))].push_back(i);
  }

  double nearest_distance(std::size_t query) const {
    const auto c = cell_of(points_[query]);
    double best = std::numeric_limits<double>::infinity();
    const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
    for (int ring = 0; ring <= max_ring; ++ring) {
      // Anything in ring r+1 or beyond is at least r*cell away.
      if (std::sqrt(best) <= (ring - 1) * cell_) break;
      for (int dx = -ring; dx <= ring; ++dx) {
        for (int dy = -ring; dy <= ring; ++dy) {
          for (int dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            const std::array<int, 3> n{c[0] + dx, c[1] + dy, c[2] + dz};
            if (n[0] < 0 || n[1] < 0 || n[2] < 0 || n[0] >= dims_[0] || n[1] >= dims_[1] ||
                n[2] >= dims_[2]) {
              continue;
            }
            for (const std::size_t j : cells_[flat(n)]) {
              if (j == query) continue;
              best = std::min(best, (points_[j] - points_[query]).squaredNorm());
            }
          }
        }
      }
    }
    return std::sqrt(best);
  }

 private:
  std::array<int, 3> cell_of(const Vec3& p) const {
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp(static_cast<int>(std::floor((p[a] - lo_[a]) / cell_)), 0, dims_[a] - 1);
    }
    return c;
  }
  std::size_t flat(const std::array<int, 3>& c) const {
    return (static_cast<std::size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
  }

  const std::vector<Vec3>& points_;
  Vec3 lo_;
  double cell_ = 1.0;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<std::vector<std::size_t>> cells_;
};

inline double median(std::vector<double> values) {
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace detail

inline constexpr std::size_t kDefaultRadiusSample = 2000;

/// Median nearest-neighbour distance over a seeded sample of the cloud;
/// this is the world-space splat radius.
inline double estimate_point_radius(const PointCloud& cloud,
                                    std::size_t sample_size = kDefaultRadiusSample,
                                    std::uint64_t seed = 0) {
  if (cloud.size() < 2) throw DataError("point radius needs at least two points");
  const std::size_t n = cloud.size();
  std::vector<std::size_t> sample(n);
  for (std::size_t i = 0; i < n; ++i) sample[i] = i;
  if (sample_size < n) {
    Rng rng(seed);
    // Partial Fisher-Yates: the first sample_size slots are the sample.
    for (std::size_t i = 0; i < sample_size; ++i) {
      std::swap(sample[i], sample[i + rng.below(n - i)]);
    }
    sample.resize(std::max<std::size_t>(sample_size, 1));
  }
  const detail::NearestGrid grid(cloud.points);
  std::vector<double> distances;
  distances.reserve(sample.size());
  for (const std::size_t i : sample) distances.push_back(grid.nearest_distance(i));
  return detail::median(std::move(distances));
}

/// Occlusion-free projection: union of the in-bounds splat discs of all
/// points in front of the camera.
inline Footprint splat_footprint(const CameraView& view, const PointCloud& points,
                                 double radius) {
  if (!(radius > 0.0)) throw UsageError("splat radius must be positive");
  std::vector<std::uint32_t> pixels;
  for (const auto& p : points.points) {
    for_each_splat_pixel(view, p, radius, [&](std::uint32_t px, double) { pixels.push_back(px); });
  }
  return Footprint(view.width, view.height, std::move(pixels));
}

/// Splats more points into an existing buffer, keeping the minimum depth.
inline void splat_into(DepthBuffer& buffer, const CameraView& view, const PointCloud& points,
                       double radius) {
  for (const auto& p : points.points) {
    for_each_splat_pixel(view, p, radius,
                         [&](std::uint32_t px, double depth) { buffer.write_min(px, depth); });
  }
}

inline DepthBuffer build_depth_buffer(const CameraView& view, const PointCloud& occluders,
                                      double radius) {
  if (!(radius > 0.0)) throw UsageError("splat radius must be positive");
  DepthBuffer buffer(view.width, view.height);
  splat_into(buffer, view, occluders, radius);
  return buffer;
}

/// Occlusion-aware projection. A disc pixel of a subcluster point is kept
/// when the point is no farther than the buffer depth plus the tolerance.
/// The buffer must already contain the subcluster's own splats.
inline Footprint visible_footprint(const CameraView& view, const PointCloud& subcluster,
                                   const DepthBuffer& buffer, double radius,
                                   double depth_tolerance) {
  if (!(radius > 0.0)) throw UsageError("splat radius must be positive");
  if (buffer.width() != view.width || buffer.height() != view.height) {
    throw DataError("depth buffer size does not match the view");
  }
  std::vector<std::uint32_t> pixels;
  for (const auto& p : subcluster.points) {
    for_each_splat_pixel(view, p, radius, [&](std::uint32_t px, double depth) {
      if (depth <= buffer.at(px) + depth_tolerance) pixels.push_back(px);
    });
  }
  return Footprint(view.width, view.height, std::move(pixels));
}

}  // namespace cropseg
