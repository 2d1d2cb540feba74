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

// Scene builders shared by the unit tests and the acceptance binary.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cropseg/scene.hpp"
#include "cropseg/synth.hpp"

namespace cropseg::testing {

/// Spheres well separated relative to the point spacing (gap of several
/// splat radii), grouped at most `per_cluster` to a spatial cluster.
inline synth::SceneSpec crop_scene(std::uint64_t seed, int instances, int per_cluster = 4) {
  synth::SceneSpec spec;
  spec.seed = seed;
  spec.instance_count = instances;
  spec.cluster_count = (instances + per_cluster - 1) / per_cluster;
  spec.radius_min = 0.010;
  spec.radius_max = 0.015;
  spec.gap = 0.015;
  return spec;
}

/// Same layout rules, imaged by closer, higher-resolution cameras so that
/// each subcluster covers hundreds of pixels.
inline synth::SceneSpec close_up_scene(std::uint64_t seed, int instances) {
  synth::SceneSpec spec = crop_scene(seed, instances);
  spec.focal = 1200.0;
  spec.image_width = 800;
  spec.image_height = 600;
  spec.ring_radius = 0.5;
  spec.ring_height = 0.2;
  return spec;
}

/// A sphere centred on the optical axis behind an opaque point plane that
/// covers exactly the left half of the image.
struct HalfPlaneScene {
  CameraView view;
  PointCloud sphere;
  PointCloud plane;
  PointCloud env;  // plane plus sphere
  double radius = 0.002;
};

inline HalfPlaneScene half_plane_scene() {
  HalfPlaneScene s;
  s.view.fx = s.view.fy = 500.0;
  s.view.cx = s.view.cy = 199.5;
  s.view.width = s.view.height = 400;
  for (const Vec3& d : synth::detail::fibonacci_sphere(8000)) {
    s.sphere.points.push_back(Vec3(0.0, 0.0, 2.0) + 0.1 * d);
  }
  // One plane point per pixel centre in columns 0..198 at depth 1; a splat
  // of pixel radius 1 then covers columns 0..199.
  const double depth = 1.0;
  for (int v = 0; v < s.view.height; ++v) {
    for (int u = 0; u < 199; ++u) {
      s.plane.points.push_back(Vec3((u - s.view.cx) / s.view.fx * depth, (v - s.view.cy) / s.view.fy * depth,
                          depth));
    }
  }
  s.env = s.plane;
  s.env.append(s.sphere);
  return s;
}

/// True when every point of `points` projects inside the frame.
inline bool fully_in_frame(const CameraView& view, const PointCloud& points) {
  for (const auto& p : points.points) {
    if (!camera_project(view, p)) return false;
  }
  return !points.empty();
}

}  // namespace cropseg::testing
