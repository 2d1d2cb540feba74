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
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "cropseg/error.hpp"
#include "cropseg/parallel.hpp"
#include "cropseg/projection.hpp"
#include "cropseg/rng.hpp"
#include "cropseg/scene.hpp"

namespace cropseg::synth {

enum class Shape { kSphere, kEllipsoid };

/// Parameters of a synthetic crop scene. Instances are distributed
/// round-robin over `cluster_count` spatial clusters; within a cluster each
/// instance is placed `gap` meters (surface to surface, bounding spheres)
/// from an earlier one. Cameras sit on a ring around the layout centroid
/// with elevations spread over [-ring_height, ring_height].
struct SceneSpec {
  int instance_count = 10;
  double radius_min = 0.015;
  double radius_max = 0.025;
  int cluster_count = 4;
  double gap = 0.008;
  double cluster_spacing = 0.06;
  Shape shape = Shape::kSphere;
  double max_axis_ratio = 1.6;
  int foliage_blobs = 10;
  double foliage_radius = 0.035;
  int foliage_points = 250;
  int view_count = 30;
  double ring_radius = 0.9;
  double ring_height = 0.35;
  int image_width = 400;
  int image_height = 300;
  double focal = 300.0;
  int points_per_instance = 400;
  std::uint64_t seed = 1;
};

struct GroundTruth {
  std::vector<int> point_instance;  // per crop point, 0-based instance index
  int count = 0;
  std::vector<InstanceMask> masks;  // uncorrupted
  // view_ids[j][k]: mask id of instance k in view j (ids are view-local).
  std::vector<std::vector<std::uint32_t>> view_ids;
  // visible_fraction[j][k]: mask pixels of instance k over its occlusion-free
  // splat area in view j; 0 when it does not project.
  std::vector<std::vector<double>> visible_fraction;
  std::vector<Vec3> centers;
  std::vector<double> radii;
};

struct Scene {
  Dataset dataset;
  GroundTruth truth;
  double point_radius = 0.0;  // splat radius used for the true masks
};

enum class MergeTargeting {
  kUniform,    // every adjacent pair in every view, independently
  kOccluded,   // the most mutually occluded views, as detectors fail there
};

/// Label-level mask corruption modelled on common detector failures:
/// merged neighbours, missed instances, and misaligned boundaries.
struct CorruptionSpec {
  double merge_probability = 0.0;
  MergeTargeting merge_targeting = MergeTargeting::kUniform;
  double drop_probability = 0.0;
  int boundary_radius = 0;  // > 0 dilates every instance, < 0 erodes
  double jitter_probability = 0.0;
  int jitter_pixels = 2;
  std::uint64_t seed = 7;
};

struct CorruptionEvent {
  int view = 0;
  std::string op;  // merge, drop, dilate, erode, jitter
  std::vector<std::uint32_t> ids;
  friend bool operator==(const CorruptionEvent&, const CorruptionEvent&) = default;
};

struct CorruptionResult {
  std::vector<InstanceMask> masks;
  std::vector<CorruptionEvent> log;

  std::set<int> corrupted_views(std::string_view op = {}) const {
    std::set<int> views;
    for (const auto& e : log) {
      if (op.empty() || e.op == op) views.insert(e.view);
    }
    return views;
  }
};

namespace detail {

// Quasi-uniform unit-sphere directions (Fibonacci lattice).
inline std::vector<Vec3> fibonacci_sphere(int count) {
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return dirs;
}

inline Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

inline Vec3 random_direction(Rng& rng) {
  Vec3 d(rng.normal(), rng.normal(), rng.normal());
  while (d.norm() < 1e-12) d = Vec3(rng.normal(), rng.normal(), rng.normal());
  return d.normalized();
}

struct Placed {
  Vec3 center;
  double radius;  // bounding radius
};

}  // namespace detail

/// Front-most-splat label rendering. Instance k becomes id k + 1. Instance
/// splats are written before env splats and a pixel only changes owner on
/// a strictly nearer splat, so env_cloud may contain the instance points
/// themselves; any other env point that wins a pixel makes it background.
inline std::vector<InstanceMask> render_true_masks(const std::vector<CameraView>& views,
                                                   const std::vector<PointCloud>& instances,
                                                   const PointCloud& env_cloud, double radius,
                                                   int workers = 1) {
  std::vector<InstanceMask> masks(views.size());
  parallel_for(views.size(), workers, [&](std::size_t j) {
    const auto& view = views[j];
    std::vector<double> depth(view.pixel_count(), std::numeric_limits<double>::infinity());
    InstanceMask mask(view.width, view.height);
    for (std::size_t k = 0; k < instances.size(); ++k) {
      const auto id = static_cast<std::uint32_t>(k + 1);
      for (const auto& p : instances[k].points) {
        for_each_splat_pixel(view, p, radius, [&](std::uint32_t px, double d) {
          if (d < depth[px]) {
            depth[px] = d;
            mask[px] = id;
          }
        });
      }
    }
    for (const auto& p : env_cloud.points) {
      for_each_splat_pixel(view, p, radius, [&](std::uint32_t px, double d) {
        if (d < depth[px]) {
          depth[px] = d;
          mask[px] = 0;
        }
      });
    }
    masks[j] = std::move(mask);
  });
  return masks;
}

inline std::vector<CameraView> camera_ring(const SceneSpec& spec, const Vec3& target) {
  std::vector<CameraView> views;
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int j = 0; j < spec.view_count; ++j) {
    const double azimuth = 2.0 * std::numbers::pi * j / spec.view_count;
    const double lift = spec.ring_height * std::cos(2.0 * std::numbers::pi * golden * j);
    const Vec3 eye = target + Vec3(spec.ring_radius * std::cos(azimuth),
                                   spec.ring_radius * std::sin(azimuth), lift);
    views.push_back(CameraView::look_at(eye, target, Vec3::UnitZ(), spec.focal, spec.focal,
                                        (spec.image_width - 1) / 2.0,
                                        (spec.image_height - 1) / 2.0, spec.image_width,
                                        spec.image_height));
  }
  return views;
}

inline void validate(const SceneSpec& spec) {
  if (spec.instance_count < 0 || spec.cluster_count < 0 || spec.foliage_blobs < 0 ||
      spec.foliage_points < 0 || spec.points_per_instance < 0) {
    throw UsageError("scene counts must be non-negative");
  }
  if (spec.instance_count > 0 && spec.cluster_count < 1) {
    throw UsageError("instances need at least one cluster");
  }
  if (!(spec.radius_min > 0.0) || spec.radius_max < spec.radius_min || !(spec.foliage_radius > 0.0)) {
    throw UsageError("scene radii must be positive and ordered");
  }
  if (spec.view_count < 1) throw UsageError("scene needs at least one view");
  if (spec.image_width < 1 || spec.image_height < 1 || !(spec.focal > 0.0)) {
    throw UsageError("invalid image size or focal length");
  }
  if (spec.shape == Shape::kEllipsoid && spec.max_axis_ratio < 1.0) {
    throw UsageError("ellipsoid axis ratio must be at least 1");
  }
}

/// Builds a scene and its ground truth. Deterministic per spec.seed.
inline Scene generate_scene(const SceneSpec& spec, int workers = 1) {
  validate(spec);
  constexpr int kAttempts = 1000;
  Rng rng(spec.seed);

  // Instances per cluster, round-robin.
  std::vector<std::vector<int>> members(static_cast<std::size_t>(std::max(spec.cluster_count, 0)));
  for (int k = 0; k < spec.instance_count; ++k) {
    members[static_cast<std::size_t>(k % spec.cluster_count)].push_back(k);
  }

  std::vector<double> radii(static_cast<std::size_t>(spec.instance_count));
  std::vector<Vec3> semi_axes(radii.size());
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double r = rng.uniform(spec.radius_min, spec.radius_max);
    if (spec.shape == Shape::kEllipsoid) {
      const double ratio = rng.uniform(1.0, spec.max_axis_ratio);
      semi_axes[k] = Vec3(r, r / std::sqrt(ratio), r / ratio);
    } else {
      semi_axes[k] = Vec3(r, r, r);
    }
    radii[k] = r;  // bounding radius
  }

  // Lay out each cluster around its own origin.
  std::vector<Vec3> local(radii.size(), Vec3::Zero());
  std::vector<double> cluster_extent(members.size(), 0.0);
  for (std::size_t c = 0; c < members.size(); ++c) {
    std::vector<detail::Placed> placed;
    for (const int k : members[c]) {
      const double r = radii[static_cast<std::size_t>(k)];
      Vec3 center = Vec3::Zero();
      if (!placed.empty()) {
        bool ok = false;
        for (int attempt = 0; attempt < kAttempts && !ok; ++attempt) {
          const auto& anchor = placed[rng.below(placed.size())];
          center = anchor.center + detail::random_direction(rng) * (anchor.radius + r + spec.gap);
          ok = true;
          for (const auto& other : placed) {
            if ((other.center - center).norm() < other.radius + r + spec.gap - 1e-9) {
              ok = false;
              break;
            }
          }
        }
        if (!ok) throw DataError("could not place instance " + std::to_string(k));
      }
      placed.push_back({center, r});
      local[static_cast<std::size_t>(k)] = center;
    }
    if (!placed.empty()) {
      Vec3 mean = Vec3::Zero();
      for (const auto& p : placed) mean += p.center;
      mean /= static_cast<double>(placed.size());
      for (const int k : members[c]) local[static_cast<std::size_t>(k)] -= mean;
      for (const auto& p : placed) {
        cluster_extent[c] = std::max(cluster_extent[c], (p.center - mean).norm() + p.radius);
      }
    }
  }

  // Place cluster centers in a box that grows with the cluster count.
  // Box volume is a fixed multiple of the space the clusters need.
  double need = 0.0;
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (!members[c].empty()) need += std::pow(2.0 * cluster_extent[c] + spec.cluster_spacing, 3.0);
  }
  const double half = std::max(0.05, 0.5 * std::cbrt(4.0 * need / 0.6));
  const double half_z = 0.6 * half;
  std::vector<detail::Placed> cluster_centers;
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].empty()) continue;
    bool ok = false;
    Vec3 center;
    for (int attempt = 0; attempt < kAttempts && !ok; ++attempt) {
      center = Vec3(rng.uniform(-half, half), rng.uniform(-half, half), rng.uniform(-half_z, half_z));
      ok = true;
      for (const auto& other : cluster_centers) {
        if ((other.center - center).norm() < other.radius + cluster_extent[c] + spec.cluster_spacing) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) throw DataError("could not place cluster " + std::to_string(c));
    cluster_centers.push_back({center, cluster_extent[c]});
    for (const int k : members[c]) local[static_cast<std::size_t>(k)] += center;
  }

  // Surface samples.
  std::vector<PointCloud> instances(radii.size());
  const auto base = detail::fibonacci_sphere(spec.points_per_instance);
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const Mat3 rot = detail::random_rotation(rng);
    auto& pts = instances[k].points;
    pts.reserve(base.size());
    for (const auto& d : base) pts.push_back(local[k] + rot * d.cwiseProduct(semi_axes[k]));
  }

  // Foliage blobs, kept clear of every instance.
  PointCloud foliage;
  const double blob_half = half + 0.05;
  const double blob_half_z = half_z + 0.05;
  for (int b = 0; b < spec.foliage_blobs; ++b) {
    bool ok = false;
    Vec3 center;
    for (int attempt = 0; attempt < kAttempts && !ok; ++attempt) {
      center = Vec3(rng.uniform(-blob_half, blob_half), rng.uniform(-blob_half, blob_half),
                    rng.uniform(-blob_half_z, blob_half_z));
      ok = true;
      for (std::size_t k = 0; k < radii.size(); ++k) {
        if ((local[k] - center).norm() < radii[k] + spec.foliage_radius + 0.01) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) throw DataError("could not place foliage blob " + std::to_string(b));
    for (int i = 0; i < spec.foliage_points; ++i) {
      const double r = spec.foliage_radius * std::cbrt(rng.uniform());
      foliage.points.push_back(center + detail::random_direction(rng) * r);
    }
  }

  Scene scene;
  auto& ds = scene.dataset;
  auto& truth = scene.truth;
  truth.count = spec.instance_count;
  truth.radii = radii;
  truth.centers = local;
  for (std::size_t k = 0; k < instances.size(); ++k) {
    ds.crop_cloud.append(instances[k]);
    truth.point_instance.insert(truth.point_instance.end(), instances[k].size(), static_cast<int>(k));
  }
  ds.env_cloud = ds.crop_cloud;
  ds.env_cloud.append(foliage);

  Vec3 target = Vec3::Zero();
  if (!local.empty()) {
    for (const auto& c : local) target += c;
    target /= static_cast<double>(local.size());
  }
  const auto cameras = camera_ring(spec, target);

  scene.point_radius = ds.env_cloud.size() >= 2 ? estimate_point_radius(ds.env_cloud) : 0.01;
  auto masks = render_true_masks(cameras, instances, ds.env_cloud, scene.point_radius, workers);

  // View-local ids: a seeded permutation per view.
  truth.view_ids.resize(cameras.size());
  truth.visible_fraction.resize(cameras.size());
  parallel_for(cameras.size(), workers, [&](std::size_t j) {
    Rng view_rng = Rng::stream(spec.seed, j + 1);
    std::vector<std::uint32_t> ids(instances.size());
    for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = static_cast<std::uint32_t>(k + 1);
    view_rng.shuffle(ids);
    std::vector<std::size_t> pixels(instances.size(), 0);
    for (auto& label : masks[j].labels()) {
      if (label == 0) continue;
      ++pixels[label - 1];
      label = ids[label - 1];
    }
    truth.view_ids[j] = ids;
    truth.visible_fraction[j].resize(instances.size());
    for (std::size_t k = 0; k < instances.size(); ++k) {
      const auto area = splat_footprint(cameras[j], instances[k], scene.point_radius).area();
      truth.visible_fraction[j][k] =
          area == 0 ? 0.0 : static_cast<double>(pixels[k]) / static_cast<double>(area);
    }
  });

  truth.masks = masks;
  for (std::size_t j = 0; j < cameras.size(); ++j) ds.views.push_back({cameras[j], masks[j]});
  return scene;
}

/// Mean over views of the fraction of instances whose id appears in the
/// view's mask.
inline double mean_visible_instance_fraction(const Scene& scene) {
  if (scene.truth.count == 0 || scene.dataset.views.empty()) return 0.0;
  double total = 0.0;
  for (const auto& view : scene.dataset.views) {
    std::set<std::uint32_t> ids(view.mask.labels().begin(), view.mask.labels().end());
    ids.erase(0);
    total += static_cast<double>(ids.size()) / scene.truth.count;
  }
  return total / static_cast<double>(scene.dataset.views.size());
}

namespace detail {

// Pairs of distinct positive ids that touch under 4-connectivity.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> adjacent_pairs(const InstanceMask& m) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> pairs;
  auto visit = [&](std::uint32_t a, std::uint32_t b) {
    if (a != 0 && b != 0 && a != b) pairs.insert({std::min(a, b), std::max(a, b)});
  };
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (x + 1 < m.width()) visit(m.at(x, y), m.at(x + 1, y));
      if (y + 1 < m.height()) visit(m.at(x, y), m.at(x, y + 1));
    }
  }
  return {pairs.begin(), pairs.end()};
}

inline void relabel(InstanceMask& mask, std::uint32_t from, std::uint32_t to) {
  for (auto& label : mask.labels()) {
    if (label == from) label = to;
  }
}

// One 4-neighbour growth step into background; the smallest neighbouring
// id wins.
inline void dilate_once(InstanceMask& mask) {
  const InstanceMask src = mask;
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      if (src.at(x, y) != 0) continue;
      std::uint32_t best = 0;
      auto consider = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= src.width() || ny >= src.height()) return;
        const auto id = src.at(nx, ny);
        if (id != 0 && (best == 0 || id < best)) best = id;
      };
      consider(x - 1, y);
      consider(x + 1, y);
      consider(x, y - 1);
      consider(x, y + 1);
      mask.at(x, y) = best;
    }
  }
}

// Clears every labeled pixel that has a 4-neighbour with another value.
inline void erode_once(InstanceMask& mask) {
  const InstanceMask src = mask;
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const auto id = src.at(x, y);
      if (id == 0) continue;
      auto differs = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= src.width() || ny >= src.height()) return false;
        return src.at(nx, ny) != id;
      };
      if (differs(x - 1, y) || differs(x + 1, y) || differs(x, y - 1) || differs(x, y + 1)) {
        mask.at(x, y) = 0;
      }
    }
  }
}

inline InstanceMask shift(const InstanceMask& src, int dx, int dy) {
  InstanceMask out(src.width(), src.height());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const int sx = x - dx;
      const int sy = y - dy;
      if (sx >= 0 && sy >= 0 && sx < src.width() && sy < src.height()) out.at(x, y) = src.at(sx, sy);
    }
  }
  return out;
}

// How hidden the most occluded member of a pair is in view j (0 = both
// fully visible).
inline double pair_occlusion(const GroundTruth& truth, std::size_t j, std::uint32_t a,
                             std::uint32_t b) {
  if (j >= truth.view_ids.size() || j >= truth.visible_fraction.size()) return 0.0;
  const auto& ids = truth.view_ids[j];
  double worst = 0.0;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] == a || ids[k] == b) worst = std::max(worst, 1.0 - truth.visible_fraction[j][k]);
  }
  return worst;
}

}  // namespace detail

inline void validate(const CorruptionSpec& spec) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(spec.merge_probability) || !prob(spec.drop_probability) ||
      !prob(spec.jitter_probability)) {
    throw UsageError("corruption probabilities must lie in [0, 1]");
  }
  if (spec.jitter_pixels < 0) throw UsageError("jitter_pixels must be non-negative");
}

/// Applies merge, drop, boundary and jitter corruption per view, in that
/// order. Geometry is never touched; only label grids change.
inline CorruptionResult corrupt_masks(const std::vector<InstanceMask>& masks,
                                      const GroundTruth& truth, const CorruptionSpec& spec) {
  validate(spec);
  CorruptionResult result;
  result.masks = masks;
  const std::size_t n = masks.size();

  // Views chosen for merging under occlusion targeting, with the pair.
  std::map<std::size_t, std::pair<std::uint32_t, std::uint32_t>> targeted;
  if (spec.merge_targeting == MergeTargeting::kOccluded && spec.merge_probability > 0.0) {
    std::vector<std::tuple<double, std::size_t, std::pair<std::uint32_t, std::uint32_t>>> ranked;
    for (std::size_t j = 0; j < n; ++j) {
      const auto pairs = detail::adjacent_pairs(masks[j]);
      if (pairs.empty()) continue;
      double best = -1.0;
      std::pair<std::uint32_t, std::uint32_t> best_pair;
      for (const auto& [a, b] : pairs) {
        const double occ = detail::pair_occlusion(truth, j, a, b);
        if (occ > best) {
          best = occ;
          best_pair = {a, b};
        }
      }
      ranked.emplace_back(-best, j, best_pair);
    }
    std::sort(ranked.begin(), ranked.end());
    const auto take = static_cast<std::size_t>(
        std::llround(spec.merge_probability * static_cast<double>(ranked.size())));
    for (std::size_t t = 0; t < take && t < ranked.size(); ++t) {
      targeted[std::get<1>(ranked[t])] = std::get<2>(ranked[t]);
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    Rng rng = Rng::stream(spec.seed, j);
    auto& mask = result.masks[j];
    const int view = static_cast<int>(j);

    if (spec.merge_targeting == MergeTargeting::kUniform) {
      for (const auto& [a, b] : detail::adjacent_pairs(masks[j])) {
        if (!rng.bernoulli(spec.merge_probability)) continue;
        // Earlier merges may have renamed either id.
        std::set<std::uint32_t> present(mask.labels().begin(), mask.labels().end());
        if (!present.contains(a) || !present.contains(b)) continue;
        detail::relabel(mask, b, a);
        result.log.push_back({view, "merge", {a, b}});
      }
    } else if (const auto it = targeted.find(j); it != targeted.end()) {
      detail::relabel(mask, it->second.second, it->second.first);
      result.log.push_back({view, "merge", {it->second.first, it->second.second}});
    }

    std::set<std::uint32_t> ids(mask.labels().begin(), mask.labels().end());
    ids.erase(0);
    for (const auto id : ids) {
      if (!rng.bernoulli(spec.drop_probability)) continue;
      detail::relabel(mask, id, 0);
      result.log.push_back({view, "drop", {id}});
    }

    if (spec.boundary_radius != 0) {
      const InstanceMask before = mask;
      for (int step = 0; step < std::abs(spec.boundary_radius); ++step) {
        if (spec.boundary_radius > 0) {
          detail::dilate_once(mask);
        } else {
          detail::erode_once(mask);
        }
      }
      if (!(mask == before)) {
        result.log.push_back({view, spec.boundary_radius > 0 ? "dilate" : "erode", {}});
      }
    }

    if (rng.bernoulli(spec.jitter_probability) && spec.jitter_pixels > 0) {
      const int span = 2 * spec.jitter_pixels + 1;
      int dx = 0;
      int dy = 0;
      while (dx == 0 && dy == 0) {
        dx = static_cast<int>(rng.below(static_cast<std::uint64_t>(span))) - spec.jitter_pixels;
        dy = static_cast<int>(rng.below(static_cast<std::uint64_t>(span))) - spec.jitter_pixels;
      }
      mask = detail::shift(mask, dx, dy);
      result.log.push_back({view, "jitter", {}});
    }
  }
  return result;
}

/// Visibility of `subcluster` in `view` by exact ray casting.
///
/// Each point is a sphere of radius max(point_radius, depth / fx), i.e. never
/// thinner than a pixel. Rays go through supersample x supersample sub-pixel
/// centres; a sub-pixel whose ray hits the subcluster counts toward the
/// occlusion-free area, and toward the visible area when that hit is within
/// `depth_tolerance` of the nearest hit over env_cloud ∪ subcluster. The
/// ratio of visible to occlusion-free sub-pixel areas equals the ratio of
/// per-pixel coverage fractions summed on the view grid.
inline double raycast_visibility_oracle(const CameraView& view, const PointCloud& subcluster,
                                        const PointCloud& env_cloud, double point_radius,
                                        int supersample, double depth_tolerance) {
  if (supersample < 1) throw UsageError("supersample factor must be at least 1");
  const int s = supersample;
  const double step = 1.0 / s;

  struct Ball {
    Vec3 c;  // camera frame
    double r;
  };
  auto to_ball = [&](const Vec3& p) -> std::optional<Ball> {
    const Vec3 c = view.to_camera(p);
    if (!(c.z() > 0.0)) return std::nullopt;
    return Ball{c, std::max(point_radius, c.z() / view.fx)};
  };
  // Sub-pixel rectangle [x0,x1]x[y0,y1] conservatively covering a ball.
  struct Rect {
    int x0, y0, x1, y1;
  };
  const int sw = view.width * s;
  const int sh = view.height * s;
  auto bounds = [&](const Ball& b) -> std::optional<Rect> {
    if (b.c.z() <= b.r * 1.0001) {  // cube would reach the image plane
      return Rect{0, 0, sw - 1, sh - 1};
    }
    // The projected bounding cube contains the projected ball.
    double u0 = std::numeric_limits<double>::infinity();
    double v0 = u0;
    double u1 = -u0;
    double v1 = -u0;
    for (int corner = 0; corner < 8; ++corner) {
      const Vec3 q = b.c + b.r * Vec3(corner & 1 ? 1 : -1, corner & 2 ? 1 : -1, corner & 4 ? 1 : -1);
      const double u = view.fx * q.x() / q.z() + view.cx;
      const double v = view.fy * q.y() / q.z() + view.cy;
      u0 = std::min(u0, u);
      u1 = std::max(u1, u);
      v0 = std::min(v0, v);
      v1 = std::max(v1, v);
    }
    // Sub-pixel a is centred at pixel coordinate (a + 0.5) / s - 0.5.
    auto to_sub = [&](double pix) { return (pix + 0.5) * s - 0.5; };
    Rect r{static_cast<int>(std::floor(to_sub(u0))), static_cast<int>(std::floor(to_sub(v0))),
           static_cast<int>(std::ceil(to_sub(u1))), static_cast<int>(std::ceil(to_sub(v1)))};
    r.x0 = std::max(r.x0, 0);
    r.y0 = std::max(r.y0, 0);
    r.x1 = std::min(r.x1, sw - 1);
    r.y1 = std::min(r.y1, sh - 1);
    if (r.x0 > r.x1 || r.y0 > r.y1) return std::nullopt;
    return r;
  };
  auto ray = [&](int a, int b) {
    const double px = (a + 0.5) * step - 0.5;
    const double py = (b + 0.5) * step - 0.5;
    return Vec3((px - view.cx) / view.fx, (py - view.cy) / view.fy, 1.0).normalized();
  };
  // Depth (camera z) of the nearest intersection, or +inf.
  auto hit_depth = [](const Vec3& dir, const Ball& b) {
    const double proj = dir.dot(b.c);
    const double disc = proj * proj - (b.c.squaredNorm() - b.r * b.r);
    if (disc < 0.0) return std::numeric_limits<double>::infinity();
    double t = proj - std::sqrt(disc);
    if (t <= 0.0) t = proj + std::sqrt(disc);
    if (t <= 0.0) return std::numeric_limits<double>::infinity();
    return t * dir.z();
  };

  std::vector<Ball> subject;
  std::optional<Rect> region;
  for (const auto& p : subcluster.points) {
    const auto b = to_ball(p);
    if (!b) continue;
    const auto r = bounds(*b);
    if (!r) continue;
    subject.push_back(*b);
    if (!region) {
      region = r;
    } else {
      region->x0 = std::min(region->x0, r->x0);
      region->y0 = std::min(region->y0, r->y0);
      region->x1 = std::max(region->x1, r->x1);
      region->y1 = std::max(region->y1, r->y1);
    }
  }
  if (!region) return 0.0;
  const int rw = region->x1 - region->x0 + 1;
  const int rh = region->y1 - region->y0 + 1;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> own(static_cast<std::size_t>(rw) * rh, inf);
  std::vector<double> nearest(own.size(), inf);
  auto trace = [&](const Ball& b, std::vector<double>& target) {
    const auto r = bounds(b);
    if (!r) return;
    const int x0 = std::max(r->x0, region->x0);
    const int x1 = std::min(r->x1, region->x1);
    const int y0 = std::max(r->y0, region->y0);
    const int y1 = std::min(r->y1, region->y1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = hit_depth(ray(x, y), b);
        auto& slot = target[static_cast<std::size_t>(y - region->y0) * rw + (x - region->x0)];
        if (d < slot) slot = d;
      }
    }
  };
  for (const auto& b : subject) trace(b, own);
  for (const auto& p : env_cloud.points) {
    if (const auto b = to_ball(p)) trace(*b, nearest);
  }
  std::size_t free_area = 0;
  std::size_t visible_area = 0;
  for (std::size_t i = 0; i < own.size(); ++i) {
    if (own[i] == inf) continue;
    ++free_area;
    if (own[i] <= std::min(nearest[i], own[i]) + depth_tolerance) ++visible_area;
  }
  if (free_area == 0) return 0.0;
  return static_cast<double>(visible_area) / static_cast<double>(free_area);
}

}  // namespace cropseg::synth
