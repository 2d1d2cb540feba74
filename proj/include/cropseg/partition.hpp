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
#include <unordered_map>
#include <utility>
#include <vector>

#include "cropseg/error.hpp"
#include "cropseg/rng.hpp"
#include "cropseg/scene.hpp"

namespace cropseg {

inline constexpr double kDefaultEps = 0.02;
inline constexpr int kDefaultMinPoints = 30;
inline constexpr int kDefaultK = 10;

/// A density-connected region of the crop cloud. `point_indices` index
/// into the cloud the supercluster was extracted from, ascending.
struct Supercluster {
  int id = 0;
  PointCloud points;
  std::vector<std::size_t> point_indices;
};

struct SubclusterId {
  int supercluster = 0;
  int local = 0;
  friend bool operator==(const SubclusterId&, const SubclusterId&) = default;
};

/// A k-means fragment of one supercluster. `point_indices` refer to the
/// same cloud as the parent's indices.
struct Subcluster {
  SubclusterId id;
  PointCloud points;
  std::vector<std::size_t> point_indices;
  Vec3 centroid = Vec3::Zero();
};

/// Uniform hash grid for fixed-radius neighbor queries.
class VoxelGrid {
 public:
  VoxelGrid(const std::vector<Vec3>& points, double cell) : points_(points), cell_(cell) {
    cells_.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(coords(points[i]))].push_back(i);
  }

  // Indices within `radius` (<= cell) of `query`, inclusive, ascending.
  void neighbors(const Vec3& query, double radius, std::vector<std::size_t>& out) const {
    out.clear();
    const auto c = coords(query);
    const double r2 = radius * radius;
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells_.end()) continue;
          for (const std::size_t j : it->second) {
            if ((points_[j] - query).squaredNorm() <= r2) out.push_back(j);
          }
        }
      }
    }
    std::sort(out.begin(), out.end());
  }

 private:
  std::array<std::int64_t, 3> coords(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
            static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }
  static std::uint64_t key(const std::array<std::int64_t, 3>& c) {
    // 21 bits per axis; collisions only merge buckets, distances are exact.
    const auto pack = [](std::int64_t v) { return static_cast<std::uint64_t>(v) & 0x1fffffULL; };
    return pack(c[0]) | (pack(c[1]) << 21) | (pack(c[2]) << 42);
  }

  const std::vector<Vec3>& points_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

/// Supercluster with every point of `cloud`, used when the DBSCAN phase is
/// skipped.
inline Supercluster whole_cloud_supercluster(const PointCloud& cloud) {
  Supercluster s;
  s.points = cloud;
  s.point_indices.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) s.point_indices[i] = i;
  return s;
}

/// DBSCAN over Euclidean distance. A point is core when at least
/// `min_points` points (itself included) lie within `eps`. Noise is
/// dropped. Clusters are numbered in order of their lowest point index.
inline std::vector<Supercluster> dbscan_superclusters(const PointCloud& cloud, double eps,
                                                      int min_points) {
  if (!(eps > 0.0)) throw UsageError("dbscan eps must be positive");
  if (min_points < 1) throw UsageError("dbscan min_points must be at least 1");
  if (cloud.empty()) return {};

  constexpr int kUnvisited = -2;
  constexpr int kNoise = -1;
  const std::size_t n = cloud.size();
  std::vector<int> label(n, kUnvisited);
  const VoxelGrid grid(cloud.points, eps);
  std::vector<std::size_t> neighborhood;
  std::vector<std::size_t> frontier;
  int clusters = 0;

  for (std::size_t seed = 0; seed < n; ++seed) {
    if (label[seed] != kUnvisited) continue;
    grid.neighbors(cloud[seed], eps, neighborhood);
    if (neighborhood.size() < static_cast<std::size_t>(min_points)) {
      label[seed] = kNoise;
      continue;
    }
    const int cluster = clusters++;
    label[seed] = cluster;
    frontier.assign(neighborhood.begin(), neighborhood.end());
    while (!frontier.empty()) {
      const std::size_t p = frontier.back();
      frontier.pop_back();
      if (label[p] == kNoise) label[p] = cluster;  // border point
      if (label[p] != kUnvisited) continue;
      label[p] = cluster;
      grid.neighbors(cloud[p], eps, neighborhood);
      if (neighborhood.size() >= static_cast<std::size_t>(min_points)) {
        for (const std::size_t q : neighborhood) {
          if (label[q] == kUnvisited || label[q] == kNoise) frontier.push_back(q);
        }
      }
    }
  }

  std::vector<Supercluster> out(static_cast<std::size_t>(clusters));
  for (int c = 0; c < clusters; ++c) out[static_cast<std::size_t>(c)].id = c;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] < 0) continue;
    auto& s = out[static_cast<std::size_t>(label[i])];
    s.points.points.push_back(cloud[i]);
    s.point_indices.push_back(i);
  }
  return out;
}

struct KMeansOptions {
  int max_iterations = 300;
  double relative_tolerance = 1e-6;
};

/// Lloyd's k-means with k-means++ seeding. Produces min(k, size) non-empty
/// subclusters; deterministic for a given seed.
inline std::vector<Subcluster> kmeans_subclusters(const Supercluster& supercluster, int k,
                                                  std::uint64_t seed,
                                                  const KMeansOptions& options = {}) {
  if (k < 1) throw UsageError("k-means K must be at least 1");
  const auto& pts = supercluster.points.points;
  const std::size_t n = pts.size();
  if (n == 0) throw DataError("cannot split an empty supercluster");
  const std::size_t clusters = std::min<std::size_t>(static_cast<std::size_t>(k), n);

  Rng rng(seed);
  std::vector<Vec3> centers;
  centers.reserve(clusters);
  centers.push_back(pts[rng.below(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (pts[i] - centers[0]).squaredNorm();
  std::vector<bool> chosen(n, false);
  while (centers.size() < clusters) {
    double total = 0.0;
    for (const double d : d2) total += d;
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // rounding at the tail
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // All remaining points coincide with a center; empty-cluster repair
      // below splits them.
      for (std::size_t i = 0; i < n && pick == n; ++i) {
        if (!chosen[i]) pick = i;
      }
    }
    chosen[pick] = true;
    centers.push_back(pts[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (pts[i] - centers.back()).squaredNorm());
    }
  }

  std::vector<std::size_t> assign(n, 0);
  std::vector<std::size_t> counts(clusters, 0);
  auto assign_all = [&] {
    double inertia = 0.0;
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = (pts[i] - centers[0]).squaredNorm();
      for (std::size_t c = 1; c < clusters; ++c) {
        const double d = (pts[i] - centers[c]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assign[i] = best;
      ++counts[best];
      inertia += best_d;
    }
    return inertia;
  };
  // Moves the point farthest from the largest cluster's center into each
  // empty cluster.
  auto repair_empty = [&] {
    for (std::size_t c = 0; c < clusters; ++c) {
      if (counts[c] != 0) continue;
      const std::size_t largest = static_cast<std::size_t>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] != largest) continue;
        const double d = (pts[i] - centers[largest]).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      assign[far] = c;
      --counts[largest];
      counts[c] = 1;
      centers[c] = pts[far];
    }
  };
  auto update_centers = [&] {
    std::vector<Vec3> sums(clusters, Vec3::Zero());
    for (std::size_t i = 0; i < n; ++i) sums[assign[i]] += pts[i];
    for (std::size_t c = 0; c < clusters; ++c) {
      centers[c] = sums[c] / static_cast<double>(counts[c]);
    }
  };

  double previous = assign_all();
  repair_empty();
  update_centers();
  for (int iter = 1; iter < options.max_iterations; ++iter) {
    const std::vector<std::size_t> before = assign;
    const double inertia = assign_all();
    repair_empty();
    update_centers();
    const bool stable = assign == before;
    const double change = std::abs(previous - inertia);
    previous = inertia;
    if (stable || change <= options.relative_tolerance * std::max(inertia, 1e-300)) break;
  }

  std::vector<Subcluster> out(clusters);
  for (std::size_t c = 0; c < clusters; ++c) {
    out[c].id = {supercluster.id, static_cast<int>(c)};
    out[c].points.points.reserve(counts[c]);
    out[c].point_indices.reserve(counts[c]);
  }
  const bool has_indices = supercluster.point_indices.size() == n;
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = out[assign[i]];
    s.points.points.push_back(pts[i]);
    s.point_indices.push_back(has_indices ? supercluster.point_indices[i] : i);
  }
  for (auto& s : out) {
    Vec3 sum = Vec3::Zero();
    for (const auto& p : s.points.points) sum += p;
    s.centroid = sum / static_cast<double>(s.points.size());
  }
  return out;
}

}  // namespace cropseg
