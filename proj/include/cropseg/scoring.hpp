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

#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cropseg/error.hpp"
#include "cropseg/parallel.hpp"
#include "cropseg/partition.hpp"
#include "cropseg/projection.hpp"
#include "cropseg/scene.hpp"

namespace cropseg {

using InstanceId = std::uint32_t;

/// Scores of one subcluster in one view. r == v * c, and label is empty
/// exactly when c == 0.
struct ViewScore {
  double v = 0.0;
  double c = 0.0;
  double r = 0.0;
  std::optional<InstanceId> label;

  friend bool operator==(const ViewScore&, const ViewScore&) = default;
};

/// Dense (subcluster, view) score table for one supercluster.
class ScoreTable {
 public:
  ScoreTable() = default;
  ScoreTable(std::size_t subclusters, std::size_t views)
      : rows_(subclusters), cols_(views), cells_(subclusters * views) {}

  std::size_t subclusters() const { return rows_; }
  std::size_t views() const { return cols_; }
  const ViewScore& at(std::size_t i, std::size_t j) const { return cells_[i * cols_ + j]; }
  ViewScore& at(std::size_t i, std::size_t j) { return cells_[i * cols_ + j]; }

  friend bool operator==(const ScoreTable&, const ScoreTable&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<ViewScore> cells_;
};

/// Fraction of the occlusion-free footprint that survives the depth test.
/// Zero when the occlusion-free footprint is empty.
inline double visibility_score(const Footprint& occlusion_free, const Footprint& visible) {
  if (occlusion_free.area() == 0) return 0.0;
  return static_cast<double>(visible.area()) / static_cast<double>(occlusion_free.area());
}

struct Consistency {
  double c = 0.0;
  std::optional<InstanceId> label;
};

/// Share of the visible footprint covered by the best-overlapping instance
/// region. Background never wins; ties go to the smallest id.
inline Consistency consistency_score(const Footprint& visible, const InstanceMask& mask) {
  if (visible.width() != mask.width() || visible.height() != mask.height()) {
    throw DataError("footprint and mask sizes differ");
  }
  if (visible.area() == 0) return {};
  std::unordered_map<InstanceId, std::size_t> overlap;
  for (const std::uint32_t px : visible.pixels()) {
    const InstanceId id = mask[px];
    if (id != 0) ++overlap[id];
  }
  if (overlap.empty()) return {};
  InstanceId best = 0;
  std::size_t best_count = 0;
  for (const auto& [id, count] : overlap) {
    if (count > best_count || (count == best_count && id < best)) {
      best = id;
      best_count = count;
    }
  }
  return {static_cast<double>(best_count) / static_cast<double>(visible.area()), best};
}

inline double reliability_score(double v, double c) { return v * c; }

/// Depth buffers of env_cloud ∪ crop_cloud, one per view. Every subcluster
/// is part of the crop cloud, so each buffer already holds the queried
/// subcluster's own splats.
inline std::vector<DepthBuffer> build_view_buffers(const Dataset& dataset, double radius,
                                                   int workers = 1) {
  std::vector<DepthBuffer> buffers(dataset.views.size());
  parallel_for(dataset.views.size(), workers, [&](std::size_t j) {
    const auto& cam = dataset.views[j].camera;
    DepthBuffer buffer = build_depth_buffer(cam, dataset.env_cloud, radius);
    splat_into(buffer, cam, dataset.crop_cloud, radius);
    buffers[j] = std::move(buffer);
  });
  return buffers;
}

inline ViewScore score_view(const CameraView& view, const InstanceMask& mask,
                            const PointCloud& subcluster, const DepthBuffer& buffer,
                            double radius, double depth_tolerance) {
  const Footprint occlusion_free = splat_footprint(view, subcluster, radius);
  const Footprint visible = visible_footprint(view, subcluster, buffer, radius, depth_tolerance);
  ViewScore s;
  s.v = visibility_score(occlusion_free, visible);
  const Consistency cons = consistency_score(visible, mask);
  s.c = cons.c;
  s.label = cons.label;
  s.r = reliability_score(s.v, s.c);
  return s;
}

/// Scores every (subcluster, view) pair against precomputed view buffers.
inline ScoreTable build_score_table(const std::vector<Subcluster>& subclusters,
                                    const Dataset& dataset,
                                    const std::vector<DepthBuffer>& buffers, double radius,
                                    double depth_tolerance, int workers = 1) {
  if (buffers.size() != dataset.views.size()) {
    throw DataError("one depth buffer per view is required");
  }
  const std::size_t m = subclusters.size();
  const std::size_t n = dataset.views.size();
  ScoreTable table(m, n);
  parallel_for(m * n, workers, [&](std::size_t cell) {
    const std::size_t i = cell / n;
    const std::size_t j = cell % n;
    const auto& view = dataset.views[j];
    table.at(i, j) = score_view(view.camera, view.mask, subclusters[i].points, buffers[j],
                                radius, depth_tolerance);
  });
  return table;
}

/// Convenience overload that validates the dataset and builds buffers from
/// env_cloud ∪ crop_cloud ∪ the subclusters themselves.
inline ScoreTable build_score_table(const std::vector<Subcluster>& subclusters,
                                    const Dataset& dataset, double radius,
                                    double depth_tolerance, int workers = 1) {
  for (const auto& finding : validate_dataset(dataset)) {
    if (finding.kind != ValidationFinding::Kind::kEmptyCloud) throw DataError(finding.message);
  }
  std::vector<DepthBuffer> buffers = build_view_buffers(dataset, radius, workers);
  for (std::size_t j = 0; j < buffers.size(); ++j) {
    for (const auto& s : subclusters) {
      splat_into(buffers[j], dataset.views[j].camera, s.points, radius);
    }
  }
  return build_score_table(subclusters, dataset, buffers, radius, depth_tolerance, workers);
}

/// Tab-separated dump, one row per (i, j).
inline void write_score_table(std::ostream& out, const ScoreTable& table) {
  out << "i\tj\tv\tc\tr\tlabel\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < table.subclusters(); ++i) {
    for (std::size_t j = 0; j < table.views(); ++j) {
      const auto& s = table.at(i, j);
      out << i << '\t' << j << '\t' << s.v << '\t' << s.c << '\t' << s.r << '\t';
      if (s.label) {
        out << *s.label;
      } else {
        out << '-';
      }
      out << '\n';
    }
  }
}

}  // namespace cropseg
