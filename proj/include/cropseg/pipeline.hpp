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

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cropseg/error.hpp"
#include "cropseg/merging.hpp"
#include "cropseg/parallel.hpp"
#include "cropseg/partition.hpp"
#include "cropseg/projection.hpp"
#include "cropseg/scene.hpp"
#include "cropseg/scoring.hpp"

namespace cropseg {

struct PipelineConfig {
  double eps = kDefaultEps;
  int min_points = kDefaultMinPoints;
  int k = kDefaultK;
  std::optional<double> splat_radius;  // estimated from the clouds when empty
  double depth_tolerance_factor = 2.0;  // depth tolerance = factor * radius
  MergeVariant variant = MergeVariant::kFullLpa;
  std::uint64_t seed = 42;
  int workers = 1;
  bool superclusters = true;  // false: the whole crop cloud is one supercluster

  void validate() const {
    if (!(eps > 0.0)) throw UsageError("eps must be positive");
    if (min_points < 1) throw UsageError("min_points must be at least 1");
    if (k < 1) throw UsageError("k must be at least 1");
    if (splat_radius && !(*splat_radius > 0.0)) throw UsageError("splat_radius must be positive");
    if (!(depth_tolerance_factor > 0.0)) throw UsageError("depth_tolerance_factor must be positive");
    if (workers < 1) throw UsageError("workers must be at least 1");
  }
};

// Worker count is left out: it must not change any output.
inline nlohmann::json to_json(const PipelineConfig& c) {
  return {{"eps", c.eps},
          {"min_points", c.min_points},
          {"k", c.k},
          {"splat_radius", c.splat_radius ? nlohmann::json(*c.splat_radius) : nlohmann::json()},
          {"depth_tolerance_factor", c.depth_tolerance_factor},
          {"variant", std::string(to_string(c.variant))},
          {"seed", c.seed},
          {"superclusters", c.superclusters}};
}

/// Overlays the keys present in `j` onto `base`. Unknown keys are errors.
inline PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {}) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "eps") {
        base.eps = value.get<double>();
      } else if (key == "min_points") {
        base.min_points = value.get<int>();
      } else if (key == "k") {
        base.k = value.get<int>();
      } else if (key == "splat_radius") {
        base.splat_radius = value.is_null() ? std::nullopt : std::optional(value.get<double>());
      } else if (key == "depth_tolerance_factor") {
        base.depth_tolerance_factor = value.get<double>();
      } else if (key == "variant") {
        base.variant = parse_merge_variant(value.get<std::string>());
      } else if (key == "seed") {
        base.seed = value.get<std::uint64_t>();
      } else if (key == "workers") {
        base.workers = value.get<int>();
      } else if (key == "superclusters") {
        base.superclusters = value.get<bool>();
      } else {
        throw UsageError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
  base.validate();
  return base;
}

struct StageTimings {
  double partition_ms = 0.0;
  double buffers_ms = 0.0;
  double scoring_ms = 0.0;
  double merging_ms = 0.0;
  double total_ms = 0.0;
};

struct PipelineResult {
  CountReport report;
  std::vector<SuperclusterResult> superclusters;
  std::vector<ScoreTable> tables;
  double point_radius = 0.0;
  StageTimings timings;
};

namespace detail {

template <class Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const UsageError& e) {
    throw UsageError(std::string(name) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(name) + ": " + e.what());
  }
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace detail

/// Partition, score, merge and count. Deterministic for a given config,
/// independent of the worker count.
inline PipelineResult run_pipeline(const PipelineConfig& config, const Dataset& dataset) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  config.validate();
  detail::stage("validate", [&] {
    for (const auto& finding : validate_dataset(dataset)) {
      // An empty crop cloud is a legitimate zero count.
      if (finding.kind == ValidationFinding::Kind::kEmptyCloud) {
        if (finding.message.rfind("crop", 0) == 0) continue;
        if (dataset.crop_cloud.empty()) continue;
      }
      throw DataError(finding.message);
    }
    return 0;
  });

  PipelineResult result;
  if (dataset.crop_cloud.empty()) {
    result.timings.total_ms = detail::elapsed_ms(start);
    return result;
  }

  auto t = Clock::now();
  result.point_radius = detail::stage("radius", [&] {
    if (config.splat_radius) return *config.splat_radius;
    return estimate_point_radius(dataset.env_cloud.size() >= 2 ? dataset.env_cloud
                                                               : dataset.crop_cloud);
  });
  const double radius = result.point_radius;
  const double tolerance = config.depth_tolerance_factor * radius;

  const auto superclusters = detail::stage("partition", [&] {
    if (!config.superclusters) return std::vector{whole_cloud_supercluster(dataset.crop_cloud)};
    return dbscan_superclusters(dataset.crop_cloud, config.eps, config.min_points);
  });
  result.superclusters.resize(superclusters.size());
  detail::stage("partition", [&] {
    parallel_for(superclusters.size(), config.workers, [&](std::size_t s) {
      result.superclusters[s].subclusters =
          kmeans_subclusters(superclusters[s], config.k, config.seed + 1000003ULL * s);
    });
    return 0;
  });
  result.timings.partition_ms = detail::elapsed_ms(t);

  t = Clock::now();
  const auto buffers =
      detail::stage("buffers", [&] { return build_view_buffers(dataset, radius, config.workers); });
  result.timings.buffers_ms = detail::elapsed_ms(t);

  t = Clock::now();
  result.tables.resize(superclusters.size());
  detail::stage("scoring", [&] {
    for (std::size_t s = 0; s < superclusters.size(); ++s) {
      result.tables[s] = build_score_table(result.superclusters[s].subclusters, dataset, buffers,
                                           radius, tolerance, config.workers);
    }
    return 0;
  });
  result.timings.scoring_ms = detail::elapsed_ms(t);

  t = Clock::now();
  detail::stage("merging", [&] {
    parallel_for(superclusters.size(), config.workers, [&](std::size_t s) {
      result.superclusters[s].labeling =
          merge_strategy_ablation(result.tables[s], config.variant, config.seed + s);
    });
    return 0;
  });
  result.report = count_instances(result.superclusters, dataset.crop_cloud.size());
  result.timings.merging_ms = detail::elapsed_ms(t);
  result.timings.total_ms = detail::elapsed_ms(start);
  return result;
}

/// Report document. Key set is fixed; only "timing_ms" varies between
/// identical runs.
inline nlohmann::json report_to_json(const PipelineResult& result, const PipelineConfig& config) {
  return {{"total_count", result.report.total},
          {"supercluster_counts", result.report.supercluster_counts},
          {"point_radius", result.point_radius},
          {"config", to_json(config)},
          {"timing_ms",
           {{"partition", result.timings.partition_ms},
            {"buffers", result.timings.buffers_ms},
            {"scoring", result.timings.scoring_ms},
            {"merging", result.timings.merging_ms},
            {"total", result.timings.total_ms}}}};
}

/// Per-point labels for the PLY writer: instance + 1, 0 for noise.
inline std::vector<std::uint32_t> point_labels(const CountReport& report) {
  std::vector<std::uint32_t> ids;
  ids.reserve(report.point_instance.size());
  for (const auto id : report.point_instance) {
    ids.push_back(id < 0 ? 0u : static_cast<std::uint32_t>(id + 1));
  }
  return ids;
}

}  // namespace cropseg
