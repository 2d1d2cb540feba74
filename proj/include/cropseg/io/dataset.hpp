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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cropseg/error.hpp"
#include "cropseg/io/cameras.hpp"
#include "cropseg/io/masks.hpp"
#include "cropseg/io/ply.hpp"
#include "cropseg/scene.hpp"
#include "cropseg/synth.hpp"

// On-disk dataset layout shared by real and synthetic data:
//
//   cameras.json        camera intrinsics and world-to-camera poses
//   crop.ply            target crop cloud
//   env.ply             environment (occluder) cloud
//   masks/mask_%05d.png 16-bit instance masks, one per camera
//   truth.json          ground truth (synthetic scenes only)
namespace cropseg::io {

inline constexpr const char* kCamerasFile = "cameras.json";
inline constexpr const char* kCropFile = "crop.ply";
inline constexpr const char* kEnvFile = "env.ply";
inline constexpr const char* kMasksDir = "masks";
inline constexpr const char* kTruthFile = "truth.json";

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

inline Dataset load_dataset(const std::filesystem::path& crop, const std::filesystem::path& env,
                            const std::filesystem::path& cameras,
                            const std::filesystem::path& masks) {
  Dataset ds;
  ds.crop_cloud = read_point_cloud(crop);
  ds.env_cloud = read_point_cloud(env);
  ds.views = pair_views(read_cameras(cameras), read_masks(masks));
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  return load_dataset(dir / kCropFile, dir / kEnvFile, dir / kCamerasFile, dir / kMasksDir);
}

inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  std::vector<CameraView> cams;
  std::vector<InstanceMask> masks;
  for (const auto& v : ds.views) {
    cams.push_back(v.camera);
    masks.push_back(v.mask);
  }
  write_cameras(dir / kCamerasFile, cams);
  write_point_cloud(dir / kCropFile, ds.crop_cloud);
  write_point_cloud(dir / kEnvFile, ds.env_cloud);
  write_masks(dir / kMasksDir, masks);
}

namespace detail {

template <class T>
void take(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

template <class Fn>
void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, Fn&& what) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw UsageError(what() + " has unknown key '" + key + "'");
  }
}

}  // namespace detail

inline synth::SceneSpec scene_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("scene spec must be a JSON object");
  detail::reject_unknown(j,
                         {"instance_count", "radius_min", "radius_max", "cluster_count", "gap",
                          "cluster_spacing", "shape", "max_axis_ratio", "foliage_blobs",
                          "foliage_radius", "foliage_points", "view_count", "ring_radius",
                          "ring_height", "image_width", "image_height", "focal",
                          "points_per_instance", "seed"},
                         [] { return std::string("scene spec"); });
  synth::SceneSpec s;
  try {
    detail::take(j, "instance_count", s.instance_count);
    detail::take(j, "radius_min", s.radius_min);
    detail::take(j, "radius_max", s.radius_max);
    detail::take(j, "cluster_count", s.cluster_count);
    detail::take(j, "gap", s.gap);
    detail::take(j, "cluster_spacing", s.cluster_spacing);
    if (j.contains("shape")) {
      const auto shape = j.at("shape").get<std::string>();
      if (shape == "sphere") {
        s.shape = synth::Shape::kSphere;
      } else if (shape == "ellipsoid") {
        s.shape = synth::Shape::kEllipsoid;
      } else {
        throw UsageError("unknown shape '" + shape + "'");
      }
    }
    detail::take(j, "max_axis_ratio", s.max_axis_ratio);
    detail::take(j, "foliage_blobs", s.foliage_blobs);
    detail::take(j, "foliage_radius", s.foliage_radius);
    detail::take(j, "foliage_points", s.foliage_points);
    detail::take(j, "view_count", s.view_count);
    detail::take(j, "ring_radius", s.ring_radius);
    detail::take(j, "ring_height", s.ring_height);
    detail::take(j, "image_width", s.image_width);
    detail::take(j, "image_height", s.image_height);
    detail::take(j, "focal", s.focal);
    detail::take(j, "points_per_instance", s.points_per_instance);
    detail::take(j, "seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad scene spec value: ") + e.what());
  }
  synth::validate(s);
  return s;
}

inline synth::CorruptionSpec corruption_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("corruption spec must be a JSON object");
  detail::reject_unknown(j,
                         {"merge_probability", "merge_targeting", "drop_probability",
                          "boundary_radius", "jitter_probability", "jitter_pixels", "seed"},
                         [] { return std::string("corruption spec"); });
  synth::CorruptionSpec s;
  try {
    detail::take(j, "merge_probability", s.merge_probability);
    if (j.contains("merge_targeting")) {
      const auto t = j.at("merge_targeting").get<std::string>();
      if (t == "uniform") {
        s.merge_targeting = synth::MergeTargeting::kUniform;
      } else if (t == "occluded") {
        s.merge_targeting = synth::MergeTargeting::kOccluded;
      } else {
        throw UsageError("unknown merge_targeting '" + t + "'");
      }
    }
    detail::take(j, "drop_probability", s.drop_probability);
    detail::take(j, "boundary_radius", s.boundary_radius);
    detail::take(j, "jitter_probability", s.jitter_probability);
    detail::take(j, "jitter_pixels", s.jitter_pixels);
    detail::take(j, "seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad corruption spec value: ") + e.what());
  }
  synth::validate(s);
  return s;
}

/// Ground truth without the masks (those live in masks/).
inline nlohmann::json truth_to_json(const synth::GroundTruth& t) {
  nlohmann::json centers = nlohmann::json::array();
  for (const auto& c : t.centers) centers.push_back({c.x(), c.y(), c.z()});
  return {{"count", t.count},
          {"point_instance", t.point_instance},
          {"view_ids", t.view_ids},
          {"visible_fraction", t.visible_fraction},
          {"centers", centers},
          {"radii", t.radii}};
}

inline synth::GroundTruth truth_from_json(const nlohmann::json& j) {
  synth::GroundTruth t;
  try {
    t.count = j.at("count").get<int>();
    detail::take(j, "point_instance", t.point_instance);
    detail::take(j, "view_ids", t.view_ids);
    detail::take(j, "visible_fraction", t.visible_fraction);
    detail::take(j, "radii", t.radii);
    if (j.contains("centers")) {
      for (const auto& c : j.at("centers")) {
        t.centers.emplace_back(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad truth file: ") + e.what());
  }
  return t;
}

inline nlohmann::json corruption_log_to_json(const std::vector<synth::CorruptionEvent>& log) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : log) arr.push_back({{"view", e.view}, {"op", e.op}, {"ids", e.ids}});
  return arr;
}

}  // namespace cropseg::io
