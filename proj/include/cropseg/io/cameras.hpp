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
#include "cropseg/scene.hpp"

namespace cropseg::io {

namespace detail {

inline double number_field(const nlohmann::json& obj, const char* key, std::size_t view) {
  if (!obj.contains(key)) {
    throw DataError("view " + std::to_string(view) + " is missing field '" + key + "'");
  }
  if (!obj.at(key).is_number()) {
    throw DataError("view " + std::to_string(view) + " field '" + key + "' is not a number");
  }
  return obj.at(key).get<double>();
}

inline int int_field(const nlohmann::json& obj, const char* key, std::size_t view) {
  const double v = number_field(obj, key, view);
  if (v != static_cast<double>(static_cast<int>(v))) {
    throw DataError("view " + std::to_string(view) + " field '" + key + "' is not an integer");
  }
  return static_cast<int>(v);
}

}  // namespace detail

/// Parses {"views": [{fx, fy, cx, cy, width, height, world_to_camera}]}
/// where world_to_camera is a row-major 3x4 [R | t]. A view may give
/// camera_to_world instead; it is inverted here.
inline std::vector<CameraView> parse_cameras(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("views") || !doc.at("views").is_array()) {
    throw DataError("camera file needs a top-level \"views\" array");
  }
  std::vector<CameraView> views;
  const auto& arr = doc.at("views");
  for (std::size_t j = 0; j < arr.size(); ++j) {
    const auto& v = arr[j];
    if (!v.is_object()) throw DataError("view " + std::to_string(j) + " is not an object");
    CameraView cam;
    cam.fx = detail::number_field(v, "fx", j);
    cam.fy = detail::number_field(v, "fy", j);
    cam.cx = detail::number_field(v, "cx", j);
    cam.cy = detail::number_field(v, "cy", j);
    cam.width = detail::int_field(v, "width", j);
    cam.height = detail::int_field(v, "height", j);
    if (!(cam.fx > 0.0) || !(cam.fy > 0.0) || cam.width < 1 || cam.height < 1) {
      throw DataError("view " + std::to_string(j) + " has invalid intrinsics");
    }
    const bool inverse = !v.contains("world_to_camera") && v.contains("camera_to_world");
    const char* key = inverse ? "camera_to_world" : "world_to_camera";
    if (!v.contains(key)) {
      throw DataError("view " + std::to_string(j) + " is missing field 'world_to_camera'");
    }
    const auto& pose = v.at(key);
    if (!pose.is_array() || pose.size() != 12) {
      throw DataError("view " + std::to_string(j) + " field '" + key +
                      "' must hold 12 numbers, got " +
                      std::to_string(pose.is_array() ? pose.size() : 0));
    }
    Mat3 r;
    Vec3 t;
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 4; ++col) {
        const auto& e = pose[static_cast<std::size_t>(row * 4 + col)];
        if (!e.is_number()) {
          throw DataError("view " + std::to_string(j) + " pose entry is not a number");
        }
        if (col < 3) {
          r(row, col) = e.get<double>();
        } else {
          t(row) = e.get<double>();
        }
      }
    }
    if (!is_rotation(r)) {
      throw DataError("view " + std::to_string(j) + " rotation is not orthonormal");
    }
    if (inverse) {
      cam.rotation = r.transpose();
      cam.translation = -cam.rotation * t;
    } else {
      cam.rotation = r;
      cam.translation = t;
    }
    views.push_back(cam);
  }
  return views;
}

inline std::vector<CameraView> read_cameras(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return parse_cameras(doc);
}

inline nlohmann::json cameras_to_json(const std::vector<CameraView>& views) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : views) {
    nlohmann::json pose = nlohmann::json::array();
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) pose.push_back(v.rotation(row, col));
      pose.push_back(v.translation(row));
    }
    arr.push_back({{"fx", v.fx},
                   {"fy", v.fy},
                   {"cx", v.cx},
                   {"cy", v.cy},
                   {"width", v.width},
                   {"height", v.height},
                   {"world_to_camera", pose}});
  }
  return {{"views", arr}};
}

inline void write_cameras(const std::filesystem::path& path, const std::vector<CameraView>& views) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << cameras_to_json(views).dump(2) << '\n';
}

}  // namespace cropseg::io
