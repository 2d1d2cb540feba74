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

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cropseg/error.hpp"
#include "cropseg/scene.hpp"

namespace cropseg::io {

class PlyHeaderError : public DataError {
 public:
  using DataError::DataError;
};
class PlyMissingPropertyError : public DataError {
 public:
  using DataError::DataError;
};
class PlyTruncatedError : public DataError {
 public:
  using DataError::DataError;
};

enum class PlyFormat { kAscii, kBinaryLittleEndian };

struct PlyPoints {
  PointCloud cloud;
  std::optional<std::vector<std::uint32_t>> instance;
};

/// Fixed 32-colour palette for labeled clouds, cycled by instance id.
inline constexpr std::array<std::array<std::uint8_t, 3>, 32> kPalette = {{
    {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},   {245, 130, 48},
    {145, 30, 180},  {70, 240, 240},  {240, 50, 230},  {210, 245, 60},  {250, 190, 212},
    {0, 128, 128},   {220, 190, 255}, {170, 110, 40},  {255, 250, 200}, {128, 0, 0},
    {170, 255, 195}, {128, 128, 0},   {255, 215, 180}, {0, 0, 128},     {128, 128, 128},
    {255, 255, 255}, {0, 0, 0},       {31, 119, 180},  {255, 127, 14},  {44, 160, 44},
    {214, 39, 40},   {148, 103, 189}, {140, 86, 75},   {227, 119, 194}, {127, 127, 127},
    {188, 189, 34},  {23, 190, 207},
}};

namespace detail {

struct PlyProperty {
  std::string name;
  std::string type;
  int size = 0;
};

inline int ply_type_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "float" || type == "int32" || type == "uint32" ||
      type == "float32") {
    return 4;
  }
  if (type == "double" || type == "float64") return 8;
  return 0;
}

template <class T>
T load_le(const char* p) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

inline double decode_binary(const std::string& type, const char* p) {
  if (type == "char" || type == "int8") return load_le<std::int8_t>(p);
  if (type == "uchar" || type == "uint8") return load_le<std::uint8_t>(p);
  if (type == "short" || type == "int16") return load_le<std::int16_t>(p);
  if (type == "ushort" || type == "uint16") return load_le<std::uint16_t>(p);
  if (type == "int" || type == "int32") return load_le<std::int32_t>(p);
  if (type == "uint" || type == "uint32") return load_le<std::uint32_t>(p);
  if (type == "float" || type == "float32") return load_le<float>(p);
  return load_le<double>(p);
}

}  // namespace detail

/// Reads the vertex element of an ASCII or binary little-endian PLY. Needs
/// x, y, z; picks up an `instance` property when present.
inline PlyPoints read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply") {
    throw PlyHeaderError("not a PLY file: missing 'ply' magic");
  }
  std::optional<PlyFormat> format;
  std::size_t vertex_count = 0;
  bool have_vertex = false;
  bool vertex_first = true;
  bool in_vertex = false;
  std::vector<detail::PlyProperty> props;
  bool ended = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word.empty() || word == "comment" || word == "obj_info") continue;
    if (word == "format") {
      std::string name;
      std::string version;
      ls >> name >> version;
      if (name == "ascii") {
        format = PlyFormat::kAscii;
      } else if (name == "binary_little_endian") {
        format = PlyFormat::kBinaryLittleEndian;
      } else {
        throw PlyHeaderError("unsupported PLY format '" + name + "'");
      }
    } else if (word == "element") {
      std::string name;
      long long count = -1;
      ls >> name >> count;
      if (!ls || count < 0) throw PlyHeaderError("malformed element line: " + line);
      in_vertex = name == "vertex";
      if (in_vertex) {
        have_vertex = true;
        vertex_count = static_cast<std::size_t>(count);
      } else if (!have_vertex && count > 0) {
        vertex_first = false;
      }
    } else if (word == "property") {
      std::string type;
      ls >> type;
      if (type == "list") {
        if (in_vertex) throw PlyHeaderError("list properties on vertices are not supported");
        continue;
      }
      std::string name;
      ls >> name;
      if (!ls) throw PlyHeaderError("malformed property line: " + line);
      if (!in_vertex) continue;
      const int size = detail::ply_type_size(type);
      if (size == 0) throw PlyHeaderError("unknown property type '" + type + "'");
      props.push_back({name, type, size});
    } else if (word == "end_header") {
      ended = true;
      break;
    } else {
      throw PlyHeaderError("unexpected header line: " + line);
    }
  }
  if (!ended) throw PlyHeaderError("PLY header has no end_header");
  if (!format) throw PlyHeaderError("PLY header has no format line");
  if (!have_vertex) throw PlyHeaderError("PLY has no vertex element");
  if (!vertex_first) throw PlyHeaderError("vertex element must precede non-empty elements");

  int ix = -1;
  int iy = -1;
  int iz = -1;
  int iinst = -1;
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i].name == "x") ix = static_cast<int>(i);
    if (props[i].name == "y") iy = static_cast<int>(i);
    if (props[i].name == "z") iz = static_cast<int>(i);
    if (props[i].name == "instance") iinst = static_cast<int>(i);
  }
  for (const auto& [index, name] : {std::pair{ix, "x"}, std::pair{iy, "y"}, std::pair{iz, "z"}}) {
    if (index < 0) throw PlyMissingPropertyError(std::string("PLY vertex lacks property '") + name + "'");
  }

  PlyPoints out;
  out.cloud.points.reserve(vertex_count);
  if (iinst >= 0) out.instance.emplace().reserve(vertex_count);
  std::vector<double> values(props.size());
  if (*format == PlyFormat::kAscii) {
    // Values of 32-bit float properties are narrowed so that ASCII files
    // load exactly like their binary counterparts.
    std::vector<bool> narrow(props.size());
    for (std::size_t i = 0; i < props.size(); ++i) {
      narrow[i] = props[i].type == "float" || props[i].type == "float32";
    }
    for (std::size_t v = 0; v < vertex_count; ++v) {
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(in >> values[i])) {
          throw PlyTruncatedError("PLY ended after " + std::to_string(v) + " of " +
                                  std::to_string(vertex_count) + " vertices");
        }
        if (narrow[i]) values[i] = static_cast<float>(values[i]);
      }
      out.cloud.points.emplace_back(values[ix], values[iy], values[iz]);
      if (iinst >= 0) out.instance->push_back(static_cast<std::uint32_t>(values[iinst]));
    }
  } else {
    std::size_t stride = 0;
    std::vector<std::size_t> offset(props.size());
    for (std::size_t i = 0; i < props.size(); ++i) {
      offset[i] = stride;
      stride += static_cast<std::size_t>(props[i].size);
    }
    std::vector<char> record(stride);
    for (std::size_t v = 0; v < vertex_count; ++v) {
      if (!in.read(record.data(), static_cast<std::streamsize>(stride))) {
        throw PlyTruncatedError("PLY ended after " + std::to_string(v) + " of " +
                                std::to_string(vertex_count) + " vertices");
      }
      for (std::size_t i = 0; i < props.size(); ++i) {
        values[i] = detail::decode_binary(props[i].type, record.data() + offset[i]);
      }
      out.cloud.points.emplace_back(values[ix], values[iy], values[iz]);
      if (iinst >= 0) out.instance->push_back(static_cast<std::uint32_t>(values[iinst]));
    }
  }
  for (const auto& p : out.cloud.points) {
    if (!p.allFinite()) throw DataError("PLY contains a non-finite coordinate");
  }
  return out;
}

inline PlyPoints read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_ply(in);
}

inline PointCloud read_point_cloud(const std::filesystem::path& path) {
  return read_ply(path).cloud;
}

/// Writes x, y, z as float32; with instance ids also writes a uint32
/// `instance` property and palette RGB.
inline void write_ply(std::ostream& out, const PointCloud& cloud,
                      const std::vector<std::uint32_t>* instance = nullptr,
                      PlyFormat format = PlyFormat::kBinaryLittleEndian) {
  if (instance && instance->size() != cloud.size()) {
    throw DataError("instance id count does not match point count");
  }
  out << "ply\n"
      << (format == PlyFormat::kAscii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "element vertex " << cloud.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (instance) {
    out << "property uint instance\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  out << "end_header\n";
  if (format == PlyFormat::kAscii) {
    out.precision(9);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud[i];
      out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' '
          << static_cast<float>(p.z());
      if (instance) {
        const auto id = (*instance)[i];
        const auto& c = kPalette[id % kPalette.size()];
        out << ' ' << id << ' ' << int{c[0]} << ' ' << int{c[1]} << ' ' << int{c[2]};
      }
      out << '\n';
    }
    return;
  }
  std::vector<char> buffer;
  const std::size_t stride = instance ? 19 : 12;
  buffer.resize(stride * cloud.size());
  char* w = buffer.data();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const float xyz[3] = {static_cast<float>(cloud[i].x()), static_cast<float>(cloud[i].y()),
                          static_cast<float>(cloud[i].z())};
    std::memcpy(w, xyz, 12);
    w += 12;
    if (instance) {
      const std::uint32_t id = (*instance)[i];
      std::memcpy(w, &id, 4);
      const auto& c = kPalette[id % kPalette.size()];
      std::memcpy(w + 4, c.data(), 3);
      w += 7;
    }
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
}

inline void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                              const std::vector<std::uint32_t>* instance = nullptr,
                              PlyFormat format = PlyFormat::kBinaryLittleEndian) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_ply(out, cloud, instance, format);
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace cropseg::io
