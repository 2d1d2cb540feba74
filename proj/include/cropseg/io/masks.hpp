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

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cropseg/error.hpp"
#include "cropseg/scene.hpp"

namespace cropseg::io {

class MaskSequenceError : public DataError {
 public:
  using DataError::DataError;
};
class MaskBitDepthError : public DataError {
 public:
  using DataError::DataError;
};
class MaskSizeError : public DataError {
 public:
  using DataError::DataError;
};

inline constexpr std::uint32_t kMaxMaskId = 65535;

inline std::string mask_filename(std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof(name), "mask_%05zu.png", index);
  return name;
}

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_handler(png_structp, png_const_charp message) {
  throw DataError(std::string("png: ") + message);
}
inline void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace detail

/// Reads a 16-bit single-channel PNG as an instance mask.
inline InstanceMask read_mask_png(const std::filesystem::path& path) {
  detail::File file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           detail::png_error_handler, detail::png_warning_handler);
  if (!png) throw DataError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};
  if (!info) throw DataError("png: out of memory");

  png_init_io(png, file.get());
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) {
    throw MaskBitDepthError(path.string() + ": mask must be single-channel grayscale");
  }
  if (depth != 16) {
    throw MaskBitDepthError(path.string() + ": mask must be 16-bit, got " + std::to_string(depth) +
                            "-bit");
  }
  png_set_swap(png);  // PNG stores 16-bit samples big-endian
  std::vector<std::uint16_t> row(width);
  std::vector<std::uint32_t> labels(static_cast<std::size_t>(width) * height);
  for (png_uint_32 y = 0; y < height; ++y) {
    png_read_row(png, reinterpret_cast<png_bytep>(row.data()), nullptr);
    for (png_uint_32 x = 0; x < width; ++x) labels[static_cast<std::size_t>(y) * width + x] = row[x];
  }
  png_read_end(png, nullptr);
  return InstanceMask(static_cast<int>(width), static_cast<int>(height), std::move(labels));
}

inline void write_mask_png(const std::filesystem::path& path, const InstanceMask& mask) {
  for (const auto id : mask.labels()) {
    if (id > kMaxMaskId) throw DataError("mask id " + std::to_string(id) + " exceeds 65535");
  }
  detail::File file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            detail::png_error_handler, detail::png_warning_handler);
  if (!png) throw DataError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};
  if (!info) throw DataError("png: out of memory");

  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(mask.width()),
               static_cast<png_uint_32>(mask.height()), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);
  std::vector<std::uint16_t> row(static_cast<std::size_t>(mask.width()));
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) row[static_cast<std::size_t>(x)] = static_cast<std::uint16_t>(mask.at(x, y));
    png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
  }
  png_write_end(png, nullptr);
}

/// Reads mask_00000.png, mask_00001.png, ... until the sequence ends. Any
/// mask_*.png beyond a gap is reported as a missing index.
inline std::vector<InstanceMask> read_masks(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("mask directory " + dir.string() + " does not exist");
  std::size_t highest = 0;
  std::size_t found = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() == 14 && name.rfind("mask_", 0) == 0 && name.substr(10) == ".png") {
      const std::string digits = name.substr(5, 5);
      if (digits.find_first_not_of("0123456789") != std::string::npos) continue;
      highest = std::max<std::size_t>(highest, std::stoul(digits));
      ++found;
    }
  }
  std::vector<InstanceMask> masks;
  if (found == 0) return masks;
  for (std::size_t i = 0; i <= highest; ++i) {
    const fs::path path = dir / mask_filename(i);
    if (!fs::exists(path)) throw MaskSequenceError("mask sequence is missing " + path.filename().string());
    masks.push_back(read_mask_png(path));
  }
  return masks;
}

inline void write_masks(const std::filesystem::path& dir, const std::vector<InstanceMask>& masks) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < masks.size(); ++i) write_mask_png(dir / mask_filename(i), masks[i]);
}

/// Pairs cameras with masks, checking count and per-view size.
inline std::vector<View> pair_views(const std::vector<CameraView>& cameras,
                                    std::vector<InstanceMask> masks) {
  if (masks.size() != cameras.size()) {
    throw MaskSequenceError("found " + std::to_string(masks.size()) + " masks for " +
                            std::to_string(cameras.size()) + " cameras");
  }
  std::vector<View> views;
  for (std::size_t j = 0; j < cameras.size(); ++j) {
    if (masks[j].width() != cameras[j].width || masks[j].height() != cameras[j].height) {
      throw MaskSizeError(mask_filename(j) + " is " + std::to_string(masks[j].width()) + "x" +
                          std::to_string(masks[j].height()) + " but its camera is " +
                          std::to_string(cameras[j].width) + "x" + std::to_string(cameras[j].height));
    }
    views.push_back({cameras[j], std::move(masks[j])});
  }
  return views;
}

}  // namespace cropseg::io
