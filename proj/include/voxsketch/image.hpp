#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "voxsketch/common.hpp"

namespace voxsketch {

/// Single-channel float image, row-major, y down. Line drawings store ink
/// as 1 on a 0 background.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  bool in_range(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  bool operator==(const Image&) const = default;
};

using LineDrawing = Image;

struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  bool in_range(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t count() const;
  bool operator==(const Mask&) const = default;
};

/// 8-bit RGBA pixels as decoded from a PNG of any color type.
struct RgbaImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba;
};

std::string encode_png_gray(int width, int height, const std::vector<std::uint8_t>& gray);
std::string encode_png_mask(const Mask& mask);
std::string encode_png_rgba(const RgbaImage& image);
RgbaImage decode_png(std::string_view bytes);

/// Drawings serialize black-on-white.
std::string encode_drawing_png(const LineDrawing& drawing);

/// Inverts polarity back to ink = 1. Strongly red pixels are the reserved
/// construction-line color and read as blank; transparent pixels as well.
LineDrawing decode_drawing_png(std::string_view bytes);

Mask decode_mask_png(std::string_view bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace voxsketch
