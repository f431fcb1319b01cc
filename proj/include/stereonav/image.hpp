#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "stereonav/error.hpp"

namespace stereonav {

/// Row-major 8-bit image.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
    if (w < 0 || h < 0) throw Error(ErrorCode::InvalidArgument, "negative image size");
  }

  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::span<const std::uint8_t> row(int y) const {
    return {data.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)};
  }
  bool operator==(const GrayImage&) const = default;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
};

struct ColorImage {
  int width = 0;
  int height = 0;
  std::vector<Rgb> data;

  ColorImage() = default;
  ColorImage(int w, int h, Rgb fill = {}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  Rgb& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const Rgb& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const ColorImage&) const = default;
};

/// Fixed-point disparity map: each value is disparity * 16, with 0xFFFF
/// marking pixels that have no valid match. min_disp/max_disp record the
/// search range (horopter) the values were produced with.
struct DisparityMap {
  static constexpr std::uint16_t kInvalid = 0xFFFF;
  static constexpr int kScale = 16;

  int width = 0;
  int height = 0;
  int min_disp = 0;
  int max_disp = 64;
  std::vector<std::uint16_t> data;

  DisparityMap() = default;
  DisparityMap(int w, int h, int min_d, int max_d)
      : width(w), height(h), min_disp(min_d), max_disp(max_d), data(static_cast<std::size_t>(w) * h, kInvalid) {}

  std::uint16_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint16_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool valid(int x, int y) const { return at(x, y) != kInvalid; }
  double disparity(int x, int y) const { return static_cast<double>(at(x, y)) / kScale; }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : data) n += v != kInvalid;
    return n;
  }
  bool operator==(const DisparityMap&) const = default;
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h, bool fill = false)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

  bool get(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }
  bool operator==(const BinaryMask&) const = default;
};

inline GrayImage to_gray(const ColorImage& img) {
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const auto& p = img.data[i];
    out.data[i] = static_cast<std::uint8_t>((299 * p.r + 587 * p.g + 114 * p.b + 500) / 1000);
  }
  return out;
}

}  // namespace stereonav
