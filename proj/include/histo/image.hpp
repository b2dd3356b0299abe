#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "histo/errors.hpp"

namespace histo {

/// 8-bit RGB raster, row-major, channel-interleaved.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h)
      : width(w), height(h),
        data(static_cast<std::size_t>(w) * h * 3, 0) {}

  static RgbImage filled(int w, int h, std::uint8_t r, std::uint8_t g,
                         std::uint8_t b) {
    RgbImage img(w, h);
    for (std::size_t i = 0; i < img.data.size(); i += 3) {
      img.data[i] = r;
      img.data[i + 1] = g;
      img.data[i + 2] = b;
    }
    return img;
  }

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }

  std::uint8_t* pixel(int x, int y) {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* pixel(int x, int y) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  bool valid() const {
    return width > 0 && height > 0 && data.size() == pixel_count() * 3;
  }

  bool operator==(const RgbImage& o) const {
    return width == o.width && height == o.height && data == o.data;
  }
};

/// Quarter-turn counterclockwise. (x, y) -> (y, width-1-x).
inline RgbImage rotate90(const RgbImage& img) {
  RgbImage out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::uint8_t* s = img.pixel(x, y);
      std::uint8_t* d = out.pixel(y, img.width - 1 - x);
      d[0] = s[0];
      d[1] = s[1];
      d[2] = s[2];
    }
  }
  return out;
}

/// Rotation by quarter-turns: turns in {0,1,2,3}.
inline RgbImage rotate_quarter(const RgbImage& img, int turns) {
  RgbImage out = img;
  for (int i = 0; i < (turns & 3); ++i) out = rotate90(out);
  return out;
}

}  // namespace histo
