#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "histo/image.hpp"
#include "histo/stain.hpp"

namespace histo {

/// Exhaustive 256^3 RGB-to-RGB mapping. Entry order is R-major:
/// ((r*256)+g)*256+b, three bytes per entry.
struct Lut {
  static constexpr std::size_t kEntries = 256u * 256u * 256u;
  static constexpr std::uint8_t kVersion = 1;

  std::vector<std::uint8_t> entries;  // 3 * kEntries bytes

  static std::size_t index(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return ((static_cast<std::size_t>(r) << 8 | g) << 8 | b) * 3;
  }

  const std::uint8_t* lookup(std::uint8_t r, std::uint8_t g,
                             std::uint8_t b) const {
    return entries.data() + index(r, g, b);
  }

  bool valid() const { return entries.size() == 3 * kEntries; }
};

using PixelFunction =
    std::function<void(std::uint8_t, std::uint8_t, std::uint8_t,
                       std::uint8_t out[3])>;

/// Evaluate an arbitrary pixel mapping at every RGB value.
Lut bake_lut(const PixelFunction& fn);

/// Bake the frozen template-to-template normalization (map_pixel).
Lut bake_lut(const TemplateParams& source_template,
             const TemplateParams& target_template);

RgbImage apply_lut(const RgbImage& image, const Lut& lut);

/// On-disk format: magic "SNL1", one version byte, then the payload in
/// entry order. 5 + 3*256^3 bytes total.
void write_lut(const Lut& lut, const std::filesystem::path& path);
Lut read_lut(const std::filesystem::path& path);

constexpr std::size_t lut_file_size() { return 5 + 3 * Lut::kEntries; }

}  // namespace histo
