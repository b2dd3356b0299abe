#pragma once

#include <filesystem>

#include "histo/image.hpp"

namespace histo {

/// Load a PNG as 8-bit RGB. Palette and grayscale images are expanded,
/// 16-bit channels are narrowed, alpha is stripped.
RgbImage read_png(const std::filesystem::path& path);

/// Write 8-bit RGB. The file is created atomically (temp + rename).
void write_png(const RgbImage& image, const std::filesystem::path& path);

}  // namespace histo
