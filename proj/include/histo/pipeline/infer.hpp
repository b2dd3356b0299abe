#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "histo/image.hpp"
#include "histo/net/network.hpp"

namespace histo::pipeline {

/// Dense classification grid: one cell per 16 input pixels, probability
/// vector and argmax class per cell. origin is the offset of the first
/// cell's block when overlaying the grid on the source tile.
struct ClassMap {
  int grid_h = 0, grid_w = 0;
  int num_classes = 0;
  int stride = 16;
  int origin = 67;  // (patch 150 - stride 16) / 2, centered alignment
  std::vector<float> probabilities;  // grid_h*grid_w*num_classes, row-major
  std::vector<int> classes;          // argmax per cell

  const float* cell(int y, int x) const {
    return probabilities.data() +
           (static_cast<std::size_t>(y) * grid_w + x) * num_classes;
  }
};

using TileTransform = std::function<RgbImage(const RgbImage&)>;

/// Dense forward pass over a tile (>= 150x150), optionally running a
/// normalizer first.
ClassMap classify_tile(const net::NetworkSpec& spec,
                       const net::NetworkParams<float>& params,
                       const RgbImage& tile,
                       const TileTransform& normalizer = {});

/// Distinct default colors, enough for the 9-class setup.
const std::vector<std::array<std::uint8_t, 3>>& default_palette();

/// stride x stride solid block per cell.
RgbImage render_class_map(const ClassMap& map,
                          const std::vector<std::array<std::uint8_t, 3>>&
                              palette = default_palette());

/// 50% blend of the class colors over the source tile; output matches the
/// source dimensions.
RgbImage render_class_map_blend(const ClassMap& map, const RgbImage& source,
                                const std::vector<std::array<std::uint8_t, 3>>&
                                    palette = default_palette());

/// Probability dump, format "CLM1": magic, grid height and width and class
/// count as u32 LE, then f32 LE probabilities row-major.
void write_class_map(const ClassMap& map, const std::filesystem::path& path);
ClassMap read_class_map(const std::filesystem::path& path);

}  // namespace histo::pipeline
