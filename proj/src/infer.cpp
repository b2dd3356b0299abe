#include "histo/pipeline/infer.hpp"

#include <cstring>
#include <fstream>

#include "histo/errors.hpp"
#include "histo/pipeline/dataset.hpp"

namespace histo::pipeline {

namespace {
constexpr char kMagic[4] = {'C', 'L', 'M', '1'};

void write_u32(std::ofstream& os, std::uint32_t v) {
  char buf[4] = {static_cast<char>(v & 0xff),
                 static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff),
                 static_cast<char>((v >> 24) & 0xff)};
  os.write(buf, 4);
}

std::uint32_t read_u32(std::ifstream& is, const std::string& what) {
  unsigned char buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4))
    fail(ErrorCode::TruncatedFile, "class map: missing " + what);
  return static_cast<std::uint32_t>(buf[0]) |
         static_cast<std::uint32_t>(buf[1]) << 8 |
         static_cast<std::uint32_t>(buf[2]) << 16 |
         static_cast<std::uint32_t>(buf[3]) << 24;
}
}  // namespace

ClassMap classify_tile(const net::NetworkSpec& spec,
                       const net::NetworkParams<float>& params,
                       const RgbImage& tile, const TileTransform& normalizer) {
  const RgbImage* input = &tile;
  RgbImage normalized;
  if (normalizer) {
    normalized = normalizer(tile);
    input = &normalized;
  }

  net::Tensor<float> x(1, input->height, input->width, 3);
  fill_sample(x, 0, *input);
  net::Tensor<float> probs = net::forward(spec, params, x);

  ClassMap map;
  map.grid_h = probs.h;
  map.grid_w = probs.w;
  map.num_classes = probs.c;
  map.probabilities = std::move(probs.v);
  map.classes.resize(static_cast<std::size_t>(map.grid_h) * map.grid_w);
  for (std::size_t i = 0; i < map.classes.size(); ++i) {
    const float* p = map.probabilities.data() + i * map.num_classes;
    int best = 0;
    for (int j = 1; j < map.num_classes; ++j)
      if (p[j] > p[best]) best = j;
    map.classes[i] = best;
  }
  return map;
}

const std::vector<std::array<std::uint8_t, 3>>& default_palette() {
  static const std::vector<std::array<std::uint8_t, 3>> palette = {
      {{230, 25, 75}},   {{60, 180, 75}},   {{255, 225, 25}},
      {{0, 130, 200}},   {{245, 130, 48}},  {{145, 30, 180}},
      {{70, 240, 240}},  {{240, 50, 230}},  {{128, 128, 128}},
      {{170, 110, 40}},  {{0, 128, 128}},   {{220, 190, 255}},
  };
  return palette;
}

RgbImage render_class_map(
    const ClassMap& map,
    const std::vector<std::array<std::uint8_t, 3>>& palette) {
  if (static_cast<int>(palette.size()) < map.num_classes)
    fail(ErrorCode::PaletteTooSmall,
         "palette has " + std::to_string(palette.size()) + " colors for " +
             std::to_string(map.num_classes) + " classes");
  RgbImage out(map.grid_w * map.stride, map.grid_h * map.stride);
  for (int gy = 0; gy < map.grid_h; ++gy) {
    for (int gx = 0; gx < map.grid_w; ++gx) {
      const auto& color =
          palette[map.classes[static_cast<std::size_t>(gy) * map.grid_w + gx]];
      for (int y = 0; y < map.stride; ++y) {
        std::uint8_t* p = out.pixel(gx * map.stride, gy * map.stride + y);
        for (int x = 0; x < map.stride; ++x, p += 3) {
          p[0] = color[0];
          p[1] = color[1];
          p[2] = color[2];
        }
      }
    }
  }
  return out;
}

RgbImage render_class_map_blend(
    const ClassMap& map, const RgbImage& source,
    const std::vector<std::array<std::uint8_t, 3>>& palette) {
  if (static_cast<int>(palette.size()) < map.num_classes)
    fail(ErrorCode::PaletteTooSmall,
         "palette has " + std::to_string(palette.size()) + " colors for " +
             std::to_string(map.num_classes) + " classes");
  RgbImage out = source;
  for (int gy = 0; gy < map.grid_h; ++gy) {
    for (int gx = 0; gx < map.grid_w; ++gx) {
      const auto& color =
          palette[map.classes[static_cast<std::size_t>(gy) * map.grid_w + gx]];
      const int x0 = map.origin + gx * map.stride;
      const int y0 = map.origin + gy * map.stride;
      for (int y = y0; y < y0 + map.stride && y < out.height; ++y) {
        for (int x = x0; x < x0 + map.stride && x < out.width; ++x) {
          std::uint8_t* p = out.pixel(x, y);
          p[0] = static_cast<std::uint8_t>((p[0] + color[0] + 1) / 2);
          p[1] = static_cast<std::uint8_t>((p[1] + color[1] + 1) / 2);
          p[2] = static_cast<std::uint8_t>((p[2] + color[2] + 1) / 2);
        }
      }
    }
  }
  return out;
}

void write_class_map(const ClassMap& map, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) fail(ErrorCode::IoError, "cannot create " + tmp.string());
    os.write(kMagic, 4);
    write_u32(os, static_cast<std::uint32_t>(map.grid_h));
    write_u32(os, static_cast<std::uint32_t>(map.grid_w));
    write_u32(os, static_cast<std::uint32_t>(map.num_classes));
    os.write(reinterpret_cast<const char*>(map.probabilities.data()),
             static_cast<std::streamsize>(map.probabilities.size() *
                                          sizeof(float)));
    if (!os) fail(ErrorCode::IoError, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ClassMap read_class_map(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::IoError, "cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4))
    fail(ErrorCode::TruncatedFile, path.string() + ": missing header");
  if (std::memcmp(magic, kMagic, 4) != 0)
    fail(ErrorCode::BadMagic, path.string() + ": not a CLM1 dump");

  ClassMap map;
  map.grid_h = static_cast<int>(read_u32(is, "grid height"));
  map.grid_w = static_cast<int>(read_u32(is, "grid width"));
  map.num_classes = static_cast<int>(read_u32(is, "class count"));
  if (map.grid_h < 1 || map.grid_w < 1 || map.num_classes < 1)
    fail(ErrorCode::ShapeMismatch, path.string() + ": bad dimensions");
  map.probabilities.resize(static_cast<std::size_t>(map.grid_h) * map.grid_w *
                           map.num_classes);
  if (!is.read(reinterpret_cast<char*>(map.probabilities.data()),
               static_cast<std::streamsize>(map.probabilities.size() *
                                            sizeof(float))))
    fail(ErrorCode::TruncatedFile, path.string() + ": payload ends early");
  map.classes.resize(static_cast<std::size_t>(map.grid_h) * map.grid_w);
  for (std::size_t i = 0; i < map.classes.size(); ++i) {
    const float* p = map.probabilities.data() + i * map.num_classes;
    int best = 0;
    for (int j = 1; j < map.num_classes; ++j)
      if (p[j] > p[best]) best = j;
    map.classes[i] = best;
  }
  return map;
}

}  // namespace histo::pipeline
