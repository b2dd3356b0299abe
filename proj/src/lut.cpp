#include "histo/lut.hpp"

#include <cstring>
#include <fstream>

#include "histo/errors.hpp"

namespace histo {

namespace {
constexpr char kMagic[4] = {'S', 'N', 'L', '1'};
}

Lut bake_lut(const PixelFunction& fn) {
  Lut lut;
  lut.entries.resize(3 * Lut::kEntries);
  std::uint8_t* out = lut.entries.data();
  for (int r = 0; r < 256; ++r)
    for (int g = 0; g < 256; ++g)
      for (int b = 0; b < 256; ++b, out += 3)
        fn(static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
           static_cast<std::uint8_t>(b), out);
  return lut;
}

Lut bake_lut(const TemplateParams& source_template,
             const TemplateParams& target_template) {
  return bake_lut([&](std::uint8_t r, std::uint8_t g, std::uint8_t b,
                      std::uint8_t out[3]) {
    map_pixel(source_template, target_template, r, g, b, out);
  });
}

RgbImage apply_lut(const RgbImage& image, const Lut& lut) {
  if (!lut.valid()) fail(ErrorCode::InvalidArgument, "apply_lut: bad table");
  RgbImage out(image.width, image.height);
  const std::uint8_t* src = image.data.data();
  std::uint8_t* dst = out.data.data();
  const std::uint8_t* table = lut.entries.data();
  const std::size_t n = image.pixel_count();
  // 32-bit index arithmetic; the widening chain in Lut::index defeats the
  // vectorizer and costs several times the whole gather
  for (std::size_t i = 0; i < n; ++i, src += 3, dst += 3) {
    const std::uint32_t idx = (std::uint32_t(src[0]) << 16) |
                              (std::uint32_t(src[1]) << 8) | src[2];
    const std::uint8_t* e = table + std::size_t(idx) * 3;
    dst[0] = e[0];
    dst[1] = e[1];
    dst[2] = e[2];
  }
  return out;
}

void write_lut(const Lut& lut, const std::filesystem::path& path) {
  if (!lut.valid()) fail(ErrorCode::InvalidArgument, "write_lut: bad table");
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) fail(ErrorCode::IoError, "cannot create " + tmp.string());
    os.write(kMagic, 4);
    char version = static_cast<char>(Lut::kVersion);
    os.write(&version, 1);
    os.write(reinterpret_cast<const char*>(lut.entries.data()),
             static_cast<std::streamsize>(lut.entries.size()));
    if (!os) fail(ErrorCode::IoError, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Lut read_lut(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::IoError, "cannot open " + path.string());

  char magic[4];
  if (!is.read(magic, 4))
    fail(ErrorCode::TruncatedFile, path.string() + ": missing header");
  if (std::memcmp(magic, kMagic, 4) != 0)
    fail(ErrorCode::BadMagic, path.string() + ": not an SNL1 table");
  char version;
  if (!is.read(&version, 1))
    fail(ErrorCode::TruncatedFile, path.string() + ": missing version");
  if (static_cast<std::uint8_t>(version) != Lut::kVersion)
    fail(ErrorCode::BadVersion,
         path.string() + ": unsupported SNL1 version " +
             std::to_string(static_cast<int>(version)));

  Lut lut;
  lut.entries.resize(3 * Lut::kEntries);
  if (!is.read(reinterpret_cast<char*>(lut.entries.data()),
               static_cast<std::streamsize>(lut.entries.size())))
    fail(ErrorCode::TruncatedFile,
         path.string() + ": payload shorter than 256^3 entries");
  return lut;
}

}  // namespace histo
