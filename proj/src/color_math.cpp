#include "histo/color_math.hpp"

#include <array>
#include <cmath>

namespace histo {

double od_from_intensity(int v, const OpticsConfig& cfg) {
  int clamped = v < cfg.min_intensity_clamp ? cfg.min_intensity_clamp : v;
  return -std::log10(static_cast<double>(clamped) / cfg.i0);
}

std::uint8_t intensity_from_od(double od, const OpticsConfig& cfg) {
  double v = cfg.i0 * std::pow(10.0, -od);
  long r = std::lround(v);  // rounds half away from zero
  if (r < 0) r = 0;
  if (r > 255) r = 255;
  return static_cast<std::uint8_t>(r);
}

double od_ceiling(const OpticsConfig& cfg) {
  return std::log10(static_cast<double>(cfg.i0) / cfg.min_intensity_clamp);
}

OdImage rgb_to_od(const RgbImage& image, const OpticsConfig& cfg) {
  cfg.validate();
  if (!image.valid()) fail(ErrorCode::InvalidArgument, "rgb_to_od: bad image");

  std::array<double, 256> table;
  for (int v = 0; v < 256; ++v) table[v] = od_from_intensity(v, cfg);

  OdImage out;
  out.width = image.width;
  out.height = image.height;
  out.data.resize(3, static_cast<Eigen::Index>(image.pixel_count()));
  const std::uint8_t* p = image.data.data();
  for (Eigen::Index i = 0; i < out.data.cols(); ++i, p += 3) {
    out.data(0, i) = table[p[0]];
    out.data(1, i) = table[p[1]];
    out.data(2, i) = table[p[2]];
  }
  return out;
}

RgbImage od_to_rgb(const OdImage& image, const OpticsConfig& cfg) {
  cfg.validate();
  RgbImage out(image.width, image.height);
  std::uint8_t* p = out.data.data();
  for (Eigen::Index i = 0; i < image.data.cols(); ++i, p += 3) {
    p[0] = intensity_from_od(image.data(0, i), cfg);
    p[1] = intensity_from_od(image.data(1, i), cfg);
    p[2] = intensity_from_od(image.data(2, i), cfg);
  }
  return out;
}

}  // namespace histo
