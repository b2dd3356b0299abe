#pragma once

#include <Eigen/Dense>

#include "histo/errors.hpp"
#include "histo/image.hpp"

namespace histo {

/// Transmitted-light model for converting 8-bit intensities to optical
/// density. min_intensity_clamp keeps the log finite at zero intensity.
struct OpticsConfig {
  int i0 = 255;
  int min_intensity_clamp = 1;

  void validate() const {
    if (!(1 <= min_intensity_clamp && min_intensity_clamp < i0 && i0 <= 255))
      fail(ErrorCode::InvalidArgument,
           "optics: need 1 <= min_intensity_clamp < i0 <= 255");
  }
};

/// Optical-density raster. One column per pixel (index y*width + x),
/// rows are the R, G, B absorbances.
struct OdImage {
  int width = 0;
  int height = 0;
  Eigen::Matrix3Xd data;

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }
};

/// od = -log10(max(v, clamp) / i0)
double od_from_intensity(int v, const OpticsConfig& cfg);

/// Inverse of od_from_intensity: round(i0 * 10^-od), half away from zero,
/// clamped to [0, 255].
std::uint8_t intensity_from_od(double od, const OpticsConfig& cfg);

OdImage rgb_to_od(const RgbImage& image, const OpticsConfig& cfg = {});
RgbImage od_to_rgb(const OdImage& image, const OpticsConfig& cfg = {});

/// Largest density representable under cfg: log10(i0 / clamp).
double od_ceiling(const OpticsConfig& cfg);

}  // namespace histo
