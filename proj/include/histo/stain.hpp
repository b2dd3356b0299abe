#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>

#include "histo/color_math.hpp"
#include "histo/image.hpp"

namespace histo {

/// Unit absorbance directions of the two dyes. By convention the
/// hematoxylin vector carries the larger red-channel component.
struct StainBasis {
  Eigen::Vector3d h_vector;
  Eigen::Vector3d e_vector;

  Eigen::Matrix<double, 3, 2> matrix() const {
    Eigen::Matrix<double, 3, 2> m;
    m.col(0) = h_vector;
    m.col(1) = e_vector;
    return m;
  }

  /// Least-squares inverse of matrix(); maps OD to (c_h, c_e).
  Eigen::Matrix<double, 2, 3> pseudo_inverse() const;

  /// Enforce the type contract: unit norms, non-negative components,
  /// independence, H/E ordering. Throws DegenerateStains on violation.
  void validate() const;
};

struct EstimationConfig {
  double od_threshold_beta = 0.15;
  double angle_percentile_alpha = 1.0;
  double concentration_percentile = 99.0;
  int min_tissue_pixels = 100;

  void validate() const;
};

/// Everything needed to replay a normalization: the template's stain
/// basis, its robust per-stain maxima, and the settings they were
/// estimated under.
struct TemplateParams {
  StainBasis basis;
  Eigen::Vector2d max_concentrations;
  OpticsConfig optics;
  EstimationConfig estimation;
};

/// Per-pixel H and E concentrations, one column per pixel.
struct ConcentrationMap {
  int width = 0;
  int height = 0;
  Eigen::Matrix2Xd data;
};

/// Nearest-rank percentile of a sample (p in (0, 100]).
double percentile_nearest_rank(std::vector<double> values, double p);

/// Stain-plane estimation: threshold tissue in OD space, take the two
/// leading eigenvectors of the OD covariance, and read the extreme
/// angular percentiles within that plane as the dye directions.
StainBasis estimate_stain_basis(const RgbImage& image,
                                const EstimationConfig& cfg = {},
                                const OpticsConfig& optics = {});

/// Least-squares decomposition against a fixed basis; negative
/// concentrations are clipped to zero.
Eigen::Matrix2Xd concentrations_from_od(const Eigen::Matrix3Xd& od,
                                        const StainBasis& basis);

ConcentrationMap estimate_concentrations(const RgbImage& image,
                                         const StainBasis& basis,
                                         const OpticsConfig& optics = {});

TemplateParams fit_template(const RgbImage& image,
                            const EstimationConfig& cfg = {},
                            const OpticsConfig& optics = {});

/// Match image appearance to the template: decompose against the image's
/// own estimated basis, rescale per-stain robust maxima to the template's,
/// reconstruct with the template basis.
RgbImage normalize(const RgbImage& image, const TemplateParams& tpl,
                   const EstimationConfig& cfg = {});

/// The fixed pixel mapping used when both endpoints are frozen templates.
/// This is the scalar reference path; the LUT bakes exactly this function.
void map_pixel(const TemplateParams& source, const TemplateParams& target,
               std::uint8_t r, std::uint8_t g, std::uint8_t b,
               std::uint8_t out[3]);

/// map_pixel applied to every pixel.
RgbImage map_image_direct(const RgbImage& image, const TemplateParams& source,
                          const TemplateParams& target);

void write_template(const TemplateParams& tpl,
                    const std::filesystem::path& path);
TemplateParams read_template(const std::filesystem::path& path);

std::string format_template(const TemplateParams& tpl);
TemplateParams parse_template(const std::string& text);

}  // namespace histo
