#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "histo/color_math.hpp"
#include "histo/pipeline/dataset.hpp"
#include "histo/rng.hpp"
#include "histo/stain.hpp"

namespace histo::pipeline {

/// Textbook H&E absorbance directions.
StainBasis classic_he_basis();

/// A deliberately different staining flavor (other scanner/lab); used as
/// the shifted palette in cross-cohort experiments.
StainBasis shifted_he_basis();

/// Wide-angle basis whose dyes absorb on every channel; keeps pure-stain
/// pixels above the tissue threshold, which makes recovery oracles sharp.
StainBasis calibration_basis();

/// Beer-Lambert renderer: concentrations (2 x w*h, pixel-major columns)
/// through the basis to an 8-bit image. Gaussian intensity noise is added
/// before rounding; noise_sd == 0 draws nothing from the rng.
RgbImage render_two_stain(const Eigen::Matrix2Xd& concentrations, int width,
                          int height, const StainBasis& basis,
                          const OpticsConfig& optics = {},
                          double noise_sd = 0.0, Rng* rng = nullptr);

/// Concentration field with pure-H, pure-E and mixed thirds; exercises the
/// full angular range of the stain plane.
Eigen::Matrix2Xd pure_blend_field(int pixels, Rng& rng, double cmax = 2.0);

/// Both concentrations i.i.d. uniform on [0, cmax].
Eigen::Matrix2Xd uniform_field(int pixels, Rng& rng, double cmax = 2.0);

/// Rotate each stain vector by a random angle up to max_deg (clipped back
/// to the non-negative octant).
StainBasis jitter_basis(const StainBasis& basis, double max_deg, Rng& rng);

enum class TextureKind {
  Blobs,
  Stripes,
  Checker,
  Speckle,
  Rings,
  Gradient,
  Dots,
  Waves,
  Background,
};

const char* texture_name(TextureKind kind);
TextureKind texture_from_name(const std::string& name);

/// Procedural per-class concentration texture, patch-major columns.
Eigen::Matrix2Xd texture_field(TextureKind kind, int size, Rng& rng);

struct SynthConfig {
  int num_classes = 3;
  int patches_per_class = 64;
  int patch_size = kPatchSize;
  StainBasis basis;  // defaults to classic_he_basis()
  double concentration_scale = 1.0;
  double basis_jitter_deg = 0.0;
  double scale_jitter = 0.0;  // fractional, per patch
  double noise_sd = 0.0;      // intensity levels
  std::uint64_t seed = 42;
  std::vector<TextureKind> textures;  // empty: default per-class cycle
  OpticsConfig optics;

  SynthConfig();
};

/// Deterministic procedural dataset: one texture per class rendered with
/// the configured palette. Patch (class, index) depends only on the seed
/// and its coordinates.
Dataset generate_synthetic_dataset(const SynthConfig& cfg);

/// A single large mosaic image of the configured textures; handy as a
/// normalization template for the palette.
RgbImage render_template_image(const SynthConfig& cfg, int size = 600);

}  // namespace histo::pipeline
