#include "histo/pipeline/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "histo/errors.hpp"

namespace histo::pipeline {

namespace {

Eigen::Vector3d unit(double a, double b, double c) {
  Eigen::Vector3d v(a, b, c);
  return v / v.norm();
}

constexpr double kRadPerDeg = std::numbers::pi / 180.0;

// Disk stamp helper shared by the dotted textures.
void add_disks(Eigen::Matrix2Xd& field, int stain, int size, int count,
               double r_lo, double r_hi, double amplitude, bool soft,
               Rng& rng) {
  for (int d = 0; d < count; ++d) {
    const double cx = rng.uniform(0, size);
    const double cy = rng.uniform(0, size);
    const double radius = rng.uniform(r_lo, r_hi);
    const int x0 = std::max(0, static_cast<int>(cx - 3 * radius));
    const int x1 = std::min(size - 1, static_cast<int>(cx + 3 * radius));
    const int y0 = std::max(0, static_cast<int>(cy - 3 * radius));
    const int y1 = std::min(size - 1, static_cast<int>(cy + 3 * radius));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double d2 = dx * dx + dy * dy;
        double v = 0.0;
        if (soft) {
          v = amplitude * std::exp(-d2 / (2 * radius * radius));
        } else if (d2 <= radius * radius) {
          v = amplitude;
        }
        if (v > 0) field(stain, static_cast<Eigen::Index>(y) * size + x) += v;
      }
    }
  }
}

}  // namespace

StainBasis classic_he_basis() {
  StainBasis b;
  b.h_vector = unit(0.65, 0.70, 0.29);
  b.e_vector = unit(0.07, 0.99, 0.11);
  return b;
}

StainBasis shifted_he_basis() {
  StainBasis b;
  b.h_vector = unit(0.85, 0.45, 0.27);
  b.e_vector = unit(0.10, 0.45, 0.89);
  return b;
}

StainBasis calibration_basis() {
  StainBasis b;
  b.h_vector = unit(0.80, 0.45, 0.35);
  b.e_vector = unit(0.20, 0.55, 0.80);
  return b;
}

SynthConfig::SynthConfig() : basis(classic_he_basis()) {}

RgbImage render_two_stain(const Eigen::Matrix2Xd& concentrations, int width,
                          int height, const StainBasis& basis,
                          const OpticsConfig& optics, double noise_sd,
                          Rng* rng) {
  optics.validate();
  if (concentrations.cols() != static_cast<Eigen::Index>(width) * height)
    fail(ErrorCode::ShapeMismatch, "render: field size mismatch");
  if (noise_sd > 0 && !rng)
    fail(ErrorCode::InvalidArgument, "render: noise requires an rng");

  Eigen::Matrix3Xd od = basis.matrix() * concentrations;
  RgbImage img(width, height);
  std::uint8_t* p = img.data.data();
  for (Eigen::Index i = 0; i < od.cols(); ++i, p += 3) {
    for (int ch = 0; ch < 3; ++ch) {
      double intensity = optics.i0 * std::pow(10.0, -od(ch, i));
      if (noise_sd > 0) intensity += noise_sd * rng->gaussian();
      long r = std::lround(intensity);
      p[ch] = static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
    }
  }
  return img;
}

Eigen::Matrix2Xd pure_blend_field(int pixels, Rng& rng, double cmax) {
  Eigen::Matrix2Xd field(2, pixels);
  for (int i = 0; i < pixels; ++i) {
    const std::uint32_t kind = rng.bounded(3);
    double h = 0, e = 0;
    if (kind == 0) {
      h = rng.uniform(0.2 * cmax, cmax);
    } else if (kind == 1) {
      e = rng.uniform(0.2 * cmax, cmax);
    } else {
      h = rng.uniform(0.05 * cmax, 0.6 * cmax);
      e = rng.uniform(0.05 * cmax, 0.6 * cmax);
    }
    field(0, i) = h;
    field(1, i) = e;
  }
  return field;
}

Eigen::Matrix2Xd uniform_field(int pixels, Rng& rng, double cmax) {
  Eigen::Matrix2Xd field(2, pixels);
  for (int i = 0; i < pixels; ++i) {
    field(0, i) = rng.uniform(0.0, cmax);
    field(1, i) = rng.uniform(0.0, cmax);
  }
  return field;
}

StainBasis jitter_basis(const StainBasis& basis, double max_deg, Rng& rng) {
  auto rotate = [&](const Eigen::Vector3d& v) {
    const double angle = rng.uniform(-max_deg, max_deg) * kRadPerDeg;
    Eigen::Vector3d g(rng.gaussian(), rng.gaussian(), rng.gaussian());
    Eigen::Vector3d tangent = g - g.dot(v) * v;
    double norm = tangent.norm();
    if (norm < 1e-9) return v;
    tangent /= norm;
    Eigen::Vector3d out = std::cos(angle) * v + std::sin(angle) * tangent;
    out = out.cwiseMax(0.0);
    return Eigen::Vector3d(out / out.norm());
  };
  StainBasis out;
  out.h_vector = rotate(basis.h_vector);
  out.e_vector = rotate(basis.e_vector);
  return out;
}

const char* texture_name(TextureKind kind) {
  switch (kind) {
    case TextureKind::Blobs: return "blobs";
    case TextureKind::Stripes: return "stripes";
    case TextureKind::Checker: return "checker";
    case TextureKind::Speckle: return "speckle";
    case TextureKind::Rings: return "rings";
    case TextureKind::Gradient: return "gradient";
    case TextureKind::Dots: return "dots";
    case TextureKind::Waves: return "waves";
    case TextureKind::Background: return "background";
  }
  return "unknown";
}

TextureKind texture_from_name(const std::string& name) {
  for (TextureKind kind :
       {TextureKind::Blobs, TextureKind::Stripes, TextureKind::Checker,
        TextureKind::Speckle, TextureKind::Rings, TextureKind::Gradient,
        TextureKind::Dots, TextureKind::Waves, TextureKind::Background}) {
    if (name == texture_name(kind)) return kind;
  }
  fail(ErrorCode::InvalidArgument, "unknown texture '" + name + "'");
}

Eigen::Matrix2Xd texture_field(TextureKind kind, int size, Rng& rng) {
  const Eigen::Index n = static_cast<Eigen::Index>(size) * size;
  Eigen::Matrix2Xd field(2, n);
  constexpr double kBase = 0.30;  // both dyes present everywhere
  field.setConstant(kBase);

  auto for_pixels = [&](auto&& fn) {
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        fn(x, y, static_cast<Eigen::Index>(y) * size + x);
  };

  // Every texture spreads (c_h, c_e) over a genuinely two-dimensional
  // region; concentration fields confined to a line leave the stain plane
  // pinned down by quantization noise only, and per-patch estimation
  // becomes unstable. The secondary dye therefore always rides its own
  // low-frequency wave.
  auto counter_wave = [&](int stain, double amp) {
    const double theta = rng.uniform(0, std::numbers::pi);
    const double lambda = rng.uniform(30.0, 50.0);
    const double phase = rng.uniform(0, 2 * std::numbers::pi);
    const double fx = std::cos(theta) * 2 * std::numbers::pi / lambda;
    const double fy = std::sin(theta) * 2 * std::numbers::pi / lambda;
    for_pixels([&](int x, int y, Eigen::Index i) {
      field(stain, i) += amp * (1 + std::sin(fx * x + fy * y + phase)) / 2;
    });
  };
  auto stripe_wave = [&](int stain, double amp, double lambda_lo,
                         double lambda_hi) {
    const double theta = rng.uniform(0, std::numbers::pi);
    const double lambda = rng.uniform(lambda_lo, lambda_hi);
    const double phase = rng.uniform(0, 2 * std::numbers::pi);
    const double fx = std::cos(theta) * 2 * std::numbers::pi / lambda;
    const double fy = std::sin(theta) * 2 * std::numbers::pi / lambda;
    for_pixels([&](int x, int y, Eigen::Index i) {
      field(stain, i) += amp * (1 + std::sin(fx * x + fy * y + phase)) / 2;
    });
  };

  switch (kind) {
    case TextureKind::Background:
      field.setZero();
      break;
    case TextureKind::Blobs:
      add_disks(field, 0, size, 12, 5.0, 10.0, 0.8, true, rng);
      counter_wave(1, 0.3);
      break;
    case TextureKind::Stripes:
      stripe_wave(0, 0.55, 14.0, 22.0);
      stripe_wave(1, 0.45, 10.0, 13.0);
      break;
    case TextureKind::Checker: {
      const int cell = 14 + static_cast<int>(rng.bounded(7));
      const int ox = static_cast<int>(rng.bounded(static_cast<std::uint32_t>(cell)));
      const int oy = static_cast<int>(rng.bounded(static_cast<std::uint32_t>(cell)));
      for_pixels([&](int x, int y, Eigen::Index i) {
        const int parity = (((x + ox) / cell) + ((y + oy) / cell)) & 1;
        field(parity, i) += 0.55 * (0.6 + 0.8 * x / size);
      });
      break;
    }
    case TextureKind::Speckle:
      add_disks(field, 0, size, size * size / 160, 1.5, 3.0, 0.7, false, rng);
      counter_wave(1, 0.35);
      break;
    case TextureKind::Rings: {
      const double cx = rng.uniform(0.2 * size, 0.8 * size);
      const double cy = rng.uniform(0.2 * size, 0.8 * size);
      const double lambda = rng.uniform(16.0, 24.0);
      const double phase = rng.uniform(0, 2 * std::numbers::pi);
      for_pixels([&](int x, int y, Eigen::Index i) {
        const double r = std::hypot(x - cx, y - cy);
        const double s = std::sin(2 * std::numbers::pi * r / lambda + phase);
        field(0, i) += 0.5 * (1 + s) / 2;
      });
      counter_wave(1, 0.4);
      break;
    }
    case TextureKind::Gradient: {
      const double theta = rng.uniform(0, 2 * std::numbers::pi);
      const double gx = std::cos(theta), gy = std::sin(theta);
      for_pixels([&](int x, int y, Eigen::Index i) {
        double t = (gx * x + gy * y) / size;        // roughly [-1, 1]
        t = std::clamp(0.5 + 0.5 * t, 0.0, 1.0);
        field(0, i) += 0.5 * t;
      });
      stripe_wave(1, 0.4, 24.0, 36.0);
      break;
    }
    case TextureKind::Dots:
      add_disks(field, 1, size, 6, 8.0, 12.0, 0.8, false, rng);
      counter_wave(0, 0.3);
      break;
    case TextureKind::Waves: {
      const double l1 = rng.uniform(20.0, 30.0);
      const double l2 = rng.uniform(20.0, 30.0);
      const double p1 = rng.uniform(0, 2 * std::numbers::pi);
      const double p2 = rng.uniform(0, 2 * std::numbers::pi);
      for_pixels([&](int x, int y, Eigen::Index i) {
        const double s = std::sin(2 * std::numbers::pi * x / l1 + p1) *
                         std::sin(2 * std::numbers::pi * y / l2 + p2);
        field(0, i) += 0.3 * (1 + s) / 2;
      });
      counter_wave(1, 0.35);
      break;
    }
  }
  return field;
}

namespace {

std::vector<TextureKind> default_textures(int num_classes) {
  static constexpr TextureKind kOrder[] = {
      TextureKind::Blobs,   TextureKind::Stripes,  TextureKind::Checker,
      TextureKind::Speckle, TextureKind::Rings,    TextureKind::Gradient,
      TextureKind::Dots,    TextureKind::Waves,    TextureKind::Background,
  };
  std::vector<TextureKind> kinds;
  for (int i = 0; i < num_classes; ++i)
    kinds.push_back(kOrder[i % std::size(kOrder)]);
  return kinds;
}

}  // namespace

Dataset generate_synthetic_dataset(const SynthConfig& cfg) {
  if (cfg.num_classes < 2)
    fail(ErrorCode::InvalidClassCount, "synthetic: need at least 2 classes");
  if (cfg.patches_per_class < 1 || cfg.patch_size < 1)
    fail(ErrorCode::InvalidArgument, "synthetic: bad patch geometry");
  std::vector<TextureKind> kinds =
      cfg.textures.empty() ? default_textures(cfg.num_classes) : cfg.textures;
  if (static_cast<int>(kinds.size()) != cfg.num_classes)
    fail(ErrorCode::InvalidArgument,
         "synthetic: texture list does not match the class count");

  Dataset ds;
  for (int c = 0; c < cfg.num_classes; ++c) {
    char name[48];
    std::snprintf(name, sizeof(name), "c%02d_%s", c, texture_name(kinds[c]));
    ds.class_names.emplace_back(name);
    std::vector<RgbImage> patches;
    patches.reserve(cfg.patches_per_class);
    for (int i = 0; i < cfg.patches_per_class; ++i) {
      Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(c),
                       static_cast<std::uint64_t>(i)));
      StainBasis basis = cfg.basis;
      if (cfg.basis_jitter_deg > 0)
        basis = jitter_basis(basis, cfg.basis_jitter_deg, rng);
      double scale = cfg.concentration_scale;
      if (cfg.scale_jitter > 0)
        scale *= rng.uniform(1.0 - cfg.scale_jitter, 1.0 + cfg.scale_jitter);
      Eigen::Matrix2Xd field = texture_field(kinds[c], cfg.patch_size, rng);
      field *= scale;
      patches.push_back(render_two_stain(field, cfg.patch_size, cfg.patch_size,
                                         basis, cfg.optics, cfg.noise_sd,
                                         &rng));
    }
    ds.patches.push_back(std::move(patches));
  }
  return ds;
}

RgbImage render_template_image(const SynthConfig& cfg, int size) {
  std::vector<TextureKind> kinds =
      cfg.textures.empty() ? default_textures(cfg.num_classes) : cfg.textures;
  Rng rng(mix_seed(cfg.seed, 0x7e57, 0));
  RgbImage canvas(size, size);
  const int tile = cfg.patch_size;
  for (int ty = 0; ty * tile < size; ++ty) {
    for (int tx = 0; tx * tile < size; ++tx) {
      TextureKind kind = kinds[(ty + tx) % kinds.size()];
      if (kind == TextureKind::Background && kinds.size() > 1)
        kind = kinds[(ty + tx + 1) % kinds.size()];
      Eigen::Matrix2Xd field = texture_field(kind, tile, rng);
      field *= cfg.concentration_scale;
      RgbImage patch = render_two_stain(field, tile, tile, cfg.basis,
                                        cfg.optics, cfg.noise_sd,
                                        cfg.noise_sd > 0 ? &rng : nullptr);
      for (int y = 0; y < tile && ty * tile + y < size; ++y) {
        for (int x = 0; x < tile && tx * tile + x < size; ++x) {
          const std::uint8_t* s = patch.pixel(x, y);
          std::uint8_t* d = canvas.pixel(tx * tile + x, ty * tile + y);
          d[0] = s[0];
          d[1] = s[1];
          d[2] = s[2];
        }
      }
    }
  }
  return canvas;
}

}  // namespace histo::pipeline
