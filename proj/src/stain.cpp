#include "histo/stain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include "histo/errors.hpp"

namespace histo {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

double angle_between_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  double d = std::clamp(a.dot(b), -1.0, 1.0);
  return std::acos(d) * kDegPerRad;
}

struct TissueSelection {
  OdImage od;
  std::vector<Eigen::Index> tissue;  // column indices with all channels > beta
};

TissueSelection select_tissue(const RgbImage& image,
                              const EstimationConfig& cfg,
                              const OpticsConfig& optics) {
  cfg.validate();
  TissueSelection sel;
  sel.od = rgb_to_od(image, optics);
  const double beta = cfg.od_threshold_beta;
  for (Eigen::Index i = 0; i < sel.od.data.cols(); ++i) {
    if (sel.od.data(0, i) > beta && sel.od.data(1, i) > beta &&
        sel.od.data(2, i) > beta)
      sel.tissue.push_back(i);
  }
  if (static_cast<int>(sel.tissue.size()) < cfg.min_tissue_pixels)
    fail(ErrorCode::InsufficientTissue,
         "only " + std::to_string(sel.tissue.size()) +
             " tissue pixels above the density threshold (need " +
             std::to_string(cfg.min_tissue_pixels) + ")");
  return sel;
}

Eigen::Matrix3Xd gather_columns(const Eigen::Matrix3Xd& m,
                                const std::vector<Eigen::Index>& idx) {
  Eigen::Matrix3Xd out(3, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(j) = m.col(idx[j]);
  return out;
}

StainBasis basis_from_tissue_od(const Eigen::Matrix3Xd& tissue,
                                const EstimationConfig& cfg) {
  const Eigen::Index n = tissue.cols();
  Eigen::Vector3d mean = tissue.rowwise().mean();
  Eigen::Matrix3Xd centered = tissue.colwise() - mean;
  Eigen::Matrix3d cov = centered * centered.transpose() / double(n);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const auto& evals = es.eigenvalues();  // ascending
  if (evals(1) <= std::max(evals(2) * 1e-9, 1e-12))
    fail(ErrorCode::DegenerateStains,
         "tissue absorbances span fewer than two directions");

  // Plane of the two leading eigenvectors; signs fixed so the component
  // sum is non-negative.
  Eigen::Vector3d v1 = es.eigenvectors().col(2);
  Eigen::Vector3d v2 = es.eigenvectors().col(1);
  if (v1.sum() < 0) v1 = -v1;
  if (v2.sum() < 0) v2 = -v2;

  std::vector<double> angles(n);
  for (Eigen::Index i = 0; i < n; ++i)
    angles[i] = std::atan2(v2.dot(tissue.col(i)), v1.dot(tissue.col(i)));

  const double alpha = cfg.angle_percentile_alpha;
  double phi_lo = percentile_nearest_rank(angles, alpha);
  double phi_hi = percentile_nearest_rank(std::move(angles), 100.0 - alpha);

  auto direction = [&](double phi) {
    Eigen::Vector3d v = std::cos(phi) * v1 + std::sin(phi) * v2;
    v = v.cwiseMax(0.0);
    double norm = v.norm();
    if (norm < 1e-12)
      fail(ErrorCode::DegenerateStains, "extreme stain direction vanished");
    return Eigen::Vector3d(v / norm);
  };
  Eigen::Vector3d a = direction(phi_lo);
  Eigen::Vector3d b = direction(phi_hi);

  StainBasis basis;
  if (a(0) > b(0)) {
    basis.h_vector = a;
    basis.e_vector = b;
  } else {
    basis.h_vector = b;
    basis.e_vector = a;
  }
  basis.validate();
  return basis;
}

/// Precomputed fixed mapping between two templates. Both the LUT bake and
/// the direct image path run through operator(), which keeps them
/// bit-identical.
class PixelMapper {
public:
  PixelMapper(const TemplateParams& source, const TemplateParams& target)
      : pinv_(source.basis.pseudo_inverse()),
        reconstruct_(target.basis.matrix()),
        optics_(target.optics) {
    scale_(0) = target.max_concentrations(0) / source.max_concentrations(0);
    scale_(1) = target.max_concentrations(1) / source.max_concentrations(1);
    for (int v = 0; v < 256; ++v) od_table_[v] = od_from_intensity(v, optics_);
  }

  void operator()(std::uint8_t r, std::uint8_t g, std::uint8_t b,
                  std::uint8_t out[3]) const {
    Eigen::Vector3d od(od_table_[r], od_table_[g], od_table_[b]);
    Eigen::Vector2d c = (pinv_ * od).cwiseMax(0.0).cwiseProduct(scale_);
    Eigen::Vector3d rec = reconstruct_ * c;
    out[0] = intensity_from_od(rec(0), optics_);
    out[1] = intensity_from_od(rec(1), optics_);
    out[2] = intensity_from_od(rec(2), optics_);
  }

private:
  Eigen::Matrix<double, 2, 3> pinv_;
  Eigen::Matrix<double, 3, 2> reconstruct_;
  Eigen::Vector2d scale_;
  OpticsConfig optics_;
  std::array<double, 256> od_table_;
};

}  // namespace

Eigen::Matrix<double, 2, 3> StainBasis::pseudo_inverse() const {
  Eigen::Matrix<double, 3, 2> m = matrix();
  Eigen::Matrix2d gram = m.transpose() * m;
  return gram.inverse() * m.transpose();
}

void StainBasis::validate() const {
  if (std::abs(h_vector.norm() - 1.0) > 1e-9 ||
      std::abs(e_vector.norm() - 1.0) > 1e-9)
    fail(ErrorCode::DegenerateStains, "stain vectors must be unit length");
  if (h_vector.minCoeff() < 0 || e_vector.minCoeff() < 0)
    fail(ErrorCode::DegenerateStains, "stain vectors must be non-negative");
  if (angle_between_deg(h_vector, e_vector) <= 1.0)
    fail(ErrorCode::DegenerateStains,
         "stain vectors are not linearly independent");
  if (!(h_vector(0) > e_vector(0)))
    fail(ErrorCode::DegenerateStains,
         "hematoxylin must carry the larger red absorbance");
}

void EstimationConfig::validate() const {
  if (!(od_threshold_beta > 0))
    fail(ErrorCode::InvalidArgument, "estimation: beta must be positive");
  if (!(angle_percentile_alpha > 0 && angle_percentile_alpha < 50))
    fail(ErrorCode::InvalidArgument, "estimation: alpha must be in (0, 50)");
  if (!(concentration_percentile > 50 && concentration_percentile <= 100))
    fail(ErrorCode::InvalidArgument,
         "estimation: concentration percentile must be in (50, 100]");
  if (min_tissue_pixels < 1)
    fail(ErrorCode::InvalidArgument,
         "estimation: min_tissue_pixels must be at least 1");
}

double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty())
    fail(ErrorCode::EmptyInput, "percentile of an empty sample");
  std::sort(values.begin(), values.end());
  auto n = static_cast<long>(values.size());
  long rank = static_cast<long>(std::ceil(p / 100.0 * n));
  rank = std::clamp(rank, 1L, n);
  return values[rank - 1];
}

StainBasis estimate_stain_basis(const RgbImage& image,
                                const EstimationConfig& cfg,
                                const OpticsConfig& optics) {
  TissueSelection sel = select_tissue(image, cfg, optics);
  return basis_from_tissue_od(gather_columns(sel.od.data, sel.tissue), cfg);
}

Eigen::Matrix2Xd concentrations_from_od(const Eigen::Matrix3Xd& od,
                                        const StainBasis& basis) {
  return (basis.pseudo_inverse() * od).cwiseMax(0.0);
}

ConcentrationMap estimate_concentrations(const RgbImage& image,
                                         const StainBasis& basis,
                                         const OpticsConfig& optics) {
  basis.validate();
  OdImage od = rgb_to_od(image, optics);
  ConcentrationMap map;
  map.width = od.width;
  map.height = od.height;
  map.data = concentrations_from_od(od.data, basis);
  return map;
}

TemplateParams fit_template(const RgbImage& image, const EstimationConfig& cfg,
                            const OpticsConfig& optics) {
  TissueSelection sel = select_tissue(image, cfg, optics);
  Eigen::Matrix3Xd tissue = gather_columns(sel.od.data, sel.tissue);

  TemplateParams tpl;
  tpl.basis = basis_from_tissue_od(tissue, cfg);
  tpl.optics = optics;
  tpl.estimation = cfg;

  Eigen::Matrix2Xd conc = concentrations_from_od(tissue, tpl.basis);
  for (int s = 0; s < 2; ++s) {
    std::vector<double> values(conc.cols());
    for (Eigen::Index i = 0; i < conc.cols(); ++i) values[i] = conc(s, i);
    tpl.max_concentrations(s) = percentile_nearest_rank(
        std::move(values), cfg.concentration_percentile);
    if (!(tpl.max_concentrations(s) > 0))
      fail(ErrorCode::DegenerateStains,
           "robust maximum concentration is not positive");
  }
  return tpl;
}

RgbImage normalize(const RgbImage& image, const TemplateParams& tpl,
                   const EstimationConfig& cfg) {
  TemplateParams source = fit_template(image, cfg, tpl.optics);
  return map_image_direct(image, source, tpl);
}

void map_pixel(const TemplateParams& source, const TemplateParams& target,
               std::uint8_t r, std::uint8_t g, std::uint8_t b,
               std::uint8_t out[3]) {
  PixelMapper(source, target)(r, g, b, out);
}

RgbImage map_image_direct(const RgbImage& image, const TemplateParams& source,
                          const TemplateParams& target) {
  PixelMapper mapper(source, target);
  RgbImage out(image.width, image.height);
  const std::uint8_t* src = image.data.data();
  std::uint8_t* dst = out.data.data();
  for (std::size_t i = 0; i < image.pixel_count(); ++i, src += 3, dst += 3)
    mapper(src[0], src[1], src[2], dst);
  return out;
}

std::string format_template(const TemplateParams& tpl) {
  auto fmt = [](double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
  };
  std::ostringstream os;
  os << "version=1\n";
  os << "h=" << fmt(tpl.basis.h_vector(0)) << ' ' << fmt(tpl.basis.h_vector(1))
     << ' ' << fmt(tpl.basis.h_vector(2)) << '\n';
  os << "e=" << fmt(tpl.basis.e_vector(0)) << ' ' << fmt(tpl.basis.e_vector(1))
     << ' ' << fmt(tpl.basis.e_vector(2)) << '\n';
  os << "cmax=" << fmt(tpl.max_concentrations(0)) << ' '
     << fmt(tpl.max_concentrations(1)) << '\n';
  os << "i0=" << tpl.optics.i0 << '\n';
  os << "beta=" << fmt(tpl.estimation.od_threshold_beta) << '\n';
  os << "alpha=" << fmt(tpl.estimation.angle_percentile_alpha) << '\n';
  os << "cpct=" << fmt(tpl.estimation.concentration_percentile) << '\n';
  return os.str();
}

TemplateParams parse_template(const std::string& text) {
  TemplateParams tpl;
  bool saw_version = false, saw_h = false, saw_e = false, saw_cmax = false;

  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::MalformedLine,
           "template line " + std::to_string(lineno) + ": missing '='");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    std::istringstream vs(value);

    auto want = [&](int count, double* out) {
      for (int i = 0; i < count; ++i) {
        if (!(vs >> out[i]))
          fail(ErrorCode::MalformedLine, "template line " +
                                             std::to_string(lineno) +
                                             ": bad value for " + key);
      }
    };

    if (key == "version") {
      double v;
      want(1, &v);
      if (v != 1)
        fail(ErrorCode::BadVersion, "unsupported template version " + value);
      saw_version = true;
    } else if (key == "h") {
      want(3, tpl.basis.h_vector.data());
      saw_h = true;
    } else if (key == "e") {
      want(3, tpl.basis.e_vector.data());
      saw_e = true;
    } else if (key == "cmax") {
      want(2, tpl.max_concentrations.data());
      saw_cmax = true;
    } else if (key == "i0") {
      double v;
      want(1, &v);
      tpl.optics.i0 = static_cast<int>(v);
    } else if (key == "beta") {
      want(1, &tpl.estimation.od_threshold_beta);
    } else if (key == "alpha") {
      want(1, &tpl.estimation.angle_percentile_alpha);
    } else if (key == "cpct") {
      want(1, &tpl.estimation.concentration_percentile);
    } else {
      fail(ErrorCode::UnknownKey, "template: unknown key '" + key + "'");
    }
  }

  if (!saw_version)
    fail(ErrorCode::MalformedLine, "template: missing version");
  if (!saw_h || !saw_e || !saw_cmax)
    fail(ErrorCode::MalformedLine, "template: missing h, e or cmax");
  tpl.optics.validate();
  tpl.estimation.validate();
  tpl.basis.validate();
  if (!(tpl.max_concentrations.minCoeff() > 0) ||
      !tpl.max_concentrations.allFinite())
    fail(ErrorCode::MalformedLine, "template: cmax must be positive");
  return tpl;
}

void write_template(const TemplateParams& tpl,
                    const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) fail(ErrorCode::IoError, "cannot create " + tmp.string());
    os << format_template(tpl);
    if (!os) fail(ErrorCode::IoError, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TemplateParams read_template(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_template(buf.str());
}

}  // namespace histo
