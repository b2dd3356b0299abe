// histokit: stain normalization and tissue classification jobs.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "histo/cli_config.hpp"
#include "histo/errors.hpp"
#include "histo/lut.hpp"
#include "histo/net/network.hpp"
#include "histo/pipeline/dataset.hpp"
#include "histo/pipeline/grid.hpp"
#include "histo/pipeline/infer.hpp"
#include "histo/pipeline/metrics.hpp"
#include "histo/pipeline/synthetic.hpp"
#include "histo/pipeline/train.hpp"
#include "histo/png_io.hpp"
#include "histo/stain.hpp"

namespace {

using histo::Error;
using histo::ErrorCode;

void write_text_atomic(const std::string& text,
                       const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) histo::fail(ErrorCode::IoError, "cannot create " + tmp.string());
    os << text;
    if (!os) histo::fail(ErrorCode::IoError, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// Bad flags and bad config files are usage errors (exit 1), unlike bad
// data files (exit 2).
struct UsageError {
  std::string message;
};

// Declared command-line options double as config-file keys (the long flag
// name without dashes). Command-line values win over file values.
class ConfigBinder {
public:
  explicit ConfigBinder(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_,
                     "key=value overrides for the flags of this subcommand");
  }

  template <typename T>
  CLI::Option* bind(const std::string& flag, T& var, const std::string& desc) {
    CLI::Option* opt = app_->add_option(flag, var, desc);
    add_setter(flag, opt, [&var](const std::string& s) {
      std::istringstream is(s);
      T parsed;
      if (!(is >> parsed) || !is.eof())
        histo::fail(ErrorCode::MalformedLine, "config: bad value '" + s + "'");
      var = parsed;
    });
    return opt;
  }

  CLI::Option* bind_flag(const std::string& flag, bool& var,
                         const std::string& desc) {
    CLI::Option* opt = app_->add_flag(flag, var, desc);
    add_setter(flag, opt, [&var](const std::string& s) {
      if (s == "1" || s == "true" || s == "on")
        var = true;
      else if (s == "0" || s == "false" || s == "off")
        var = false;
      else
        histo::fail(ErrorCode::MalformedLine,
                    "config: bad flag value '" + s + "'");
    });
    return opt;
  }

  void apply() {
    if (config_path_.empty()) return;
    try {
      auto values = histo::load_config_file(config_path_, keys_);
      for (const auto& [key, value] : values) {
        const auto& [opt, setter] = setters_.at(key);
        if (opt->count() == 0) setter(value);  // flags take precedence
      }
    } catch (const Error& e) {
      throw UsageError{e.what()};
    }
  }

private:
  void add_setter(const std::string& flag, CLI::Option* opt,
                  std::function<void(const std::string&)> setter) {
    std::string key = flag.substr(flag.find_first_not_of('-'));
    keys_.push_back(key);
    setters_[key] = {opt, std::move(setter)};
  }

  CLI::App* app_;
  std::string config_path_;
  std::vector<std::string> keys_;
  std::map<std::string,
           std::pair<CLI::Option*, std::function<void(const std::string&)>>>
      setters_;
};

histo::StainBasis palette_by_name(const std::string& name) {
  if (name == "classic") return histo::pipeline::classic_he_basis();
  if (name == "shifted") return histo::pipeline::shifted_he_basis();
  if (name == "calibration") return histo::pipeline::calibration_basis();
  histo::fail(ErrorCode::InvalidArgument, "unknown palette '" + name + "'");
}

struct TrainFlags {
  int iterations = 4000;
  int batch_size = 256;
  double learning_rate = 0.0003;
  std::uint64_t seed = 42;
  int val_interval = 200;
  double val_fraction = 0.1;
  int width_divisor = 1;
  int threads = 1;
  bool no_augment = false;
  bool deterministic = false;

  void bind(ConfigBinder& cfg) {
    cfg.bind("--iterations", iterations, "training iterations");
    cfg.bind("--batch-size", batch_size, "minibatch size");
    cfg.bind("--learning-rate", learning_rate, "ADAM learning rate");
    cfg.bind("--seed", seed, "RNG seed");
    cfg.bind("--val-interval", val_interval,
             "iterations between validation scores (0 = off)");
    cfg.bind("--val-fraction", val_fraction, "held-out validation fraction");
    cfg.bind("--width-divisor", width_divisor,
             "shrink every filter bank by this factor");
    cfg.bind("--threads", threads, "worker threads");
    cfg.bind_flag("--no-augment", no_augment, "disable rotation augmentation");
    cfg.bind_flag("--deterministic", deterministic,
                  "single-threaded, fixed reduction order");
  }

  histo::pipeline::TrainConfig to_config() const {
    histo::pipeline::TrainConfig c;
    c.iterations = iterations;
    c.batch_size = batch_size;
    c.learning_rate = learning_rate;
    c.seed = seed;
    c.augment_rotations = !no_augment;
    c.validation_interval = val_interval;
    c.validation_fraction = val_fraction;
    c.width_divisor = width_divisor;
    c.threads = deterministic ? 1 : threads;
    return c;
  }
};

int dispatch(int argc, char** argv) {
  CLI::App app{"H&E stain normalization and tissue classification"};
  app.require_subcommand(1);

  // fit-template
  auto* fit = app.add_subcommand("fit-template",
                                 "estimate stain parameters from an image");
  ConfigBinder fit_cfg(fit);
  struct {
    std::string input, out;
    double beta = 0.15, alpha = 1.0, cpct = 99.0;
    int min_tissue = 100, i0 = 255, clamp = 1;
  } fit_args;
  fit->add_option("--input", fit_args.input, "template image (PNG)")
      ->required();
  fit->add_option("--out", fit_args.out, "output template file")->required();
  fit_cfg.bind("--beta", fit_args.beta, "tissue OD threshold");
  fit_cfg.bind("--alpha", fit_args.alpha, "angular percentile");
  fit_cfg.bind("--cpct", fit_args.cpct, "concentration percentile");
  fit_cfg.bind("--min-tissue", fit_args.min_tissue, "minimum tissue pixels");
  fit_cfg.bind("--i0", fit_args.i0, "white level");
  fit_cfg.bind("--clamp", fit_args.clamp, "minimum intensity clamp");

  // normalize
  auto* norm = app.add_subcommand("normalize",
                                  "match an image to a stain template");
  ConfigBinder norm_cfg(norm);
  struct {
    std::string input, tpl, out;
    double beta = -1, alpha = -1, cpct = -1;
    int min_tissue = -1;
  } norm_args;
  norm->add_option("--input", norm_args.input, "image to normalize (PNG)")
      ->required();
  norm->add_option("--template", norm_args.tpl, "template file")->required();
  norm->add_option("--out", norm_args.out, "output image (PNG)")->required();
  norm_cfg.bind("--beta", norm_args.beta,
                "tissue OD threshold (default: template value)");
  norm_cfg.bind("--alpha", norm_args.alpha,
                "angular percentile (default: template value)");
  norm_cfg.bind("--cpct", norm_args.cpct,
                "concentration percentile (default: template value)");
  norm_cfg.bind("--min-tissue", norm_args.min_tissue,
                "minimum tissue pixels (default: template value)");

  // bake-lut
  auto* bake = app.add_subcommand("bake-lut",
                                  "bake a template pair into an SNL1 table");
  struct {
    std::string source, target, out;
  } bake_args;
  bake->add_option("--source", bake_args.source, "source template file")
      ->required();
  bake->add_option("--target", bake_args.target, "target template file")
      ->required();
  bake->add_option("--out", bake_args.out, "output SNL1 file")->required();

  // apply-lut
  auto* apply = app.add_subcommand("apply-lut", "run an SNL1 table over an image");
  struct {
    std::string input, lut, out;
  } apply_args;
  apply->add_option("--input", apply_args.input, "input image (PNG)")
      ->required();
  apply->add_option("--lut", apply_args.lut, "SNL1 file")->required();
  apply->add_option("--out", apply_args.out, "output image (PNG)")->required();

  // train
  auto* tr = app.add_subcommand("train", "train the tissue classifier");
  ConfigBinder tr_cfg(tr);
  struct {
    std::string data, out, log;
  } tr_args;
  TrainFlags tr_flags;
  tr->add_option("--data", tr_args.data, "dataset directory")->required();
  tr->add_option("--out", tr_args.out, "output checkpoint (CNV1)")->required();
  tr->add_option("--log", tr_args.log, "training log file (default stdout)");
  tr_flags.bind(tr_cfg);

  // classify
  auto* cls = app.add_subcommand("classify", "dense class map over a tile");
  ConfigBinder cls_cfg(cls);
  struct {
    std::string model, input, out, probs, tpl, lut;
    int threads = 1;
    bool blend = false;
  } cls_args;
  cls->add_option("--model", cls_args.model, "checkpoint file")->required();
  cls->add_option("--input", cls_args.input, "tile image (PNG)")->required();
  cls->add_option("--out", cls_args.out, "class map image (PNG)")->required();
  cls->add_option("--probs", cls_args.probs, "probability dump (CLM1)");
  auto* cls_tpl = cls->add_option("--template", cls_args.tpl,
                                  "normalize the tile against this template");
  auto* cls_lut = cls->add_option("--lut", cls_args.lut,
                                  "normalize the tile through this SNL1 table");
  cls_tpl->excludes(cls_lut);
  cls_cfg.bind("--threads", cls_args.threads, "worker threads");
  cls_cfg.bind_flag("--blend", cls_args.blend,
                    "blend class colors over the source tile");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score a checkpoint on a dataset");
  ConfigBinder ev_cfg(ev);
  struct {
    std::string model, data, mapping, out;
    int threads = 1;
  } ev_args;
  ev->add_option("--model", ev_args.model, "checkpoint file")->required();
  ev->add_option("--data", ev_args.data, "dataset directory")->required();
  ev->add_option("--mapping", ev_args.mapping, "class grouping file");
  ev->add_option("--out", ev_args.out, "metrics file (default stdout)");
  ev_cfg.bind("--threads", ev_args.threads, "worker threads");

  // grid
  auto* gr = app.add_subcommand(
      "grid", "accuracy with/without normalization in training and testing");
  ConfigBinder gr_cfg(gr);
  struct {
    std::string train_data, test_data, tpl, out;
  } gr_args;
  TrainFlags gr_flags;
  gr->add_option("--train-data", gr_args.train_data, "training dataset dir")
      ->required();
  gr->add_option("--test-data", gr_args.test_data, "test dataset dir")
      ->required();
  gr->add_option("--template", gr_args.tpl, "template file")->required();
  gr->add_option("--out", gr_args.out, "grid table file (default stdout)");
  gr_flags.bind(gr_cfg);

  // synth
  auto* sy = app.add_subcommand("synth", "generate a procedural dataset");
  ConfigBinder sy_cfg(sy);
  struct {
    std::string out, palette = "classic", textures;
    int classes = 3, patches = 64, patch_size = histo::pipeline::kPatchSize;
    double scale = 1.0, basis_jitter = 0.0, scale_jitter = 0.0, noise_sd = 0.0;
    std::uint64_t seed = 42;
  } sy_args;
  sy->add_option("--out", sy_args.out, "output dataset directory")->required();
  sy_cfg.bind("--classes", sy_args.classes, "number of classes");
  sy_cfg.bind("--patches-per-class", sy_args.patches, "patches per class");
  sy_cfg.bind("--patch-size", sy_args.patch_size, "patch edge length");
  sy_cfg.bind("--palette", sy_args.palette,
              "stain palette: classic | shifted | calibration");
  sy_cfg.bind("--scale", sy_args.scale, "concentration scale");
  sy_cfg.bind("--basis-jitter", sy_args.basis_jitter,
              "per-patch basis jitter (degrees)");
  sy_cfg.bind("--scale-jitter", sy_args.scale_jitter,
              "per-patch concentration jitter (fraction)");
  sy_cfg.bind("--noise-sd", sy_args.noise_sd, "pixel noise (intensity levels)");
  sy_cfg.bind("--seed", sy_args.seed, "RNG seed");
  sy_cfg.bind("--textures", sy_args.textures,
              "comma-separated texture list (one per class)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (fit->parsed()) {
      fit_cfg.apply();
      histo::EstimationConfig est;
      est.od_threshold_beta = fit_args.beta;
      est.angle_percentile_alpha = fit_args.alpha;
      est.concentration_percentile = fit_args.cpct;
      est.min_tissue_pixels = fit_args.min_tissue;
      histo::OpticsConfig optics{fit_args.i0, fit_args.clamp};
      histo::RgbImage img = histo::read_png(fit_args.input);
      histo::TemplateParams tpl = histo::fit_template(img, est, optics);
      histo::write_template(tpl, fit_args.out);
    } else if (norm->parsed()) {
      norm_cfg.apply();
      histo::RgbImage img = histo::read_png(norm_args.input);
      histo::TemplateParams tpl = histo::read_template(norm_args.tpl);
      histo::EstimationConfig est = tpl.estimation;
      if (norm_args.beta >= 0) est.od_threshold_beta = norm_args.beta;
      if (norm_args.alpha >= 0) est.angle_percentile_alpha = norm_args.alpha;
      if (norm_args.cpct >= 0) est.concentration_percentile = norm_args.cpct;
      if (norm_args.min_tissue >= 0) est.min_tissue_pixels = norm_args.min_tissue;
      histo::write_png(histo::normalize(img, tpl, est), norm_args.out);
    } else if (bake->parsed()) {
      histo::TemplateParams src = histo::read_template(bake_args.source);
      histo::TemplateParams tgt = histo::read_template(bake_args.target);
      histo::write_lut(histo::bake_lut(src, tgt), bake_args.out);
    } else if (apply->parsed()) {
      histo::RgbImage img = histo::read_png(apply_args.input);
      histo::Lut lut = histo::read_lut(apply_args.lut);
      histo::write_png(histo::apply_lut(img, lut), apply_args.out);
    } else if (tr->parsed()) {
      tr_cfg.apply();
      histo::pipeline::Dataset ds = histo::pipeline::load_dataset(tr_args.data);
      histo::pipeline::TrainResult result =
          histo::pipeline::train(ds, tr_flags.to_config());
      histo::net::save_checkpoint(result.spec, result.params, tr_args.out);
      if (tr_args.log.empty())
        std::cout << result.log;
      else
        write_text_atomic(result.log, tr_args.log);
    } else if (cls->parsed()) {
      cls_cfg.apply();
      auto [spec, params] = histo::net::load_checkpoint(cls_args.model);
      histo::RgbImage tile = histo::read_png(cls_args.input);
      histo::pipeline::TileTransform normalizer;
      if (!cls_args.tpl.empty()) {
        histo::TemplateParams tpl = histo::read_template(cls_args.tpl);
        normalizer = [tpl](const histo::RgbImage& img) {
          return histo::normalize(img, tpl, tpl.estimation);
        };
      } else if (!cls_args.lut.empty()) {
        auto lut = std::make_shared<histo::Lut>(histo::read_lut(cls_args.lut));
        normalizer = [lut](const histo::RgbImage& img) {
          return histo::apply_lut(img, *lut);
        };
      }
      histo::pipeline::ClassMap map =
          histo::pipeline::classify_tile(spec, params, tile, normalizer);
      histo::RgbImage rendered =
          cls_args.blend ? histo::pipeline::render_class_map_blend(map, tile)
                         : histo::pipeline::render_class_map(map);
      histo::write_png(rendered, cls_args.out);
      if (!cls_args.probs.empty())
        histo::pipeline::write_class_map(map, cls_args.probs);
    } else if (ev->parsed()) {
      ev_cfg.apply();
      auto [spec, params] = histo::net::load_checkpoint(ev_args.model);
      histo::pipeline::Dataset ds = histo::pipeline::load_dataset(ev_args.data);
      std::vector<const histo::RgbImage*> patches;
      std::vector<int> truth;
      for (int c = 0; c < ds.num_classes(); ++c)
        for (const auto& img : ds.patches[c]) {
          patches.push_back(&img);
          truth.push_back(c);
        }
      Eigen::MatrixXd probs = histo::pipeline::predict_probabilities(
          spec, params, patches, ev_args.threads);

      std::vector<std::string> names = ds.class_names;
      std::vector<int> labels = truth;
      if (!ev_args.mapping.empty()) {
        std::ifstream is(ev_args.mapping);
        if (!is)
          histo::fail(ErrorCode::IoError,
                      "cannot open mapping " + ev_args.mapping);
        std::ostringstream buf;
        buf << is.rdbuf();
        histo::pipeline::ClassMapping mapping =
            histo::pipeline::parse_class_mapping(buf.str(), ds.class_names);
        histo::pipeline::GroupedSamples grouped =
            histo::pipeline::group_classes(probs, truth, mapping);
        probs = std::move(grouped.probabilities);
        labels = std::move(grouped.labels);
        names = mapping.group_names;
      }
      std::vector<int> predicted(probs.rows());
      for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        Eigen::Index best;
        probs.row(i).maxCoeff(&best);
        predicted[i] = static_cast<int>(best);
      }
      histo::pipeline::Metrics metrics = histo::pipeline::evaluate(
          predicted, labels, static_cast<int>(names.size()));
      std::string text = histo::pipeline::format_metrics(metrics, names);
      if (ev_args.out.empty())
        std::cout << text;
      else
        write_text_atomic(text, ev_args.out);
    } else if (gr->parsed()) {
      gr_cfg.apply();
      histo::pipeline::Dataset train_ds =
          histo::pipeline::load_dataset(gr_args.train_data);
      histo::pipeline::Dataset test_ds =
          histo::pipeline::load_dataset(gr_args.test_data);
      histo::TemplateParams tpl = histo::read_template(gr_args.tpl);
      histo::pipeline::ExperimentGrid grid = histo::pipeline::run_experiment_grid(
          train_ds, test_ds, tpl, tpl.estimation, gr_flags.to_config());
      std::string text = histo::pipeline::format_grid(grid);
      if (gr_args.out.empty())
        std::cout << text;
      else
        write_text_atomic(text, gr_args.out);
    } else if (sy->parsed()) {
      sy_cfg.apply();
      histo::pipeline::SynthConfig cfg;
      cfg.num_classes = sy_args.classes;
      cfg.patches_per_class = sy_args.patches;
      cfg.patch_size = sy_args.patch_size;
      cfg.basis = palette_by_name(sy_args.palette);
      cfg.concentration_scale = sy_args.scale;
      cfg.basis_jitter_deg = sy_args.basis_jitter;
      cfg.scale_jitter = sy_args.scale_jitter;
      cfg.noise_sd = sy_args.noise_sd;
      cfg.seed = sy_args.seed;
      if (!sy_args.textures.empty()) {
        std::istringstream is(sy_args.textures);
        std::string name;
        while (std::getline(is, name, ','))
          cfg.textures.push_back(histo::pipeline::texture_from_name(name));
      }
      histo::pipeline::write_dataset(
          histo::pipeline::generate_synthetic_dataset(cfg), sy_args.out);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.message << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return dispatch(argc, argv); }
