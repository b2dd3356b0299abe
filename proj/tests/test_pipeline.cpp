#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "histo/pipeline/grid.hpp"
#include "histo/pipeline/infer.hpp"
#include "histo/pipeline/synthetic.hpp"
#include "histo/pipeline/train.hpp"
#include "test_util.hpp"

using namespace histo;
using namespace histo::pipeline;

namespace {

Dataset tiny_dataset(int classes, int per_class, std::uint64_t seed = 42) {
  SynthConfig cfg;
  cfg.num_classes = classes;
  cfg.patches_per_class = per_class;
  cfg.seed = seed;
  return generate_synthetic_dataset(cfg);
}

TrainConfig micro_config(int iterations) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.batch_size = 6;
  cfg.width_divisor = 64;
  cfg.validation_interval = 0;
  cfg.validation_fraction = 0.0;
  return cfg;
}

std::filesystem::path temp_file(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "histokit_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("a single iteration performs exactly one adam step") {
  Dataset ds = tiny_dataset(2, 2);
  TrainResult result = train(ds, micro_config(1));
  CHECK(result.adam_steps == 1);
  CHECK(result.log.rfind("iter 1 loss ", 0) == 0);
}

TEST_CASE("training is deterministic in the seed") {
  Dataset ds = tiny_dataset(2, 3);
  TrainConfig cfg = micro_config(3);
  TrainResult a = train(ds, cfg);
  TrainResult b = train(ds, cfg);
  CHECK(a.log == b.log);
  for (std::size_t i = 0; i < a.params.conv.size(); ++i) {
    CHECK(bits_equal(a.params.conv[i].weight, b.params.conv[i].weight));
    CHECK(bits_equal(a.params.conv[i].bias, b.params.conv[i].bias));
  }
  cfg.seed = 7;
  TrainResult c = train(ds, cfg);
  CHECK_FALSE(bits_equal(a.params.conv[0].weight, c.params.conv[0].weight));
}

TEST_CASE("training log carries validation scores at the interval") {
  Dataset ds = tiny_dataset(2, 10);
  TrainConfig cfg = micro_config(4);
  cfg.validation_interval = 2;
  cfg.validation_fraction = 0.2;
  TrainResult result = train(ds, cfg);
  std::istringstream is(result.log);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    CHECK(line.rfind("iter ", 0) == 0);
    const bool has_val = line.find("val_acc") != std::string::npos;
    CHECK(has_val == (lineno % 2 == 0 || lineno == 4));
  }
  CHECK(lineno == 4);
  CHECK(result.final_val_accuracy >= 0.0);
}

TEST_CASE("patch classification equals the degenerate class map") {
  Dataset ds = tiny_dataset(2, 2);
  TrainResult model = train(ds, micro_config(1));
  const RgbImage& patch = ds.patches[1][0];

  ClassMap map = classify_tile(model.spec, model.params, patch);
  CHECK(map.grid_h == 1);
  CHECK(map.grid_w == 1);
  CHECK(map.num_classes == 2);
  CHECK(map.stride == 16);

  std::vector<const RgbImage*> one = {&patch};
  std::vector<int> label = predict_labels(model.spec, model.params, one);
  CHECK(map.classes[0] == label[0]);
}

TEST_CASE("class map cells are argmax-consistent") {
  Dataset ds = tiny_dataset(2, 2);
  TrainResult model = train(ds, micro_config(1));
  SynthConfig cfg;
  cfg.num_classes = 2;
  cfg.patches_per_class = 1;
  cfg.patch_size = 182;
  Dataset tile_ds = generate_synthetic_dataset(cfg);
  ClassMap map = classify_tile(model.spec, model.params, tile_ds.patches[0][0]);
  CHECK(map.grid_h == 3);
  CHECK(map.grid_w == 3);
  for (int y = 0; y < map.grid_h; ++y)
    for (int x = 0; x < map.grid_w; ++x) {
      const float* p = map.cell(y, x);
      int best = 0;
      for (int j = 1; j < map.num_classes; ++j)
        if (p[j] > p[best]) best = j;
      CHECK(map.classes[y * map.grid_w + x] == best);
    }
}

TEST_CASE("class map rendering") {
  ClassMap map;
  map.grid_h = 2;
  map.grid_w = 2;
  map.num_classes = 3;
  map.probabilities = {1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0};
  map.classes = {0, 1, 2, 0};

  RgbImage img = render_class_map(map);
  CHECK(img.width == 32);
  CHECK(img.height == 32);
  const auto& palette = default_palette();
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      CHECK(img.pixel(x, y)[0] == palette[0][0]);
      CHECK(img.pixel(16 + x, y)[0] == palette[1][0]);
      CHECK(img.pixel(x, 16 + y)[0] == palette[2][0]);
    }

  SUBCASE("palette too small") {
    std::vector<std::array<std::uint8_t, 3>> two = {palette[0], palette[1]};
    try {
      render_class_map(map, two);
      FAIL("expected PaletteTooSmall");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::PaletteTooSmall);
    }
  }

  SUBCASE("blend keeps source dimensions") {
    RgbImage source = RgbImage::filled(150, 150, 200, 200, 200);
    RgbImage blended = render_class_map_blend(map, source);
    CHECK(blended.width == 150);
    CHECK(blended.height == 150);
  }
}

TEST_CASE("class map dump round trip and errors") {
  ClassMap map;
  map.grid_h = 2;
  map.grid_w = 3;
  map.num_classes = 2;
  map.probabilities = {0.9f, 0.1f, 0.2f, 0.8f, 0.6f, 0.4f,
                       0.3f, 0.7f, 0.5f, 0.5f, 0.1f, 0.9f};
  map.classes = {0, 1, 0, 1, 0, 1};

  auto path = temp_file("map.clm");
  write_class_map(map, path);
  ClassMap back = read_class_map(path);
  CHECK(back.grid_h == 2);
  CHECK(back.grid_w == 3);
  CHECK(back.num_classes == 2);
  CHECK(back.probabilities == map.probabilities);
  CHECK(back.classes[0] == 0);

  std::ofstream os(temp_file("bad.clm"), std::ios::binary);
  os << "NOPE";
  os.close();
  try {
    read_class_map(temp_file("bad.clm"));
    FAIL("expected BadMagic");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadMagic);
  }
  std::filesystem::remove(path);
}

TEST_CASE("grid with the identity transform collapses to two cells") {
  Dataset train_ds = tiny_dataset(2, 3, 10);
  Dataset test_ds = tiny_dataset(2, 3, 11);
  ExperimentGrid grid = run_experiment_grid(
      train_ds, test_ds, [](const Dataset& d) { return d; }, micro_config(2));
  CHECK(grid.acc_a == grid.acc_b);
  CHECK(grid.acc_c == grid.acc_d);
  CHECK(grid.acc_a == grid.acc_c);  // same data, same seed, same model
}

TEST_CASE("grid table is labeled A through D") {
  ExperimentGrid grid{0.5096, 0.7555, 0.7966, 0.4565};
  std::string text = format_grid(grid);
  CHECK(text.find("C=0.7966") != std::string::npos);
  CHECK(text.find("B=0.7555") != std::string::npos);
  CHECK(text.find("D=0.4565") != std::string::npos);
  CHECK(text.find("A=0.5096") != std::string::npos);
  CHECK(text.find("train_sn") != std::string::npos);
  CHECK(text.find("test_raw") != std::string::npos);
}
