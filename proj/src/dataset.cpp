#include "histo/pipeline/dataset.hpp"

#include <algorithm>

#include "histo/errors.hpp"
#include "histo/png_io.hpp"

namespace histo::pipeline {

Dataset load_dataset(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root))
    fail(ErrorCode::IoError, root.string() + " is not a directory");

  std::vector<std::filesystem::path> class_dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.size() < 2)
    fail(ErrorCode::InvalidArgument,
         root.string() + ": need at least 2 class directories");

  Dataset ds;
  for (const auto& dir : class_dirs) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".png")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
      fail(ErrorCode::EmptyClass,
           dir.string() + " contains no PNG patches");

    std::vector<RgbImage> patches;
    patches.reserve(files.size());
    for (const auto& file : files) {
      RgbImage img = read_png(file);
      if (img.width != kPatchSize || img.height != kPatchSize)
        fail(ErrorCode::BadPatchSize,
             file.string() + ": expected " + std::to_string(kPatchSize) + "x" +
                 std::to_string(kPatchSize) + ", got " +
                 std::to_string(img.width) + "x" + std::to_string(img.height));
      patches.push_back(std::move(img));
    }
    ds.class_names.push_back(dir.filename().string());
    ds.patches.push_back(std::move(patches));
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  for (int c = 0; c < dataset.num_classes(); ++c) {
    std::filesystem::path dir = root / dataset.class_names[c];
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < dataset.patches[c].size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "patch_%05zu.png", i);
      write_png(dataset.patches[c][i], dir / name);
    }
  }
}

std::array<LabeledPatch, 4> rotations_of(const LabeledPatch& patch) {
  std::array<LabeledPatch, 4> out;
  out[0] = patch;
  for (int i = 1; i < 4; ++i)
    out[i] = LabeledPatch{rotate90(out[i - 1].image), patch.label};
  return out;
}

void fill_sample(net::Tensor<float>& tensor, int index, const RgbImage& patch,
                 int quarter_turns) {
  const RgbImage* src = &patch;
  RgbImage rotated;
  if (quarter_turns & 3) {
    rotated = rotate_quarter(patch, quarter_turns);
    src = &rotated;
  }
  float* dst = tensor.sample(index);
  const std::uint8_t* s = src->data.data();
  const std::size_t count = src->data.size();
  for (std::size_t i = 0; i < count; ++i)
    dst[i] = static_cast<float>(s[i]) * (1.0f / 255.0f);
}

Batch sample_balanced_batch(const Dataset& dataset, int batch_size, Rng& rng,
                            bool augment) {
  const int k = dataset.num_classes();
  if (k < 1) fail(ErrorCode::EmptyInput, "batch: dataset has no classes");
  if (batch_size < k)
    fail(ErrorCode::BatchTooSmall,
         "batch size " + std::to_string(batch_size) +
             " is smaller than the class count " + std::to_string(k));

  std::vector<int> counts(k, batch_size / k);
  int remainder = batch_size % k;
  // Partial Fisher-Yates: the first `remainder` entries are a uniform
  // draw of distinct classes.
  std::vector<int> order(k);
  for (int i = 0; i < k; ++i) order[i] = i;
  for (int i = 0; i < remainder; ++i) {
    int j = i + static_cast<int>(rng.bounded(static_cast<std::uint32_t>(k - i)));
    std::swap(order[i], order[j]);
  }
  for (int i = 0; i < remainder; ++i) counts[order[i]] += 1;

  Batch batch;
  batch.images = net::Tensor<float>(batch_size, kPatchSize, kPatchSize, 3);
  batch.labels.reserve(batch_size);
  int slot = 0;
  for (int c = 0; c < k; ++c) {
    const auto& pool = dataset.patches[c];
    for (int i = 0; i < counts[c]; ++i) {
      const auto pick = rng.bounded(static_cast<std::uint32_t>(pool.size()));
      const int turns = augment ? static_cast<int>(rng.bounded(4)) : 0;
      fill_sample(batch.images, slot, pool[pick], turns);
      batch.labels.push_back(c);
      ++slot;
    }
  }
  return batch;
}

}  // namespace histo::pipeline
