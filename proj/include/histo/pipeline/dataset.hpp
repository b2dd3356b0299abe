#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "histo/image.hpp"
#include "histo/net/tensor.hpp"
#include "histo/rng.hpp"

namespace histo::pipeline {

constexpr int kPatchSize = 150;

struct LabeledPatch {
  RgbImage image;
  int label = 0;
};

/// Patches grouped by class; label = index into class_names.
struct Dataset {
  std::vector<std::string> class_names;
  std::vector<std::vector<RgbImage>> patches;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::size_t patch_count() const {
    std::size_t n = 0;
    for (const auto& c : patches) n += c.size();
    return n;
  }
};

/// Directory layout: one subdirectory per class holding PNG patches;
/// class order is the lexicographic subdirectory order.
Dataset load_dataset(const std::filesystem::path& root);

void write_dataset(const Dataset& dataset, const std::filesystem::path& root);

/// The patch plus its three right-angle rotations, label preserved.
std::array<LabeledPatch, 4> rotations_of(const LabeledPatch& patch);

struct Batch {
  net::Tensor<float> images;  // n x 150 x 150 x 3, intensities scaled by 1/255
  std::vector<int> labels;
};

/// Balanced minibatch: floor(batch_size/K) per class, the remainder spread
/// over distinct classes chosen without replacement; patches drawn with
/// replacement inside each class; a uniform quarter-turn when augment is on.
Batch sample_balanced_batch(const Dataset& dataset, int batch_size, Rng& rng,
                            bool augment = true);

/// Scale an 8-bit patch into a float sample slot, optionally rotated.
void fill_sample(net::Tensor<float>& tensor, int index, const RgbImage& patch,
                 int quarter_turns = 0);

}  // namespace histo::pipeline
