#pragma once

#include <functional>
#include <string>

#include "histo/pipeline/dataset.hpp"
#include "histo/pipeline/train.hpp"
#include "histo/stain.hpp"

namespace histo::pipeline {

/// The four train/test normalization combinations:
///   A: train raw,        test raw
///   B: train raw,        test normalized
///   C: train normalized, test normalized
///   D: train normalized, test raw
struct ExperimentGrid {
  double acc_a = 0, acc_b = 0, acc_c = 0, acc_d = 0;
};

using DatasetTransform = std::function<Dataset(const Dataset&)>;

/// Core grid: train two models (raw and transformed training data),
/// evaluate each against raw and transformed test data.
ExperimentGrid run_experiment_grid(const Dataset& train_data,
                                   const Dataset& test_data,
                                   const DatasetTransform& normalizer,
                                   const TrainConfig& config);

/// Grid with per-patch template normalization as the transform.
ExperimentGrid run_experiment_grid(const Dataset& train_data,
                                   const Dataset& test_data,
                                   const TemplateParams& tpl,
                                   const EstimationConfig& est,
                                   const TrainConfig& config);

/// Normalize every patch against the template.
Dataset normalize_dataset(const Dataset& dataset, const TemplateParams& tpl,
                          const EstimationConfig& est);

/// 2x2 text table in the A/B/C/D layout.
std::string format_grid(const ExperimentGrid& grid);

}  // namespace histo::pipeline
