#include "histo/pipeline/grid.hpp"

#include <cstdio>

namespace histo::pipeline {

Dataset normalize_dataset(const Dataset& dataset, const TemplateParams& tpl,
                          const EstimationConfig& est) {
  Dataset out;
  out.class_names = dataset.class_names;
  out.patches.resize(dataset.patches.size());
  for (std::size_t c = 0; c < dataset.patches.size(); ++c) {
    out.patches[c].reserve(dataset.patches[c].size());
    for (const auto& img : dataset.patches[c])
      out.patches[c].push_back(normalize(img, tpl, est));
  }
  return out;
}

ExperimentGrid run_experiment_grid(const Dataset& train_data,
                                   const Dataset& test_data,
                                   const DatasetTransform& normalizer,
                                   const TrainConfig& config) {
  Dataset train_norm = normalizer(train_data);
  Dataset test_norm = normalizer(test_data);

  TrainResult model_raw = train(train_data, config);
  TrainResult model_norm = train(train_norm, config);

  ExperimentGrid grid;
  grid.acc_a = dataset_accuracy(model_raw.spec, model_raw.params, test_data,
                                config.threads);
  grid.acc_b = dataset_accuracy(model_raw.spec, model_raw.params, test_norm,
                                config.threads);
  grid.acc_c = dataset_accuracy(model_norm.spec, model_norm.params, test_norm,
                                config.threads);
  grid.acc_d = dataset_accuracy(model_norm.spec, model_norm.params, test_data,
                                config.threads);
  return grid;
}

ExperimentGrid run_experiment_grid(const Dataset& train_data,
                                   const Dataset& test_data,
                                   const TemplateParams& tpl,
                                   const EstimationConfig& est,
                                   const TrainConfig& config) {
  return run_experiment_grid(
      train_data, test_data,
      [&](const Dataset& ds) { return normalize_dataset(ds, tpl, est); },
      config);
}

std::string format_grid(const ExperimentGrid& grid) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "                train_sn      train_raw\n"
                "test_sn         C=%.4f      B=%.4f\n"
                "test_raw        D=%.4f      A=%.4f\n",
                grid.acc_c, grid.acc_b, grid.acc_d, grid.acc_a);
  return buf;
}

}  // namespace histo::pipeline
