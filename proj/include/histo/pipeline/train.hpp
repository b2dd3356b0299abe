#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "histo/net/network.hpp"
#include "histo/pipeline/dataset.hpp"

namespace histo::pipeline {

struct TrainConfig {
  int iterations = 4000;
  int batch_size = 256;
  double learning_rate = 0.0003;
  std::uint64_t seed = 42;
  bool augment_rotations = true;
  int validation_interval = 200;   // 0 disables validation logging
  double validation_fraction = 0.1;
  int width_divisor = 1;           // canonical filter counts / divisor
  int threads = 1;

  void validate() const;
};

struct TrainResult {
  net::NetworkSpec spec;
  net::NetworkParams<float> params;
  std::string log;                 // "iter <n> loss <f> [val_acc <f>]" lines
  long long adam_steps = 0;
  double final_val_accuracy = -1;  // -1 if validation never ran
};

/// Balanced-batch cross-entropy training with ADAM. A fixed held-out
/// split (sampled once from the config seed) is scored every
/// validation_interval iterations. Deterministic for a fixed config.
TrainResult train(const Dataset& dataset, const TrainConfig& config);

/// Argmax class per patch, forwarding each one independently.
std::vector<int> predict_labels(const net::NetworkSpec& spec,
                                const net::NetworkParams<float>& params,
                                const std::vector<const RgbImage*>& patches,
                                int threads = 1);

/// Class probabilities per patch, one row per patch.
Eigen::MatrixXd predict_probabilities(
    const net::NetworkSpec& spec, const net::NetworkParams<float>& params,
    const std::vector<const RgbImage*>& patches, int threads = 1);

/// Accuracy of the model over a whole dataset.
double dataset_accuracy(const net::NetworkSpec& spec,
                        const net::NetworkParams<float>& params,
                        const Dataset& dataset, int threads = 1);

}  // namespace histo::pipeline
