#include "histo/pipeline/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "histo/errors.hpp"

namespace histo::pipeline {

void TrainConfig::validate() const {
  if (iterations < 1 || batch_size < 1 || validation_interval < 0 ||
      width_divisor < 1 || threads < 1)
    fail(ErrorCode::InvalidArgument, "train: counts must be positive");
  if (!(learning_rate > 0))
    fail(ErrorCode::InvalidArgument, "train: learning rate must be positive");
  if (!(validation_fraction >= 0 && validation_fraction < 1))
    fail(ErrorCode::InvalidArgument, "train: validation fraction in [0, 1)");
}

namespace {

struct Split {
  Dataset train;
  std::vector<const RgbImage*> val_patches;
  std::vector<int> val_labels;
};

// Fixed held-out split drawn once per run from the config seed.
Split split_validation(const Dataset& dataset, double fraction, Rng& rng) {
  Split split;
  split.train.class_names = dataset.class_names;
  split.train.patches.resize(dataset.patches.size());
  for (int c = 0; c < dataset.num_classes(); ++c) {
    const auto& pool = dataset.patches[c];
    const int n = static_cast<int>(pool.size());
    int n_val = fraction > 0 ? static_cast<int>(std::lround(fraction * n)) : 0;
    if (fraction > 0 && n >= 2) n_val = std::max(1, n_val);
    n_val = std::min(n_val, n - 1);  // keep at least one training patch
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = 0; i < n_val; ++i) {
      int j = i + static_cast<int>(
                      rng.bounded(static_cast<std::uint32_t>(n - i)));
      std::swap(order[i], order[j]);
    }
    std::sort(order.begin(), order.begin() + n_val);
    std::vector<bool> held(n, false);
    for (int i = 0; i < n_val; ++i) held[order[i]] = true;
    for (int i = 0; i < n; ++i) {
      if (held[i]) {
        split.val_patches.push_back(&pool[i]);
        split.val_labels.push_back(c);
      } else {
        split.train.patches[c].push_back(pool[i]);
      }
    }
  }
  return split;
}

}  // namespace

std::vector<int> predict_labels(const net::NetworkSpec& spec,
                                const net::NetworkParams<float>& params,
                                const std::vector<const RgbImage*>& patches,
                                int threads) {
  std::vector<int> labels(patches.size(), -1);
  const int n = static_cast<int>(patches.size());
  const int t = std::max(1, std::min(threads, n));

  auto run = [&](int i) {
    const RgbImage& img = *patches[i];
    net::Tensor<float> x(1, img.height, img.width, 3);
    fill_sample(x, 0, img);
    net::Tensor<float> probs = net::forward(spec, params, x);
    const int k = spec.num_classes;
    const float* p = probs.v.data();  // 1x1 grid for patch-sized inputs
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (p[j] > p[best]) best = j;
    labels[i] = best;
  };

  if (t == 1) {
    for (int i = 0; i < n; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (int ti = 0; ti < t; ++ti)
      pool.emplace_back([&, ti] {
        for (int i = ti; i < n; i += t) run(i);
      });
    for (auto& th : pool) th.join();
  }
  return labels;
}

Eigen::MatrixXd predict_probabilities(
    const net::NetworkSpec& spec, const net::NetworkParams<float>& params,
    const std::vector<const RgbImage*>& patches, int threads) {
  const int n = static_cast<int>(patches.size());
  const int k = spec.num_classes;
  Eigen::MatrixXd probs(n, k);
  const int t = std::max(1, std::min(threads, n));

  auto run = [&](int i) {
    const RgbImage& img = *patches[i];
    net::Tensor<float> x(1, img.height, img.width, 3);
    fill_sample(x, 0, img);
    net::Tensor<float> out = net::forward(spec, params, x);
    for (int j = 0; j < k; ++j)
      probs(i, j) = static_cast<double>(out.v[j]);
  };

  if (t == 1) {
    for (int i = 0; i < n; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (int ti = 0; ti < t; ++ti)
      pool.emplace_back([&, ti] {
        for (int i = ti; i < n; i += t) run(i);
      });
    for (auto& th : pool) th.join();
  }
  return probs;
}

double dataset_accuracy(const net::NetworkSpec& spec,
                        const net::NetworkParams<float>& params,
                        const Dataset& dataset, int threads) {
  std::vector<const RgbImage*> patches;
  std::vector<int> truth;
  for (int c = 0; c < dataset.num_classes(); ++c)
    for (const auto& img : dataset.patches[c]) {
      patches.push_back(&img);
      truth.push_back(c);
    }
  std::vector<int> predicted = predict_labels(spec, params, patches, threads);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (predicted[i] == truth[i]) ++correct;
  return truth.empty() ? 0.0 : static_cast<double>(correct) / truth.size();
}

TrainResult train(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  const int k = dataset.num_classes();
  if (k < 2) fail(ErrorCode::InvalidClassCount, "train: need >= 2 classes");
  for (int c = 0; c < k; ++c)
    if (dataset.patches[c].empty())
      fail(ErrorCode::EmptyClass,
           "train: class " + dataset.class_names[c] + " has no patches");

  Rng rng(config.seed);
  Split split = split_validation(dataset, config.validation_fraction, rng);

  auto [spec, params] =
      net::build_network(k, config.seed, config.width_divisor);
  net::AdamState<float> adam = net::make_adam_state(params);

  TrainResult result;
  std::ostringstream log;
  char line[128];
  double val_acc = -1;
  for (int iter = 1; iter <= config.iterations; ++iter) {
    Batch batch = sample_balanced_batch(split.train, config.batch_size, rng,
                                        config.augment_rotations);
    net::LossGrad<float> lg = net::loss_and_gradient(
        spec, params, batch.images, batch.labels, config.threads);
    net::adam_step(params, lg.grads, adam,
                   static_cast<float>(config.learning_rate));

    std::snprintf(line, sizeof(line), "iter %d loss %.6f", iter,
                  static_cast<double>(lg.loss));
    log << line;
    if (config.validation_interval > 0 && !split.val_patches.empty() &&
        (iter % config.validation_interval == 0 ||
         iter == config.iterations)) {
      std::vector<int> predicted =
          predict_labels(spec, params, split.val_patches, config.threads);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == split.val_labels[i]) ++correct;
      val_acc = static_cast<double>(correct) / predicted.size();
      std::snprintf(line, sizeof(line), " val_acc %.6f", val_acc);
      log << line;
    }
    log << '\n';
  }

  result.spec = std::move(spec);
  result.params = std::move(params);
  result.log = log.str();
  result.adam_steps = adam.t;
  result.final_val_accuracy = val_acc;
  return result;
}

}  // namespace histo::pipeline
