#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "chanprune/dataset.h"
#include "chanprune/graph.h"
#include "chanprune/network.h"

namespace chanprune {

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;  // applied to weights, not biases
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  // Step decay: lr *= lr_decay_factor every lr_decay_every epochs (0 = never).
  std::size_t lr_decay_every = 10;
  double lr_decay_factor = 0.1;

  void validate() const;  // throws ConfigError
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double test_acc = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  WeightStore weights;
  std::vector<EpochLog> history;
  // Train loss moved by under 2% (or under 0.001) over the last three epochs.
  bool plateaued = false;
};

/// One SGD-with-momentum step, Caffe style:
///   v <- momentum * v - lr * (g + weight_decay * theta);  theta <- theta + v
void sgd_momentum_update(std::span<float> params, std::span<const float> grads,
                         std::span<float> velocity, double learning_rate, double momentum,
                         double weight_decay);

/// Trains from a seeded He initialisation. Deterministic for a fixed seed.
/// Throws DivergenceError as soon as a batch loss is not finite.
TrainResult train(const NetworkDef& net, const DatasetSplits& splits, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

// Same, starting from the given weights.
TrainResult train_from(Graph graph, const DatasetSplits& splits, const TrainConfig& cfg,
                       const std::function<void(const EpochLog&)>& on_epoch = {});

// Number of examples whose argmax logit (lowest index on ties) is the label.
std::size_t count_correct(const Graph& graph, const Dataset& data, std::size_t batch_size = 250);

/// Top-1 accuracy over the whole set. Throws std::invalid_argument if empty.
double evaluate_top1(const Graph& graph, const Dataset& data, std::size_t batch_size = 250);

// "epoch loss test_acc lr" per line.
std::string format_training_log(const std::vector<EpochLog>& history);

}  // namespace chanprune
