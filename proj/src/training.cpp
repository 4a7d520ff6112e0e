#include "chanprune/training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "chanprune/errors.h"
#include "chanprune/ops.h"

namespace chanprune {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.lr must be a finite value >= 0");
  }
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train.momentum must be in [0,1)");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (lr_decay_factor <= 0.0) throw ConfigError("train.lr_decay_factor must be > 0");
}

void sgd_momentum_update(std::span<float> params, std::span<const float> grads,
                         std::span<float> velocity, double learning_rate, double momentum,
                         double weight_decay) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw ShapeError("sgd_momentum_update: parameter, gradient and velocity sizes differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]) + weight_decay * params[i];
    const double v = momentum * velocity[i] - learning_rate * g;
    velocity[i] = static_cast<float>(v);
    params[i] = static_cast<float>(params[i] + v);
  }
}

TrainResult train(const NetworkDef& net, const DatasetSplits& splits, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  return train_from(Graph(net, init_weights(net, cfg.seed)), splits, cfg, on_epoch);
}

TrainResult train_from(Graph graph, const DatasetSplits& splits, const TrainConfig& cfg,
                       const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (splits.train.size() == 0) throw std::invalid_argument("train: empty training split");

  WeightStore velocity = graph.weights();
  for (LayerParams& p : velocity.layers) {
    p.weight.fill(0.0f);
    p.bias.fill(0.0f);
  }
  // Offset so the shuffle stream differs from the initialisation stream.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(splits.train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  double lr = cfg.learning_rate;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.lr_decay_every > 0 && epoch > 1 && (epoch - 1) % cfg.lr_decay_every == 0) {
      lr *= cfg.lr_decay_factor;
    }
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const Batch batch = make_batch(
          splits.train, std::span<const std::size_t>(order).subspan(start, end - start));
      const ForwardRecord rec = graph.forward(batch);
      if (!std::isfinite(rec.loss)) {
        throw DivergenceError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(batches));
      }
      const GradRecord grads = graph.backward(rec);
      WeightStore& w = graph.weights();
      for (std::size_t i = 0; i < w.layers.size(); ++i) {
        if (!is_weighted(w.layers[i].kind)) continue;
        sgd_momentum_update(w.layers[i].weight.values(), grads.weight_grads.layers[i].weight.values(),
                            velocity.layers[i].weight.values(), lr, cfg.momentum, cfg.weight_decay);
        sgd_momentum_update(w.layers[i].bias.values(), grads.weight_grads.layers[i].bias.values(),
                            velocity.layers[i].bias.values(), lr, cfg.momentum, 0.0);
      }
      loss_sum += rec.loss;
      ++batches;
    }
    EpochLog log{epoch, loss_sum / static_cast<double>(batches),
                 splits.test.size() > 0 ? evaluate_top1(graph, splits.test) : 0.0, lr};
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  if (result.history.size() >= 3) {
    const double a = result.history[result.history.size() - 3].train_loss;
    const double b = result.history.back().train_loss;
    result.plateaued = std::abs(a - b) <= std::max(0.02 * std::abs(a), 1e-3);
  }
  result.weights = graph.weights();
  return result;
}

std::size_t count_correct(const Graph& graph, const Dataset& data, std::size_t batch_size) {
  std::size_t correct = 0;
  for (const Batch& b : make_batches(data, batch_size)) {
    const std::vector<int> pred = argmax_rows(graph.logits(b));
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == b.labels[i];
  }
  return correct;
}

double evaluate_top1(const Graph& graph, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw std::invalid_argument("evaluate_top1: empty test set");
  return static_cast<double>(count_correct(graph, data, batch_size)) / static_cast<double>(data.size());
}

std::string format_training_log(const std::vector<EpochLog>& history) {
  std::string out = "# epoch train_loss test_acc lr\n";
  char line[128];
  for (const EpochLog& e : history) {
    std::snprintf(line, sizeof line, "%zu %.6f %.6f %.6g\n", e.epoch, e.train_loss, e.test_acc,
                  e.learning_rate);
    out += line;
  }
  return out;
}

}  // namespace chanprune
