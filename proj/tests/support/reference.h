#pragma once

// Slow double-precision re-implementation of a sequential network, written
// with plain index loops and no engine kernels. Tests use it as an oracle
// for losses, finite differences and activation statistics.

#include <cstddef>
#include <random>
#include <vector>

#include "chanprune/dataset.h"
#include "chanprune/network.h"

namespace ref {

struct Params {
  std::vector<std::vector<double>> w;  // per layer, empty when unweighted
  std::vector<std::vector<double>> b;
};

Params to_params(const chanprune::WeightStore& store);

struct Trace {
  std::size_t n = 0;
  std::vector<std::vector<double>> out;  // per layer, [n][per-example size]
  double loss = 0.0;
  // Distance of the nearest ReLU input to 0 and the smallest gap between the
  // two largest entries of any pooling window. Finite differences across a
  // kink are meaningless, so callers reject instances with small margins.
  double relu_margin = 1e300;
  double pool_gap = 1e300;
};

struct Grads {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;
  std::vector<std::vector<double>> out;  // dL/d(output of layer)
};

// Per-example {C,H,W} (or {U}) after each layer, computed independently.
std::vector<std::vector<std::size_t>> shapes(const chanprune::NetworkDef& net);

Trace forward(const chanprune::NetworkDef& net, const Params& p, const std::vector<double>& input,
              const std::vector<int>& labels);
double loss(const chanprune::NetworkDef& net, const Params& p, const std::vector<double>& input,
            const std::vector<int>& labels);
Grads backward(const chanprune::NetworkDef& net, const Params& p, const Trace& t,
               const std::vector<double>& input, const std::vector<int>& labels);

std::vector<double> to_double(const chanprune::Tensor& t);

// Sums over every element of a channel's recorded activations/gradients,
// walked one flat index at a time.
struct ChannelSums {
  double a = 0.0, g = 0.0, ag = 0.0;
  std::size_t count = 0;
};

double eq_mean_sq_weights(const std::vector<double>& filter_and_bias);
double eq_mean_activations(const ChannelSums& s);
double eq_avg_gradients(const ChannelSums& s);
double eq_taylor1(const ChannelSums& s);
double eq_fisher2(const ChannelSums& s);

// Random sequential net with 1-3 conv layers and at most `max_params`
// parameters; input is small so forward/backward stay cheap.
chanprune::NetworkDef random_net(std::mt19937_64& rng, std::size_t max_params = 5000);

chanprune::Batch random_batch(std::mt19937_64& rng, const chanprune::NetworkDef& net, std::size_t n);

// Gaussian weights and biases; `scale` multiplies the He standard deviation.
chanprune::WeightStore random_weights(std::mt19937_64& rng, const chanprune::NetworkDef& net,
                                      double scale = 1.0);

}  // namespace ref
