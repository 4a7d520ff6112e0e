#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "chanprune/dataset.h"
#include "chanprune/graph.h"
#include "chanprune/network.h"

namespace chanprune {

enum class MetricKind { MeanSqWeights, MeanActivations, AvgGradients, Taylor1, Fisher2 };

// Canonical order, used for reporting.
inline constexpr std::array<MetricKind, 5> kAllMetrics = {
    MetricKind::MeanSqWeights, MetricKind::MeanActivations, MetricKind::AvgGradients,
    MetricKind::Taylor1, MetricKind::Fisher2};

std::string_view metric_name(MetricKind m);  // CLI spelling, e.g. "taylor1"
std::optional<MetricKind> parse_metric(std::string_view name);
bool needs_activations(MetricKind m);

/// Running sums over every element of a channel's activations A_c and the
/// matching gradients dL/da, across all positions, images and batches.
struct ActivationStats {
  double sum_a = 0.0;
  double sum_g = 0.0;
  double sum_ag = 0.0;
  std::size_t count = 0;

  void add(std::span<const float> activations, std::span<const float> grads);
};

// S_c = sum(w^2) / |W_c|. Zero for an empty subset.
double mean_sq_weights(std::span<const float> weights);
// Over channel c's own filter weights and bias.
double mean_sq_weights(const NetworkDef& net, const WeightStore& weights, ChannelId c);
// S_c = sum(a) / |A_c|
double mean_activations(const ActivationStats& s);
// S_c = |sum(dL/da)| / |A_c|
double avg_gradients(const ActivationStats& s);
// S_c = |sum(a * dL/da)| / |A_c|
double taylor_first(const ActivationStats& s);
// S_c = (sum(a * dL/da))^2 / 2
double fisher_second(const ActivationStats& s);

/// One forward and backward pass per validation batch, accumulated for every
/// requested channel. The mean batch loss is L(theta, I_val) for free.
struct ActivationPass {
  std::map<ChannelId, ActivationStats> stats;
  double mean_loss = 0.0;
};

ActivationPass accumulate_activations(const Graph& graph, const ValidationSample& sample,
                                      std::span<const ChannelId> channels);

struct SaliencyVector {
  MetricKind metric = MetricKind::MeanSqWeights;
  std::map<ChannelId, double> scores;  // lower = prune first
  std::uint64_t sample_seed = 0;
};

// Conv channels whose parameter set still has a nonzero entry.
std::vector<ChannelId> unpruned_channels(const NetworkDef& net, const WeightStore& weights);

/// Scores for every channel in `channels`. `pass` is required for every
/// metric except MeanSqWeights. Throws std::invalid_argument on an empty set.
SaliencyVector compute_saliency(MetricKind metric, const Graph& graph,
                                std::span<const ChannelId> channels, const ActivationPass* pass,
                                std::uint64_t sample_seed = 0);

/// Ascending score, ties by (layer, channel).
std::vector<ChannelId> rank_channels(const SaliencyVector& saliency);

/// Convenience: scores the currently unpruned channels and ranks them.
std::vector<ChannelId> rank_channels(MetricKind metric, const Graph& graph,
                                     const ValidationSample& sample);

}  // namespace chanprune
