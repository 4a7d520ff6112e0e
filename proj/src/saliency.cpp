#include "chanprune/saliency.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace chanprune {

std::string_view metric_name(MetricKind m) {
  switch (m) {
    case MetricKind::MeanSqWeights: return "mean-sq-weights";
    case MetricKind::MeanActivations: return "mean-activations";
    case MetricKind::AvgGradients: return "avg-gradients";
    case MetricKind::Taylor1: return "taylor1";
    case MetricKind::Fisher2: return "fisher2";
  }
  return "?";
}

std::optional<MetricKind> parse_metric(std::string_view name) {
  for (MetricKind m : kAllMetrics) {
    if (metric_name(m) == name) return m;
  }
  return std::nullopt;
}

bool needs_activations(MetricKind m) { return m != MetricKind::MeanSqWeights; }

void ActivationStats::add(std::span<const float> activations, std::span<const float> grads) {
  if (activations.size() != grads.size()) {
    throw std::invalid_argument("ActivationStats::add: activation and gradient sizes differ");
  }
  for (std::size_t i = 0; i < activations.size(); ++i) {
    const double a = activations[i];
    const double g = grads[i];
    sum_a += a;
    sum_g += g;
    sum_ag += a * g;
  }
  count += activations.size();
}

double mean_sq_weights(std::span<const float> weights) {
  if (weights.empty()) return 0.0;
  double s = 0.0;
  for (float w : weights) s += static_cast<double>(w) * w;
  return s / static_cast<double>(weights.size());
}

double mean_sq_weights(const NetworkDef& net, const WeightStore& weights, ChannelId c) {
  double s = 0.0;
  std::size_t n = 0;
  for (const ParamSlice& slice : own_slices(net, c)) {
    const Tensor& t = param(weights, slice.tensor);
    for (std::size_t i = slice.begin; i < slice.end; ++i) s += static_cast<double>(t[i]) * t[i];
    n += slice.size();
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

namespace {

double per_element(double total, std::size_t count) {
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace

double mean_activations(const ActivationStats& s) { return per_element(s.sum_a, s.count); }
double avg_gradients(const ActivationStats& s) { return per_element(std::abs(s.sum_g), s.count); }
double taylor_first(const ActivationStats& s) { return per_element(std::abs(s.sum_ag), s.count); }
double fisher_second(const ActivationStats& s) { return 0.5 * s.sum_ag * s.sum_ag; }

ActivationPass accumulate_activations(const Graph& graph, const ValidationSample& sample,
                                      std::span<const ChannelId> channels) {
  if (sample.batches.empty()) throw std::invalid_argument("accumulate_activations: empty validation sample");
  const NetworkDef& net = graph.net();
  ActivationPass pass;
  for (ChannelId c : channels) pass.stats[c];
  double loss_sum = 0.0;
  for (const Batch& batch : sample.batches) {
    const ForwardRecord rec = graph.forward(batch);
    const GradRecord grads = graph.backward(rec);
    loss_sum += rec.loss;
    for (auto& [c, stats] : pass.stats) {
      const Tensor& acts = rec.outputs[activation_layer(net, c.layer)];
      const Tensor& g = grads.activation_grads[c.layer];
      const std::size_t n = acts.dim(0);
      const std::size_t ch = acts.dim(1);
      const std::size_t positions = acts.size() / (n * ch);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = (i * ch + c.channel) * positions;
        stats.add(acts.values().subspan(off, positions), g.values().subspan(off, positions));
      }
    }
  }
  pass.mean_loss = loss_sum / static_cast<double>(sample.batches.size());
  return pass;
}

std::vector<ChannelId> unpruned_channels(const NetworkDef& net, const WeightStore& weights) {
  std::vector<ChannelId> out;
  for (ChannelId c : enumerate_channels(net)) {
    if (is_channel_nonzero(weights, channel_param_set(net, c))) out.push_back(c);
  }
  return out;
}

SaliencyVector compute_saliency(MetricKind metric, const Graph& graph,
                                std::span<const ChannelId> channels, const ActivationPass* pass,
                                std::uint64_t sample_seed) {
  if (channels.empty()) throw std::invalid_argument("compute_saliency: empty channel set");
  if (needs_activations(metric) && pass == nullptr) {
    throw std::invalid_argument(std::string("compute_saliency: ") + std::string(metric_name(metric)) +
                                " needs an activation pass");
  }
  SaliencyVector sv{metric, {}, sample_seed};
  for (ChannelId c : channels) {
    double s = 0.0;
    if (metric == MetricKind::MeanSqWeights) {
      s = mean_sq_weights(graph.net(), graph.weights(), c);
    } else {
      const auto it = pass->stats.find(c);
      if (it == pass->stats.end()) {
        throw std::invalid_argument("compute_saliency: no activations recorded for " + to_string(c));
      }
      switch (metric) {
        case MetricKind::MeanActivations: s = mean_activations(it->second); break;
        case MetricKind::AvgGradients: s = avg_gradients(it->second); break;
        case MetricKind::Taylor1: s = taylor_first(it->second); break;
        case MetricKind::Fisher2: s = fisher_second(it->second); break;
        case MetricKind::MeanSqWeights: break;
      }
    }
    sv.scores[c] = s;
  }
  return sv;
}

std::vector<ChannelId> rank_channels(const SaliencyVector& saliency) {
  std::vector<std::pair<double, ChannelId>> items;
  for (const auto& [c, s] : saliency.scores) items.emplace_back(s, c);
  // map iteration is already (layer, channel) ordered; stable sort keeps that on ties
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<ChannelId> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.second);
  return out;
}

std::vector<ChannelId> rank_channels(MetricKind metric, const Graph& graph,
                                     const ValidationSample& sample) {
  const std::vector<ChannelId> live = unpruned_channels(graph.net(), graph.weights());
  if (live.empty()) return {};
  std::optional<ActivationPass> pass;
  if (needs_activations(metric)) pass = accumulate_activations(graph, sample, live);
  return rank_channels(compute_saliency(metric, graph, live, pass ? &*pass : nullptr, sample.seed));
}

}  // namespace chanprune
