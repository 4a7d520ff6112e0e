#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "chanprune/tensor.h"

namespace chanprune {

enum class LayerKind { Conv, Dense, Relu, MaxPool };

std::string_view layer_kind_name(LayerKind kind);
bool is_weighted(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::size_t outputs = 0;  // filters (conv) or units (dense)
  std::size_t kernel = 0;   // conv kernel or pool window
  std::size_t stride = 1;
  std::size_t pad = 0;

  static LayerSpec conv(std::size_t filters, std::size_t kernel, std::size_t stride = 1,
                        std::size_t pad = 0);
  static LayerSpec dense(std::size_t units);
  static LayerSpec relu();
  static LayerSpec maxpool(std::size_t size, std::size_t stride);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Sequential network. The last layer must be a dense classifier with
/// num_classes units; a softmax cross-entropy head is implied after it.
struct NetworkDef {
  std::string name;
  Shape input;  // {C, H, W}
  std::size_t num_classes = 0;
  std::vector<LayerSpec> layers;

  friend bool operator==(const NetworkDef&, const NetworkDef&) = default;
};

// Throws ShapeError describing the first incompatibility.
void validate(const NetworkDef& net);

/// Per-example output shape of every layer ({C,H,W} for spatial layers,
/// {U} for dense layers).
std::vector<Shape> layer_output_shapes(const NetworkDef& net);

std::size_t final_layer(const NetworkDef& net);

/// Layer whose output holds the recorded activations of weighted layer
/// `layer`: the ReLU directly after it when present, else the layer itself.
std::size_t activation_layer(const NetworkDef& net, std::size_t layer);

struct LayerParams {
  LayerKind kind = LayerKind::Relu;
  Tensor weight;  // empty for unweighted layers
  Tensor bias;
};

/// All parameters of a network, indexed by layer. Copying is a full clone.
struct WeightStore {
  std::vector<LayerParams> layers;

  std::size_t parameter_count() const;
  std::size_t count_nonzero() const;
};

bool bit_equal(const WeightStore& a, const WeightStore& b);

// He-normal weights and zero biases, deterministic in seed.
WeightStore init_weights(const NetworkDef& net, std::uint64_t seed);

enum class ParamKind { Weight, Bias };

struct ParamRef {
  std::size_t layer = 0;
  ParamKind kind = ParamKind::Weight;

  friend auto operator<=>(const ParamRef&, const ParamRef&) = default;
};

const Tensor& param(const WeightStore& store, ParamRef ref);
Tensor& param(WeightStore& store, ParamRef ref);

/// Output channel of a conv (or dense) layer. Orders by (layer, channel).
struct ChannelId {
  std::size_t layer = 0;
  std::size_t channel = 0;

  friend auto operator<=>(const ChannelId&, const ChannelId&) = default;
};

std::string to_string(ChannelId c);

/// Half-open flat index range [begin, end) inside one parameter tensor.
struct ParamSlice {
  ParamRef tensor;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
};

/// Every parameter that must go to remove a channel and keep the network
/// dense: the channel's filter and bias, plus the input-channel slice of the
/// next weighted layer.
struct ChannelParamSet {
  ChannelId owner;
  std::vector<ParamSlice> slices;

  std::size_t size() const;
};

/// All conv output channels, in (layer, channel) order.
std::vector<ChannelId> enumerate_channels(const NetworkDef& net);

ChannelParamSet channel_param_set(const NetworkDef& net, ChannelId c);

// The own-layer slices of a channel (filter weights, then bias).
std::vector<ParamSlice> own_slices(const NetworkDef& net, ChannelId c);

void zero_channel(WeightStore& store, const ChannelParamSet& pset);
bool is_channel_nonzero(const WeightStore& store, const ChannelParamSet& pset);

struct ConvWeightStats {
  std::size_t total_conv_weights = 0;
  std::size_t nonzero_conv_weights = 0;
  double removed_pct = 0.0;
};

// Conv weight tensors only; biases and dense layers are excluded.
ConvWeightStats conv_weight_stats(const WeightStore& store);

/// Built-in architectures for desk-scale experiments.
///   toy-a:  conv8-pool-conv12-pool-dense           (20 channels)
///   toy-b:  conv6(5x5)-pool-conv10-pool-conv12-dense (28 channels)
///   toy-s:  conv4-pool-conv6-dense                  (10 channels)
///   lenet5: conv6(5x5)-pool-conv16(5x5)-pool-dense120-dense84-dense
NetworkDef make_architecture(std::string_view id, const Shape& input, std::size_t num_classes);
std::vector<std::string> architecture_ids();

}  // namespace chanprune
