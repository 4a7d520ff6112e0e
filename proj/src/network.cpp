#include "chanprune/network.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "chanprune/errors.h"

namespace chanprune {

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Dense: return "dense";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
  }
  return "?";
}

bool is_weighted(LayerKind kind) { return kind == LayerKind::Conv || kind == LayerKind::Dense; }

LayerSpec LayerSpec::conv(std::size_t filters, std::size_t kernel, std::size_t stride,
                          std::size_t pad) {
  return {LayerKind::Conv, filters, kernel, stride, pad};
}
LayerSpec LayerSpec::dense(std::size_t units) { return {LayerKind::Dense, units, 0, 1, 0}; }
LayerSpec LayerSpec::relu() { return {LayerKind::Relu, 0, 0, 1, 0}; }
LayerSpec LayerSpec::maxpool(std::size_t size, std::size_t stride) {
  return {LayerKind::MaxPool, 0, size, stride, 0};
}

namespace {

std::string where(std::size_t i, const LayerSpec& l) {
  return "layer " + std::to_string(i) + " (" + std::string(layer_kind_name(l.kind)) + ")";
}

// Shape propagation shared by validate() and layer_output_shapes().
std::vector<Shape> propagate(const NetworkDef& net) {
  if (net.input.size() != 3 || shape_numel(net.input) == 0) {
    throw ShapeError("network input must be {C,H,W} with positive extents, got " +
                     shape_str(net.input));
  }
  std::vector<Shape> shapes;
  Shape cur = net.input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    switch (l.kind) {
      case LayerKind::Conv: {
        if (cur.size() != 3) throw ShapeError(where(i, l) + " needs a spatial input, got " + shape_str(cur));
        if (l.outputs == 0 || l.kernel == 0 || l.stride == 0) {
          throw ShapeError(where(i, l) + " needs filters, kernel and stride >= 1");
        }
        if (cur[1] + 2 * l.pad < l.kernel || cur[2] + 2 * l.pad < l.kernel) {
          throw ShapeError(where(i, l) + " kernel " + std::to_string(l.kernel) +
                           " exceeds padded input " + shape_str(cur));
        }
        cur = {l.outputs, (cur[1] + 2 * l.pad - l.kernel) / l.stride + 1,
               (cur[2] + 2 * l.pad - l.kernel) / l.stride + 1};
        break;
      }
      case LayerKind::Dense:
        if (l.outputs == 0) throw ShapeError(where(i, l) + " needs units >= 1");
        cur = {l.outputs};
        break;
      case LayerKind::Relu:
        break;
      case LayerKind::MaxPool:
        if (cur.size() != 3) throw ShapeError(where(i, l) + " needs a spatial input, got " + shape_str(cur));
        if (l.kernel == 0 || l.stride == 0) throw ShapeError(where(i, l) + " needs size and stride >= 1");
        if (cur[1] < l.kernel || cur[2] < l.kernel) {
          throw ShapeError(where(i, l) + " window exceeds input " + shape_str(cur));
        }
        cur = {cur[0], (cur[1] - l.kernel) / l.stride + 1, (cur[2] - l.kernel) / l.stride + 1};
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

}  // namespace

void validate(const NetworkDef& net) {
  if (net.layers.empty()) throw ShapeError("network has no layers");
  if (net.num_classes < 2) throw ShapeError("network needs at least 2 classes");
  bool has_conv = false;
  for (const LayerSpec& l : net.layers) has_conv |= l.kind == LayerKind::Conv;
  if (!has_conv) throw ShapeError("network needs at least one conv layer");
  const LayerSpec& last = net.layers.back();
  if (last.kind != LayerKind::Dense || last.outputs != net.num_classes) {
    throw ShapeError("last layer must be dense with " + std::to_string(net.num_classes) + " units");
  }
  propagate(net);
}

std::vector<Shape> layer_output_shapes(const NetworkDef& net) { return propagate(net); }

std::size_t final_layer(const NetworkDef& net) { return net.layers.size() - 1; }

std::size_t activation_layer(const NetworkDef& net, std::size_t layer) {
  if (layer + 1 < net.layers.size() && net.layers[layer + 1].kind == LayerKind::Relu) {
    return layer + 1;
  }
  return layer;
}

std::size_t WeightStore::parameter_count() const {
  std::size_t n = 0;
  for (const LayerParams& p : layers) n += p.weight.size() + p.bias.size();
  return n;
}

std::size_t WeightStore::count_nonzero() const {
  std::size_t n = 0;
  for (const LayerParams& p : layers) {
    for (float v : p.weight.values()) n += v != 0.0f;
    for (float v : p.bias.values()) n += v != 0.0f;
  }
  return n;
}

bool bit_equal(const WeightStore& a, const WeightStore& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].kind != b.layers[i].kind) return false;
    if (!bit_equal(a.layers[i].weight, b.layers[i].weight)) return false;
    if (!bit_equal(a.layers[i].bias, b.layers[i].bias)) return false;
  }
  return true;
}

WeightStore init_weights(const NetworkDef& net, std::uint64_t seed) {
  validate(net);
  const std::vector<Shape> shapes = layer_output_shapes(net);
  std::mt19937_64 rng(seed);
  WeightStore store;
  Shape in = net.input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    LayerParams p;
    p.kind = l.kind;
    if (l.kind == LayerKind::Conv) {
      p.weight = Tensor({l.outputs, in[0], l.kernel, l.kernel});
    } else if (l.kind == LayerKind::Dense) {
      p.weight = Tensor({l.outputs, shape_numel(in)});
    }
    if (is_weighted(l.kind)) {
      const std::size_t fan_in = p.weight.size() / l.outputs;
      std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
      for (float& w : p.weight.values()) w = dist(rng);
      p.bias = Tensor({l.outputs});
    }
    store.layers.push_back(std::move(p));
    in = shapes[i];
  }
  return store;
}

const Tensor& param(const WeightStore& store, ParamRef ref) {
  const LayerParams& p = store.layers.at(ref.layer);
  return ref.kind == ParamKind::Weight ? p.weight : p.bias;
}

Tensor& param(WeightStore& store, ParamRef ref) {
  LayerParams& p = store.layers.at(ref.layer);
  return ref.kind == ParamKind::Weight ? p.weight : p.bias;
}

std::string to_string(ChannelId c) {
  return "(" + std::to_string(c.layer) + "," + std::to_string(c.channel) + ")";
}

std::size_t ChannelParamSet::size() const {
  std::size_t n = 0;
  for (const ParamSlice& s : slices) n += s.size();
  return n;
}

std::vector<ChannelId> enumerate_channels(const NetworkDef& net) {
  std::vector<ChannelId> out;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].kind != LayerKind::Conv) continue;
    for (std::size_t c = 0; c < net.layers[i].outputs; ++c) out.push_back({i, c});
  }
  return out;
}

namespace {

void check_prunable(const NetworkDef& net, ChannelId c) {
  if (c.layer >= net.layers.size() || !is_weighted(net.layers[c.layer].kind)) {
    throw std::invalid_argument("channel " + to_string(c) + " is not an output of a conv or dense layer");
  }
  if (c.layer == final_layer(net)) {
    throw std::invalid_argument("channel " + to_string(c) +
                                " belongs to the final classifier; pruning it would remove a class");
  }
  if (c.channel >= net.layers[c.layer].outputs) {
    throw std::invalid_argument("channel " + to_string(c) + " out of range for layer with " +
                                std::to_string(net.layers[c.layer].outputs) + " outputs");
  }
}

}  // namespace

std::vector<ParamSlice> own_slices(const NetworkDef& net, ChannelId c) {
  check_prunable(net, c);
  const std::vector<Shape> shapes = layer_output_shapes(net);
  const Shape& in = c.layer == 0 ? net.input : shapes[c.layer - 1];
  const LayerSpec& l = net.layers[c.layer];
  const std::size_t per_filter =
      l.kind == LayerKind::Conv ? in[0] * l.kernel * l.kernel : shape_numel(in);
  return {
      {{c.layer, ParamKind::Weight}, c.channel * per_filter, (c.channel + 1) * per_filter},
      {{c.layer, ParamKind::Bias}, c.channel, c.channel + 1},
  };
}

ChannelParamSet channel_param_set(const NetworkDef& net, ChannelId c) {
  ChannelParamSet pset{c, own_slices(net, c)};
  const std::vector<Shape> shapes = layer_output_shapes(net);

  std::size_t next = c.layer + 1;
  while (next < net.layers.size() && !is_weighted(net.layers[next].kind)) ++next;
  // validate() guarantees a final dense layer, and c is not in it.
  const LayerSpec& consumer = net.layers[next];
  const Shape& fed = shapes[next - 1];  // what the consumer sees, per example
  const std::size_t channels = fed[0];
  if (consumer.kind == LayerKind::Conv) {
    const std::size_t kk = consumer.kernel * consumer.kernel;
    for (std::size_t f = 0; f < consumer.outputs; ++f) {
      const std::size_t begin = (f * channels + c.channel) * kk;
      pset.slices.push_back({{next, ParamKind::Weight}, begin, begin + kk});
    }
  } else {
    const std::size_t features = shape_numel(fed);
    const std::size_t per_channel = features / channels;
    for (std::size_t u = 0; u < consumer.outputs; ++u) {
      const std::size_t begin = u * features + c.channel * per_channel;
      pset.slices.push_back({{next, ParamKind::Weight}, begin, begin + per_channel});
    }
  }
  return pset;
}

void zero_channel(WeightStore& store, const ChannelParamSet& pset) {
  for (const ParamSlice& s : pset.slices) {
    Tensor& t = param(store, s.tensor);
    std::fill(t.data() + s.begin, t.data() + s.end, 0.0f);
  }
}

bool is_channel_nonzero(const WeightStore& store, const ChannelParamSet& pset) {
  for (const ParamSlice& s : pset.slices) {
    const Tensor& t = param(store, s.tensor);
    for (std::size_t i = s.begin; i < s.end; ++i) {
      if (t[i] != 0.0f) return true;
    }
  }
  return false;
}

ConvWeightStats conv_weight_stats(const WeightStore& store) {
  ConvWeightStats s;
  for (const LayerParams& p : store.layers) {
    if (p.kind != LayerKind::Conv) continue;
    s.total_conv_weights += p.weight.size();
    for (float v : p.weight.values()) s.nonzero_conv_weights += v != 0.0f;
  }
  if (s.total_conv_weights > 0) {
    s.removed_pct = 100.0 * (1.0 - static_cast<double>(s.nonzero_conv_weights) /
                                       static_cast<double>(s.total_conv_weights));
  }
  return s;
}

NetworkDef make_architecture(std::string_view id, const Shape& input, std::size_t num_classes) {
  NetworkDef net{std::string(id), input, num_classes, {}};
  using L = LayerSpec;
  if (id == "toy-a") {
    net.layers = {L::conv(8, 3, 1, 1), L::relu(), L::maxpool(2, 2),
                  L::conv(12, 3, 1, 1), L::relu(), L::maxpool(2, 2),
                  L::dense(num_classes)};
  } else if (id == "toy-b") {
    net.layers = {L::conv(6, 5, 1, 2), L::relu(), L::maxpool(2, 2),
                  L::conv(10, 3, 1, 1), L::relu(), L::maxpool(2, 2),
                  L::conv(12, 3, 1, 1), L::relu(),
                  L::dense(num_classes)};
  } else if (id == "toy-s") {
    net.layers = {L::conv(4, 3, 1, 1), L::relu(), L::maxpool(2, 2),
                  L::conv(6, 3, 1, 1), L::relu(), L::maxpool(2, 2),
                  L::dense(num_classes)};
  } else if (id == "lenet5") {
    net.layers = {L::conv(6, 5), L::relu(), L::maxpool(2, 2),
                  L::conv(16, 5), L::relu(), L::maxpool(2, 2),
                  L::dense(120), L::relu(), L::dense(84), L::relu(),
                  L::dense(num_classes)};
  } else {
    std::string known;
    for (const std::string& a : architecture_ids()) known += (known.empty() ? "" : ", ") + a;
    throw ConfigError("unknown architecture '" + std::string(id) + "' (known: " + known + ")");
  }
  validate(net);
  return net;
}

std::vector<std::string> architecture_ids() { return {"toy-a", "toy-b", "toy-s", "lenet5"}; }

}  // namespace chanprune
