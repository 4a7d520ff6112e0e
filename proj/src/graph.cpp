#include "chanprune/graph.h"

#include <stdexcept>

#include "chanprune/errors.h"
#include "chanprune/ops.h"

namespace chanprune {

namespace {

std::uint64_t next_graph_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

Tensor slice_channel(const Tensor& t, std::size_t channel) {
  const std::size_t n = t.dim(0);
  const std::size_t channels = t.dim(1);
  const std::size_t positions = t.size() / (n * channels);
  Tensor out({n, positions});
  for (std::size_t i = 0; i < n; ++i) {
    const float* src = t.data() + (i * channels + channel) * positions;
    std::copy(src, src + positions, out.data() + i * positions);
  }
  return out;
}

}  // namespace

Graph::Graph(NetworkDef net, WeightStore weights)
    : net_(std::move(net)),
      weights_(std::move(weights)),
      id_(next_graph_id()),
      passes_(std::make_shared<std::atomic<std::int64_t>>(0)) {
  validate(net_);
  if (weights_.layers.size() != net_.layers.size()) {
    throw ShapeError("weight store has " + std::to_string(weights_.layers.size()) +
                     " layers, network has " + std::to_string(net_.layers.size()));
  }
  const std::vector<Shape> shapes = layer_output_shapes(net_);
  Shape in = net_.input;
  for (std::size_t i = 0; i < net_.layers.size(); ++i) {
    const LayerSpec& l = net_.layers[i];
    const LayerParams& p = weights_.layers[i];
    Shape want_w, want_b;
    if (l.kind == LayerKind::Conv) {
      want_w = {l.outputs, in[0], l.kernel, l.kernel};
      want_b = {l.outputs};
    } else if (l.kind == LayerKind::Dense) {
      want_w = {l.outputs, shape_numel(in)};
      want_b = {l.outputs};
    }
    if (p.kind != l.kind || p.weight.shape() != want_w || p.bias.shape() != want_b) {
      throw ShapeError("layer " + std::to_string(i) + " expects weights " + shape_str(want_w) +
                       " and bias " + shape_str(want_b) + ", got " + shape_str(p.weight.shape()) +
                       " and " + shape_str(p.bias.shape()));
    }
    in = shapes[i];
  }
}

Graph::Graph(const Graph& other)
    : net_(other.net_), weights_(other.weights_), id_(next_graph_id()), passes_(other.passes_) {}

Graph& Graph::operator=(const Graph& other) {
  if (this != &other) {
    net_ = other.net_;
    weights_ = other.weights_;
    id_ = next_graph_id();
    passes_ = other.passes_;
  }
  return *this;
}

void Graph::check_batch(const Batch& batch) const {
  const Shape& s = batch.images.shape();
  if (s.size() != 4 || Shape(s.begin() + 1, s.end()) != net_.input) {
    throw ShapeError("batch images " + shape_str(s) + " do not match network input " +
                     shape_str(net_.input));
  }
  if (batch.labels.size() != s[0]) throw ShapeError("batch label count does not match image count");
}

std::vector<TensorD> Graph::run(const Tensor& input, bool keep_all,
                                std::vector<std::vector<std::uint32_t>>* argmax) const {
  passes_->fetch_add(1);
  std::vector<TensorD> outputs;
  if (argmax) argmax->assign(net_.layers.size(), {});
  TensorD cur = widen(input);
  for (std::size_t i = 0; i < net_.layers.size(); ++i) {
    const LayerSpec& l = net_.layers[i];
    const LayerParams& p = weights_.layers[i];
    switch (l.kind) {
      case LayerKind::Conv:
        cur = conv2d_forward(cur, p.weight, p.bias, l.stride, l.pad);
        break;
      case LayerKind::Dense:
        cur = dense_forward(cur, p.weight, p.bias);
        break;
      case LayerKind::Relu:
        cur = relu_forward(cur);
        break;
      case LayerKind::MaxPool: {
        MaxPoolResultT<double> r = maxpool_forward(cur, l.kernel, l.stride);
        cur = std::move(r.output);
        if (argmax) (*argmax)[i] = std::move(r.argmax);
        break;
      }
    }
    if (keep_all) outputs.push_back(cur);
  }
  if (!keep_all) outputs.push_back(std::move(cur));
  return outputs;
}

ForwardRecord Graph::forward(const Batch& batch) const {
  check_batch(batch);
  ForwardRecord rec;
  rec.exact_outputs = run(batch.images, true, &rec.pool_argmax);
  rec.loss = softmax_xent_forward(rec.exact_outputs.back(), batch.labels);
  rec.outputs.reserve(rec.exact_outputs.size());
  for (const TensorD& t : rec.exact_outputs) rec.outputs.push_back(narrow(t));
  rec.input = batch.images;
  rec.labels = batch.labels;
  rec.graph_id = id_;
  return rec;
}

double Graph::loss(const Batch& batch) const {
  check_batch(batch);
  const std::vector<TensorD> out = run(batch.images, false, nullptr);
  return softmax_xent_forward(out.back(), batch.labels);
}

Tensor Graph::logits(const Batch& batch) const {
  check_batch(batch);
  return narrow(run(batch.images, false, nullptr).back());
}

GradRecord Graph::backward(const ForwardRecord& record) const {
  if (record.graph_id == 0) throw std::logic_error("backward called without a forward record");
  if (record.graph_id != id_) {
    throw std::logic_error("forward record belongs to a different graph instance");
  }
  const std::size_t n_layers = net_.layers.size();
  GradRecord g;
  g.weight_grads.layers.resize(n_layers);
  g.activation_grads.resize(n_layers);

  // layer index -> weighted layer whose activation it holds
  std::vector<std::ptrdiff_t> recorded_for(n_layers, -1);
  for (std::size_t i = 0; i < n_layers; ++i) {
    g.weight_grads.layers[i].kind = net_.layers[i].kind;
    if (is_weighted(net_.layers[i].kind)) recorded_for[activation_layer(net_, i)] = static_cast<std::ptrdiff_t>(i);
  }

  if (record.exact_outputs.size() != n_layers) {
    throw std::logic_error("forward record has no full-precision outputs");
  }
  const TensorD input = widen(record.input);
  TensorD grad = softmax_xent_backward(record.exact_outputs.back(), record.labels);
  for (std::size_t i = n_layers; i-- > 0;) {
    if (recorded_for[i] >= 0) g.activation_grads[recorded_for[i]] = narrow(grad);
    const LayerSpec& l = net_.layers[i];
    const TensorD& in = i == 0 ? input : record.exact_outputs[i - 1];
    const bool want_input = i > 0;
    switch (l.kind) {
      case LayerKind::Conv: {
        Conv2dGradsT<double> cg = conv2d_backward(in, weights_.layers[i].weight, grad, l.stride, l.pad, want_input);
        g.weight_grads.layers[i].weight = std::move(cg.weights);
        g.weight_grads.layers[i].bias = std::move(cg.bias);
        grad = std::move(cg.input);
        break;
      }
      case LayerKind::Dense: {
        DenseGradsT<double> dg = dense_backward(in, weights_.layers[i].weight, grad, want_input);
        g.weight_grads.layers[i].weight = std::move(dg.weights);
        g.weight_grads.layers[i].bias = std::move(dg.bias);
        grad = std::move(dg.input);
        break;
      }
      case LayerKind::Relu:
        grad = relu_backward(in, grad);
        break;
      case LayerKind::MaxPool:
        grad = maxpool_backward(in.shape(), record.pool_argmax[i], grad);
        break;
    }
  }
  return g;
}

Tensor Graph::channel_activations(const ForwardRecord& record, ChannelId c) const {
  if (c.layer >= net_.layers.size() || !is_weighted(net_.layers[c.layer].kind) ||
      c.channel >= net_.layers[c.layer].outputs) {
    throw std::invalid_argument("no recorded activations for channel " + to_string(c));
  }
  return slice_channel(record.outputs.at(activation_layer(net_, c.layer)), c.channel);
}

Tensor Graph::channel_activation_grads(const GradRecord& grads, ChannelId c) const {
  if (c.layer >= grads.activation_grads.size() || grads.activation_grads[c.layer].empty() ||
      c.channel >= net_.layers[c.layer].outputs) {
    throw std::invalid_argument("no activation gradients for channel " + to_string(c));
  }
  return slice_channel(grads.activation_grads[c.layer], c.channel);
}

}  // namespace chanprune
