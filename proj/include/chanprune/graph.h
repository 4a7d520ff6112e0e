#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <vector>

#include "chanprune/dataset.h"
#include "chanprune/network.h"
#include "chanprune/tensor.h"

namespace chanprune {

/// Everything a backward pass needs: the batch, every layer output and the
/// max-pool switches. Produced only by Graph::forward.
struct ForwardRecord {
  std::uint64_t graph_id = 0;  // 0: not produced by a forward pass
  double loss = 0.0;           // mean softmax cross-entropy over the batch
  Tensor input;
  std::vector<int> labels;
  std::vector<Tensor> outputs;  // one per layer, in layer order
  // Unrounded layer outputs; backward differentiates through these.
  std::vector<TensorD> exact_outputs;
  std::vector<std::vector<std::uint32_t>> pool_argmax;

  const Tensor& logits() const { return outputs.back(); }
};

struct GradRecord {
  WeightStore weight_grads;
  // Indexed by layer; for each weighted layer, dL/d(recorded activation),
  // i.e. the gradient at the output of activation_layer(layer).
  std::vector<Tensor> activation_grads;
};

/// One network instance: definition plus owned weights, evaluated in fixed
/// layer order. Parameters are float32; the activation and gradient chain
/// runs in double and is rounded to float only where it is recorded. Copying clones the weights and yields a new instance that
/// shares the forward-pass counter with its source.
///
/// An instance must not be evaluated from two threads at once; clones can.
class Graph {
 public:
  Graph(NetworkDef net, WeightStore weights);
  Graph(const Graph& other);
  Graph& operator=(const Graph& other);
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  const NetworkDef& net() const { return net_; }
  const WeightStore& weights() const { return weights_; }
  WeightStore& weights() { return weights_; }

  ForwardRecord forward(const Batch& batch) const;
  // Forward pass that keeps only what the result needs.
  double loss(const Batch& batch) const;
  Tensor logits(const Batch& batch) const;

  /// Exact reverse-mode gradients of record.loss with respect to every
  /// weight and every recorded channel activation. Throws std::logic_error
  /// when `record` did not come from forward() on this instance.
  GradRecord backward(const ForwardRecord& record) const;

  // Channel c's recorded activations, flattened per example: [N, positions].
  Tensor channel_activations(const ForwardRecord& record, ChannelId c) const;
  Tensor channel_activation_grads(const GradRecord& grads, ChannelId c) const;

  std::uint64_t id() const { return id_; }
  std::int64_t forward_passes() const { return passes_->load(); }
  void reset_forward_passes() { passes_->store(0); }

 private:
  void check_batch(const Batch& batch) const;
  std::vector<TensorD> run(const Tensor& input, bool keep_all,
                           std::vector<std::vector<std::uint32_t>>* argmax) const;

  NetworkDef net_;
  WeightStore weights_;
  std::uint64_t id_ = 0;
  std::shared_ptr<std::atomic<std::int64_t>> passes_;
};

}  // namespace chanprune
