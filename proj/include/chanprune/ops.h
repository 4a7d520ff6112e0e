#pragma once

// Forward and backward kernels. Parameters are always float32; activations
// and gradients may be float or double. Every reduction accumulates in
// double and rounds once on store, in a fixed loop order.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "chanprune/tensor.h"

namespace chanprune {

/// Cross-correlation of input [N,C,H,W] with weights [F,C,kh,kw] plus a
/// per-filter bias [F]. Output is [N,F,H',W'] with
/// H' = (H + 2*pad - kh) / stride + 1.
template <class T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const Tensor& weights, const Tensor& bias,
                              std::size_t stride, std::size_t pad);

template <class T>
struct Conv2dGradsT {
  BasicTensor<T> input;  // empty unless requested
  Tensor weights;
  Tensor bias;
};
using Conv2dGrads = Conv2dGradsT<float>;

template <class T>
Conv2dGradsT<T> conv2d_backward(const BasicTensor<T>& input, const Tensor& weights,
                                const BasicTensor<T>& grad_output, std::size_t stride, std::size_t pad,
                                bool want_input_grad);

/// Fully connected layer. The input's leading extent is the batch; the rest
/// is flattened row-major. weights is [U,K], bias is [U]; output is [N,U].
template <class T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const Tensor& weights, const Tensor& bias);

template <class T>
struct DenseGradsT {
  BasicTensor<T> input;  // same shape as the forward input; empty unless requested
  Tensor weights;
  Tensor bias;
};
using DenseGrads = DenseGradsT<float>;

template <class T>
DenseGradsT<T> dense_backward(const BasicTensor<T>& input, const Tensor& weights,
                              const BasicTensor<T>& grad_output, bool want_input_grad);

template <class T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input);
// Gradient is zero wherever the forward input was <= 0.
template <class T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output);

template <class T>
struct MaxPoolResultT {
  BasicTensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};
using MaxPoolResult = MaxPoolResultT<float>;

// Window `size`, step `stride`, no padding. Ties resolve to the first
// element in row-major window order.
template <class T>
MaxPoolResultT<T> maxpool_forward(const BasicTensor<T>& input, std::size_t size, std::size_t stride);
template <class T>
BasicTensor<T> maxpool_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax,
                                const BasicTensor<T>& grad_output);

/// Mean softmax cross-entropy of logits [N,K] against labels.
template <class T>
double softmax_xent_forward(const BasicTensor<T>& logits, std::span<const int> labels);
/// Gradient of the mean loss with respect to the logits.
template <class T>
BasicTensor<T> softmax_xent_backward(const BasicTensor<T>& logits, std::span<const int> labels);

// Index of the largest logit per row; ties go to the lowest index.
template <class T>
std::vector<int> argmax_rows(const BasicTensor<T>& logits);

}  // namespace chanprune
