#include "chanprune/ops.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "chanprune/errors.h"

namespace chanprune {

namespace {

struct ConvGeometry {
  std::size_t n, c, h, w;
  std::size_t f, kh, kw;
  std::size_t oh, ow;
};

template <class T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const Tensor& weights, std::size_t stride,
                           std::size_t pad) {
  if (input.rank() != 4 || weights.rank() != 4) {
    throw ShapeError("conv2d expects rank-4 input and weights, got input " +
                     shape_str(input.shape()) + " and weights " + shape_str(weights.shape()));
  }
  if (stride == 0) throw ShapeError("conv2d stride must be >= 1");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                 weights.dim(0), weights.dim(2), weights.dim(3), 0, 0};
  if (weights.dim(1) != g.c) {
    throw ShapeError("conv2d channel mismatch: input " + shape_str(input.shape()) +
                     " vs weights " + shape_str(weights.shape()));
  }
  if (g.h + 2 * pad < g.kh || g.w + 2 * pad < g.kw) {
    throw ShapeError("conv2d kernel larger than padded input: input " + shape_str(input.shape()) +
                     " vs weights " + shape_str(weights.shape()));
  }
  g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
  g.ow = (g.w + 2 * pad - g.kw) / stride + 1;
  return g;
}

// Output positions o in [lo, hi) whose input coordinate o*stride + k - pad
// lands inside [0, extent).
struct Span1d {
  std::size_t lo, hi;
};

Span1d valid_outputs(std::size_t k, std::size_t pad, std::size_t stride, std::size_t extent,
                     std::size_t out_extent) {
  std::size_t lo = 0;
  if (pad > k) lo = (pad - k + stride - 1) / stride;
  // need o*stride + k - pad <= extent - 1
  std::size_t hi = 0;
  if (extent + pad > k) hi = std::min(out_extent, (extent - 1 + pad - k) / stride + 1);
  if (hi < lo) hi = lo;
  return {lo, hi};
}

template <class T>
std::size_t batch_of(const BasicTensor<T>& t, const char* what) {
  if (t.rank() < 1 || t.empty()) throw ShapeError(std::string(what) + ": empty input");
  return t.dim(0);
}

}  // namespace

template <class T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const Tensor& weights, const Tensor& bias,
                              std::size_t stride, std::size_t pad) {
  const ConvGeometry g = conv_geometry(input, weights, stride, pad);
  if (bias.size() != g.f) {
    throw ShapeError("conv2d bias " + shape_str(bias.shape()) + " does not match weights " +
                     shape_str(weights.shape()));
  }
  BasicTensor<T> out({g.n, g.f, g.oh, g.ow});
  std::vector<double> acc(g.oh * g.ow);
  const T* in = input.data();
  const float* wt = weights.data();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t f = 0; f < g.f; ++f) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t c = 0; c < g.c; ++c) {
        const T* plane = in + ((n * g.c + c) * g.h) * g.w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const Span1d ys = valid_outputs(ky, pad, stride, g.h, g.oh);
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const Span1d xs = valid_outputs(kx, pad, stride, g.w, g.ow);
            const double w = wt[((f * g.c + c) * g.kh + ky) * g.kw + kx];
            for (std::size_t oy = ys.lo; oy < ys.hi; ++oy) {
              const T* row = plane + (oy * stride + ky - pad) * g.w;
              double* arow = acc.data() + oy * g.ow;
              for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) {
                arow[ox] += w * row[ox * stride + kx - pad];
              }
            }
          }
        }
      }
      T* dst = out.data() + (n * g.f + f) * g.oh * g.ow;
      const double b = bias[f];
      for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<T>(acc[i] + b);
    }
  }
  return out;
}

template <class T>
Conv2dGradsT<T> conv2d_backward(const BasicTensor<T>& input, const Tensor& weights,
                                const BasicTensor<T>& grad_output, std::size_t stride, std::size_t pad,
                                bool want_input_grad) {
  const ConvGeometry g = conv_geometry(input, weights, stride, pad);
  if (grad_output.shape() != Shape{g.n, g.f, g.oh, g.ow}) {
    throw ShapeError("conv2d_backward grad shape " + shape_str(grad_output.shape()) +
                     " does not match output " + shape_str({g.n, g.f, g.oh, g.ow}));
  }
  Conv2dGradsT<T> grads;
  grads.weights = Tensor(weights.shape());
  grads.bias = Tensor({g.f});
  const T* in = input.data();
  const T* go = grad_output.data();
  const float* wt = weights.data();
  const std::size_t plane_out = g.oh * g.ow;

  for (std::size_t f = 0; f < g.f; ++f) {
    double acc = 0.0;
    for (std::size_t n = 0; n < g.n; ++n) {
      const T* gp = go + (n * g.f + f) * plane_out;
      for (std::size_t i = 0; i < plane_out; ++i) acc += gp[i];
    }
    grads.bias[f] = static_cast<float>(acc);
  }

  for (std::size_t f = 0; f < g.f; ++f) {
    for (std::size_t c = 0; c < g.c; ++c) {
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const Span1d ys = valid_outputs(ky, pad, stride, g.h, g.oh);
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const Span1d xs = valid_outputs(kx, pad, stride, g.w, g.ow);
          double acc = 0.0;
          for (std::size_t n = 0; n < g.n; ++n) {
            const T* plane = in + ((n * g.c + c) * g.h) * g.w;
            const T* gp = go + (n * g.f + f) * plane_out;
            for (std::size_t oy = ys.lo; oy < ys.hi; ++oy) {
              const T* row = plane + (oy * stride + ky - pad) * g.w;
              const T* grow = gp + oy * g.ow;
              for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) {
                acc += static_cast<double>(grow[ox]) * row[ox * stride + kx - pad];
              }
            }
          }
          grads.weights[((f * g.c + c) * g.kh + ky) * g.kw + kx] = static_cast<float>(acc);
        }
      }
    }
  }

  if (want_input_grad) {
    grads.input = BasicTensor<T>(input.shape());
    std::vector<double> acc(g.c * g.h * g.w);
    for (std::size_t n = 0; n < g.n; ++n) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t f = 0; f < g.f; ++f) {
        const T* gp = go + (n * g.f + f) * plane_out;
        for (std::size_t c = 0; c < g.c; ++c) {
          double* aplane = acc.data() + c * g.h * g.w;
          for (std::size_t ky = 0; ky < g.kh; ++ky) {
            const Span1d ys = valid_outputs(ky, pad, stride, g.h, g.oh);
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
              const Span1d xs = valid_outputs(kx, pad, stride, g.w, g.ow);
              const double w = wt[((f * g.c + c) * g.kh + ky) * g.kw + kx];
              for (std::size_t oy = ys.lo; oy < ys.hi; ++oy) {
                double* arow = aplane + (oy * stride + ky - pad) * g.w;
                const T* grow = gp + oy * g.ow;
                for (std::size_t ox = xs.lo; ox < xs.hi; ++ox) {
                  arow[ox * stride + kx - pad] += w * grow[ox];
                }
              }
            }
          }
        }
      }
      T* dst = grads.input.data() + n * acc.size();
      for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<T>(acc[i]);
    }
  }
  return grads;
}

template <class T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const Tensor& weights, const Tensor& bias) {
  const std::size_t n = batch_of(input, "dense");
  const std::size_t k = input.size() / n;
  if (weights.rank() != 2 || weights.dim(1) != k) {
    throw ShapeError("dense shape mismatch: input " + shape_str(input.shape()) + " vs weights " +
                     shape_str(weights.shape()));
  }
  const std::size_t u = weights.dim(0);
  if (bias.size() != u) {
    throw ShapeError("dense bias " + shape_str(bias.shape()) + " does not match weights " +
                     shape_str(weights.shape()));
  }
  BasicTensor<T> out({n, u});
  for (std::size_t i = 0; i < n; ++i) {
    const T* x = input.data() + i * k;
    for (std::size_t j = 0; j < u; ++j) {
      const float* w = weights.data() + j * k;
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += static_cast<double>(w[t]) * x[t];
      out[i * u + j] = static_cast<T>(acc + bias[j]);
    }
  }
  return out;
}

template <class T>
DenseGradsT<T> dense_backward(const BasicTensor<T>& input, const Tensor& weights,
                              const BasicTensor<T>& grad_output, bool want_input_grad) {
  const std::size_t n = batch_of(input, "dense_backward");
  const std::size_t k = input.size() / n;
  const std::size_t u = weights.dim(0);
  if (grad_output.shape() != Shape{n, u}) {
    throw ShapeError("dense_backward grad shape " + shape_str(grad_output.shape()) +
                     " does not match output " + shape_str({n, u}));
  }
  DenseGradsT<T> grads;
  grads.weights = Tensor(weights.shape());
  grads.bias = Tensor({u});
  for (std::size_t j = 0; j < u; ++j) {
    double bacc = 0.0;
    for (std::size_t i = 0; i < n; ++i) bacc += grad_output[i * u + j];
    grads.bias[j] = static_cast<float>(bacc);
    for (std::size_t t = 0; t < k; ++t) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += static_cast<double>(grad_output[i * u + j]) * input[i * k + t];
      }
      grads.weights[j * k + t] = static_cast<float>(acc);
    }
  }
  if (want_input_grad) {
    grads.input = BasicTensor<T>(input.shape());
    std::vector<double> acc(k);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = 0; j < u; ++j) {
        const double g = grad_output[i * u + j];
        const float* w = weights.data() + j * k;
        for (std::size_t t = 0; t < k; ++t) acc[t] += g * w[t];
      }
      for (std::size_t t = 0; t < k; ++t) grads.input[i * k + t] = static_cast<T>(acc[t]);
    }
  }
  return grads;
}

template <class T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{0} ? input[i] : T{0};
  return out;
}

template <class T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output) {
  if (input.shape() != grad_output.shape()) {
    throw ShapeError("relu_backward shape mismatch: " + shape_str(input.shape()) + " vs " +
                     shape_str(grad_output.shape()));
  }
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] > T{0} ? grad_output[i] : T{0};
  }
  return out;
}

template <class T>
MaxPoolResultT<T> maxpool_forward(const BasicTensor<T>& input, std::size_t size, std::size_t stride) {
  if (input.rank() != 4) throw ShapeError("maxpool expects rank-4 input, got " + shape_str(input.shape()));
  if (size == 0 || stride == 0) throw ShapeError("maxpool size and stride must be >= 1");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h < size || w < size) {
    throw ShapeError("maxpool window " + std::to_string(size) + " larger than input " +
                     shape_str(input.shape()));
  }
  const std::size_t oh = (h - size) / stride + 1;
  const std::size_t ow = (w - size) / stride + 1;
  MaxPoolResultT<T> r{BasicTensor<T>({n, c, oh, ow}), std::vector<std::uint32_t>(n * c * oh * ow)};
  std::size_t o = 0;
  for (std::size_t p = 0; p < n * c; ++p) {
    const std::size_t base = p * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = base + (oy * stride) * w + ox * stride;
        for (std::size_t dy = 0; dy < size; ++dy) {
          for (std::size_t dx = 0; dx < size; ++dx) {
            const std::size_t idx = base + (oy * stride + dy) * w + ox * stride + dx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        r.output[o] = input[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <class T>
BasicTensor<T> maxpool_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax,
                                const BasicTensor<T>& grad_output) {
  if (argmax.size() != grad_output.size()) {
    throw ShapeError("maxpool_backward: argmax/grad size mismatch");
  }
  // Windows may overlap when stride < size, so accumulate in double.
  std::vector<double> acc(shape_numel(input_shape), 0.0);
  for (std::size_t i = 0; i < argmax.size(); ++i) acc[argmax[i]] += grad_output[i];
  BasicTensor<T> out(input_shape);
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<T>(acc[i]);
  return out;
}

namespace {

template <class T>
void check_logits(const BasicTensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("logits must be [N,K], got " + shape_str(logits.shape()));
  if (labels.size() != logits.dim(0)) {
    throw ShapeError("label count " + std::to_string(labels.size()) + " does not match logits " +
                     shape_str(logits.shape()));
  }
  const int k = static_cast<int>(logits.dim(1));
  for (int y : labels) {
    if (y < 0 || y >= k) {
      throw std::invalid_argument("label " + std::to_string(y) + " outside class range [0," +
                                  std::to_string(k) + ")");
    }
  }
}

}  // namespace

template <class T>
double softmax_xent_forward(const BasicTensor<T>& logits, std::span<const int> labels) {
  check_logits(logits, labels);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.data() + i * k;
    double zmax = z[0];
    for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, static_cast<double>(z[j]));
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - zmax);
    total += (zmax + std::log(s)) - z[labels[i]];
  }
  return total / static_cast<double>(n);
}

template <class T>
BasicTensor<T> softmax_xent_backward(const BasicTensor<T>& logits, std::span<const int> labels) {
  check_logits(logits, labels);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  BasicTensor<T> grad(logits.shape());
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> e(k);
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.data() + i * k;
    double zmax = z[0];
    for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, static_cast<double>(z[j]));
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      e[j] = std::exp(z[j] - zmax);
      s += e[j];
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double p = e[j] / s - (static_cast<int>(j) == labels[i] ? 1.0 : 0.0);
      grad[i * k + j] = static_cast<T>(p * inv_n);
    }
  }
  return grad;
}

template <class T>
std::vector<int> argmax_rows(const BasicTensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("logits must be [N,K], got " + shape_str(logits.shape()));
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.data() + i * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (z[j] > z[best]) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

#define CHANPRUNE_INSTANTIATE(T)                                                                   \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const Tensor&, const Tensor&,      \
                                         std::size_t, std::size_t);                               \
  template Conv2dGradsT<T> conv2d_backward(const BasicTensor<T>&, const Tensor&,                   \
                                           const BasicTensor<T>&, std::size_t, std::size_t, bool); \
  template BasicTensor<T> dense_forward(const BasicTensor<T>&, const Tensor&, const Tensor&);      \
  template DenseGradsT<T> dense_backward(const BasicTensor<T>&, const Tensor&,                     \
                                         const BasicTensor<T>&, bool);                            \
  template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                     \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);             \
  template MaxPoolResultT<T> maxpool_forward(const BasicTensor<T>&, std::size_t, std::size_t);     \
  template BasicTensor<T> maxpool_backward(const Shape&, std::span<const std::uint32_t>,           \
                                           const BasicTensor<T>&);                                \
  template double softmax_xent_forward(const BasicTensor<T>&, std::span<const int>);               \
  template BasicTensor<T> softmax_xent_backward(const BasicTensor<T>&, std::span<const int>);      \
  template std::vector<int> argmax_rows(const BasicTensor<T>&);

CHANPRUNE_INSTANTIATE(float)
CHANPRUNE_INSTANTIATE(double)

#undef CHANPRUNE_INSTANTIATE

}  // namespace chanprune
