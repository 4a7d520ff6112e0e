#include "reference.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "chanprune/errors.h"

namespace ref {

using chanprune::LayerKind;
using chanprune::LayerSpec;
using chanprune::NetworkDef;

Params to_params(const chanprune::WeightStore& store) {
  Params p;
  for (const auto& layer : store.layers) {
    p.w.push_back(to_double(layer.weight));
    p.b.push_back(to_double(layer.bias));
  }
  return p;
}

std::vector<double> to_double(const chanprune::Tensor& t) {
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i];
  return out;
}

std::vector<std::vector<std::size_t>> shapes(const NetworkDef& net) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur = net.input;
  for (const LayerSpec& l : net.layers) {
    switch (l.kind) {
      case LayerKind::Conv: {
        const std::size_t h = (cur[1] + 2 * l.pad - l.kernel) / l.stride + 1;
        const std::size_t w = (cur[2] + 2 * l.pad - l.kernel) / l.stride + 1;
        cur = {l.outputs, h, w};
        break;
      }
      case LayerKind::MaxPool:
        cur = {cur[0], (cur[1] - l.kernel) / l.stride + 1, (cur[2] - l.kernel) / l.stride + 1};
        break;
      case LayerKind::Dense:
        cur = {l.outputs};
        break;
      case LayerKind::Relu:
        break;
    }
    out.push_back(cur);
  }
  return out;
}

namespace {

std::size_t numel(const std::vector<std::size_t>& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

}  // namespace

Trace forward(const NetworkDef& net, const Params& p, const std::vector<double>& input,
              const std::vector<int>& labels) {
  Trace t;
  t.n = labels.size();
  const auto shp = shapes(net);
  std::vector<std::size_t> in_shape = net.input;
  const std::vector<double>* in = &input;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const LayerSpec& l = net.layers[li];
    const std::size_t in_size = numel(in_shape);
    const std::size_t out_size = numel(shp[li]);
    std::vector<double> out(t.n * out_size, 0.0);
    for (std::size_t n = 0; n < t.n; ++n) {
      const double* x = in->data() + n * in_size;
      double* y = out.data() + n * out_size;
      if (l.kind == LayerKind::Conv) {
        const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
        const std::size_t F = shp[li][0], OH = shp[li][1], OW = shp[li][2], K = l.kernel;
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
              double s = p.b[li][f];
              for (std::size_t c = 0; c < C; ++c)
                for (std::size_t ky = 0; ky < K; ++ky)
                  for (std::size_t kx = 0; kx < K; ++kx) {
                    const long iy = static_cast<long>(oy * l.stride + ky) - static_cast<long>(l.pad);
                    const long ix = static_cast<long>(ox * l.stride + kx) - static_cast<long>(l.pad);
                    if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                    s += p.w[li][((f * C + c) * K + ky) * K + kx] * x[(c * H + iy) * W + ix];
                  }
              y[(f * OH + oy) * OW + ox] = s;
            }
      } else if (l.kind == LayerKind::Dense) {
        for (std::size_t u = 0; u < out_size; ++u) {
          double s = p.b[li][u];
          for (std::size_t k = 0; k < in_size; ++k) s += p.w[li][u * in_size + k] * x[k];
          y[u] = s;
        }
      } else if (l.kind == LayerKind::Relu) {
        for (std::size_t i = 0; i < in_size; ++i) {
          y[i] = x[i] > 0.0 ? x[i] : 0.0;
          t.relu_margin = std::min(t.relu_margin, std::abs(x[i]));
        }
      } else {
        const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
        const std::size_t OH = shp[li][1], OW = shp[li][2];
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
              double best = -1e300, second = -1e300;
              for (std::size_t ky = 0; ky < l.kernel; ++ky)
                for (std::size_t kx = 0; kx < l.kernel; ++kx) {
                  const double v = x[(c * H + oy * l.stride + ky) * W + ox * l.stride + kx];
                  if (v > best) {
                    second = best;
                    best = v;
                  } else if (v > second) {
                    second = v;
                  }
                }
              y[(c * OH + oy) * OW + ox] = best;
              t.pool_gap = std::min(t.pool_gap, best - second);
            }
      }
    }
    t.out.push_back(std::move(out));
    in = &t.out.back();
    in_shape = shp[li];
  }
  const std::size_t K = net.num_classes;
  double total = 0.0;
  for (std::size_t n = 0; n < t.n; ++n) {
    const double* z = t.out.back().data() + n * K;
    double m = z[0];
    for (std::size_t k = 1; k < K; ++k) m = std::max(m, z[k]);
    double se = 0.0;
    for (std::size_t k = 0; k < K; ++k) se += std::exp(z[k] - m);
    total += m + std::log(se) - z[labels[n]];
  }
  t.loss = total / static_cast<double>(t.n);
  return t;
}

double loss(const NetworkDef& net, const Params& p, const std::vector<double>& input,
            const std::vector<int>& labels) {
  return forward(net, p, input, labels).loss;
}

Grads backward(const NetworkDef& net, const Params& p, const Trace& t, const std::vector<double>& input,
               const std::vector<int>& labels) {
  const auto shp = shapes(net);
  const std::size_t L = net.layers.size();
  Grads g;
  g.w.resize(L);
  g.b.resize(L);
  g.out.resize(L);
  for (std::size_t li = 0; li < L; ++li) {
    g.w[li].assign(p.w[li].size(), 0.0);
    g.b[li].assign(p.b[li].size(), 0.0);
    g.out[li].assign(t.out[li].size(), 0.0);
  }
  const std::size_t K = net.num_classes;
  for (std::size_t n = 0; n < t.n; ++n) {
    const double* z = t.out.back().data() + n * K;
    double m = z[0];
    for (std::size_t k = 1; k < K; ++k) m = std::max(m, z[k]);
    double se = 0.0;
    for (std::size_t k = 0; k < K; ++k) se += std::exp(z[k] - m);
    for (std::size_t k = 0; k < K; ++k) {
      const double prob = std::exp(z[k] - m) / se;
      g.out.back()[n * K + k] = (prob - (static_cast<int>(k) == labels[n] ? 1.0 : 0.0)) / static_cast<double>(t.n);
    }
  }
  for (std::size_t li = L; li-- > 0;) {
    const LayerSpec& l = net.layers[li];
    const std::vector<std::size_t> in_shape = li == 0 ? net.input : shp[li - 1];
    const std::vector<double>& in = li == 0 ? input : t.out[li - 1];
    const std::size_t in_size = numel(in_shape);
    const std::size_t out_size = numel(shp[li]);
    std::vector<double> gin(t.n * in_size, 0.0);
    for (std::size_t n = 0; n < t.n; ++n) {
      const double* x = in.data() + n * in_size;
      const double* gy = g.out[li].data() + n * out_size;
      double* gx = gin.data() + n * in_size;
      if (l.kind == LayerKind::Conv) {
        const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
        const std::size_t F = shp[li][0], OH = shp[li][1], OW = shp[li][2], Kk = l.kernel;
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
              const double go = gy[(f * OH + oy) * OW + ox];
              g.b[li][f] += go;
              for (std::size_t c = 0; c < C; ++c)
                for (std::size_t ky = 0; ky < Kk; ++ky)
                  for (std::size_t kx = 0; kx < Kk; ++kx) {
                    const long iy = static_cast<long>(oy * l.stride + ky) - static_cast<long>(l.pad);
                    const long ix = static_cast<long>(ox * l.stride + kx) - static_cast<long>(l.pad);
                    if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                    const std::size_t wi = ((f * C + c) * Kk + ky) * Kk + kx;
                    const std::size_t xi = (c * H + iy) * W + ix;
                    g.w[li][wi] += go * x[xi];
                    gx[xi] += go * p.w[li][wi];
                  }
            }
      } else if (l.kind == LayerKind::Dense) {
        for (std::size_t u = 0; u < out_size; ++u) {
          g.b[li][u] += gy[u];
          for (std::size_t k = 0; k < in_size; ++k) {
            g.w[li][u * in_size + k] += gy[u] * x[k];
            gx[k] += gy[u] * p.w[li][u * in_size + k];
          }
        }
      } else if (l.kind == LayerKind::Relu) {
        for (std::size_t i = 0; i < in_size; ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
      } else {
        const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
        const std::size_t OH = shp[li][1], OW = shp[li][2];
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
              std::size_t arg = 0;
              double best = -1e300;
              for (std::size_t ky = 0; ky < l.kernel; ++ky)
                for (std::size_t kx = 0; kx < l.kernel; ++kx) {
                  const std::size_t xi = (c * H + oy * l.stride + ky) * W + ox * l.stride + kx;
                  if (x[xi] > best) {
                    best = x[xi];
                    arg = xi;
                  }
                }
              gx[arg] += gy[(c * OH + oy) * OW + ox];
            }
      }
    }
    if (li > 0) {
      for (std::size_t i = 0; i < gin.size(); ++i) g.out[li - 1][i] += gin[i];
    }
  }
  return g;
}

double eq_mean_sq_weights(const std::vector<double>& w) {
  if (w.empty()) return 0.0;
  double s = 0.0;
  for (double v : w) s += v * v;
  return s / static_cast<double>(w.size());
}

double eq_mean_activations(const ChannelSums& s) { return s.a / static_cast<double>(s.count); }
double eq_avg_gradients(const ChannelSums& s) { return std::abs(s.g) / static_cast<double>(s.count); }
double eq_taylor1(const ChannelSums& s) { return std::abs(s.ag) / static_cast<double>(s.count); }
double eq_fisher2(const ChannelSums& s) { return 0.5 * s.ag * s.ag; }

NetworkDef random_net(std::mt19937_64& rng, std::size_t max_params) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  for (;;) {
    NetworkDef net;
    net.name = "random";
    const std::size_t hw = pick(5, 9);
    net.input = {pick(1, 3), hw, hw};
    net.num_classes = pick(2, 5);
    std::size_t h = hw;
    const std::size_t convs = pick(1, 3);
    for (std::size_t i = 0; i < convs; ++i) {
      const std::size_t k = std::min(pick(1, 3), h);
      const std::size_t pad = k > 1 ? pick(0, 1) : 0;
      const std::size_t stride = pick(1, 4) == 4 ? 2 : 1;
      net.layers.push_back(LayerSpec::conv(pick(2, 5), k, stride, pad));
      h = (h + 2 * pad - k) / stride + 1;
      if (pick(0, 4) > 0) net.layers.push_back(LayerSpec::relu());
      if (h >= 4 && pick(0, 2) == 0) {
        net.layers.push_back(LayerSpec::maxpool(2, 2));
        h = (h - 2) / 2 + 1;
      }
    }
    if (pick(0, 2) == 0) {
      net.layers.push_back(LayerSpec::dense(pick(3, 8)));
      net.layers.push_back(LayerSpec::relu());
    }
    net.layers.push_back(LayerSpec::dense(net.num_classes));
    try {
      chanprune::validate(net);
    } catch (const chanprune::ShapeError&) {
      continue;
    }
    if (chanprune::init_weights(net, 0).parameter_count() <= max_params) return net;
  }
}

chanprune::Batch random_batch(std::mt19937_64& rng, const NetworkDef& net, std::size_t n) {
  std::uniform_real_distribution<float> px(0.0f, 1.0f);
  chanprune::Shape shape{n, net.input[0], net.input[1], net.input[2]};
  chanprune::Tensor images(shape);
  for (float& v : images.values()) v = px(rng);
  std::vector<int> labels(n);
  std::uniform_int_distribution<int> lab(0, static_cast<int>(net.num_classes) - 1);
  for (int& l : labels) l = lab(rng);
  return {std::move(images), std::move(labels)};
}

chanprune::WeightStore random_weights(std::mt19937_64& rng, const NetworkDef& net, double scale) {
  chanprune::WeightStore store = chanprune::init_weights(net, rng());
  std::normal_distribution<double> bias(0.0, 0.1);
  for (auto& layer : store.layers) {
    for (float& v : layer.weight.values()) v = static_cast<float>(v * scale);
    for (float& v : layer.bias.values()) v = static_cast<float>(bias(rng));
  }
  return store;
}

}  // namespace ref
