#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>

#include "doctest.h"

#include "chanprune/errors.h"
#include "chanprune/graph.h"
#include "chanprune/ops.h"
#include "chanprune/tensor.h"
#include "reference.h"

using namespace chanprune;

TEST_SUITE("tensor_core") {

TEST_CASE("tensor rejects inconsistent shapes") {
  CHECK_THROWS_AS(Tensor(Shape{2, 3}, std::vector<float>(5)), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{}), ShapeError);
  const Tensor t(Shape{2, 3}, 1.5f);
  CHECK(t.size() == 6);
  CHECK(t.all_finite());
}

TEST_CASE("conv2d on a single pixel is a scalar product") {
  const Tensor in({1, 1, 1, 1}, {2.0f});
  const Tensor w({1, 1, 1, 1}, {3.0f});
  const Tensor b({1}, {0.0f});
  const Tensor out = conv2d_forward(in, w, b, 1, 0);
  CHECK(out.shape() == Shape{1, 1, 1, 1});
  CHECK(out[0] == 6.0f);
}

TEST_CASE("conv2d with zero weights and bias gives zeros") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-1, 1);
  Tensor in({2, 3, 5, 5});
  for (float& v : in.values()) v = u(rng);
  const Tensor out = conv2d_forward(in, Tensor({4, 3, 3, 3}), Tensor({4}), 1, 1);
  CHECK(out.shape() == Shape{2, 4, 5, 5});
  for (float v : out.values()) CHECK(v == 0.0f);
}

TEST_CASE("conv2d of ones sums nine terms plus bias") {
  const Tensor out = conv2d_forward(Tensor({1, 1, 3, 3}, 1.0f), Tensor({1, 1, 3, 3}, 1.0f), Tensor({1}, 1.0f), 1, 0);
  CHECK(out.shape() == Shape{1, 1, 1, 1});
  CHECK(out[0] == 10.0f);
}

TEST_CASE("conv2d output extent follows stride and padding") {
  const Tensor out = conv2d_forward(Tensor({1, 2, 7, 7}), Tensor({3, 2, 3, 3}), Tensor({3}), 2, 1);
  CHECK(out.shape() == Shape{1, 3, 4, 4});
}

TEST_CASE("conv2d names both shapes on a channel mismatch") {
  try {
    conv2d_forward(Tensor({1, 2, 4, 4}), Tensor({3, 5, 3, 3}), Tensor({3}), 1, 0);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[1x2x4x4]") != std::string::npos);
    CHECK(msg.find("[3x5x3x3]") != std::string::npos);
  }
}

TEST_CASE("relu gradient is zero at negative pre-activation") {
  const Tensor x({4}, {-2.0f, -0.0f, 0.5f, 3.0f});
  const Tensor g = relu_backward(x, Tensor({4}, 1.0f));
  CHECK(g[0] == 0.0f);
  CHECK(g[1] == 0.0f);
  CHECK(g[2] == 1.0f);
  CHECK(g[3] == 1.0f);
}

TEST_CASE("maxpool routes gradient to the first maximum") {
  const Tensor x({1, 1, 2, 2}, {5.0f, 5.0f, 1.0f, 2.0f});
  const MaxPoolResult r = maxpool_forward(x, 2, 2);
  CHECK(r.output[0] == 5.0f);
  const Tensor g = maxpool_backward(x.shape(), r.argmax, Tensor({1, 1, 1, 1}, 1.0f));
  CHECK(g[0] == 1.0f);
  CHECK(g[1] == 0.0f);
}

TEST_CASE("uniform logits over ten classes give ln 10") {
  const Tensor logits({3, 10}, 0.0f);
  const std::vector<int> labels{0, 4, 9};
  CHECK(softmax_xent_forward(logits, labels) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("saturated correct logit drives the loss to zero") {
  Tensor logits({1, 3}, 0.0f);
  logits[1] = 200.0f;
  const std::vector<int> labels{1};
  CHECK(softmax_xent_forward(logits, labels) < 1e-30);
}

TEST_CASE("label outside the class range is rejected") {
  const Tensor logits({2, 3}, 0.0f);
  const std::vector<int> bad{0, 3};
  CHECK_THROWS_AS(softmax_xent_forward(logits, bad), std::invalid_argument);
  const std::vector<int> negative{-1, 0};
  CHECK_THROWS_AS(softmax_xent_forward(logits, negative), std::invalid_argument);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  const Tensor logits({2, 3}, {1.0f, 1.0f, 0.0f, 0.0f, 2.0f, 2.0f});
  CHECK(argmax_rows(logits) == std::vector<int>{0, 1});
}

NetworkDef two_layer_toy() {
  NetworkDef net;
  net.name = "pinned";
  net.input = {1, 4, 4};
  net.num_classes = 3;
  net.layers = {LayerSpec::conv(2, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(2, 2), LayerSpec::dense(3)};
  return net;
}

WeightStore pinned_weights(const NetworkDef& net) {
  WeightStore w = init_weights(net, 0);
  float v = -0.7f;
  for (auto& layer : w.layers) {
    for (float& x : layer.weight.values()) {
      x = v;
      v += 0.113f;
      if (v > 0.8f) v -= 1.5f;
    }
    for (float& x : layer.bias.values()) x = 0.05f;
  }
  return w;
}

Batch pinned_batch(const NetworkDef& net) {
  Tensor images({2, 1, 4, 4});
  for (std::size_t i = 0; i < images.size(); ++i) images[i] = static_cast<float>((i * 7) % 11) / 10.0f;
  (void)net;
  return {std::move(images), {2, 0}};
}

TEST_CASE("pinned two-layer net loss matches the naive reference") {
  const NetworkDef net = two_layer_toy();
  const Graph g(net, pinned_weights(net));
  const Batch batch = pinned_batch(net);
  const double expected = ref::loss(net, ref::to_params(g.weights()), ref::to_double(batch.images), batch.labels);
  CHECK(g.loss(batch) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("forward is pure and backward leaves weights alone") {
  const NetworkDef net = two_layer_toy();
  const Graph g(net, pinned_weights(net));
  const Batch batch = pinned_batch(net);
  const WeightStore before = g.weights();
  const ForwardRecord r1 = g.forward(batch);
  const ForwardRecord r2 = g.forward(batch);
  CHECK(std::memcmp(&r1.loss, &r2.loss, sizeof(double)) == 0);
  g.backward(r1);
  CHECK(bit_equal(before, g.weights()));
}

TEST_CASE("backward needs a forward record from the same graph") {
  const NetworkDef net = two_layer_toy();
  const Graph g(net, pinned_weights(net));
  const Graph other = g;
  CHECK_THROWS_AS(g.backward(ForwardRecord{}), std::logic_error);
  const ForwardRecord r = other.forward(pinned_batch(net));
  CHECK_THROWS_AS(g.backward(r), std::logic_error);
}

TEST_CASE("channel with zero downstream weights gets zero activation gradient") {
  const NetworkDef net = two_layer_toy();
  WeightStore w = pinned_weights(net);
  // dense input features of channel 1 are indices 4..7 of each unit row
  Tensor& dense = w.layers[3].weight;
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t k = 4; k < 8; ++k) dense[u * 8 + k] = 0.0f;
  const Graph g(net, w);
  const ForwardRecord rec = g.forward(pinned_batch(net));
  const GradRecord grads = g.backward(rec);
  const Tensor ga = g.channel_activation_grads(grads, {0, 1});
  for (float v : ga.values()) CHECK(v == 0.0f);
  bool any_nonzero = false;
  for (float v : g.channel_activation_grads(grads, {0, 0}).values()) any_nonzero |= v != 0.0f;
  CHECK(any_nonzero);
}

TEST_CASE("weight gradients match the double-precision reference backward") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const NetworkDef net = ref::random_net(rng);
    const Graph g(net, ref::random_weights(rng, net));
    const Batch batch = ref::random_batch(rng, net, 3);
    const GradRecord grads = g.backward(g.forward(batch));
    const ref::Params p = ref::to_params(g.weights());
    const std::vector<double> x = ref::to_double(batch.images);
    const ref::Trace t = ref::forward(net, p, x, batch.labels);
    const ref::Grads rg = ref::backward(net, p, t, x, batch.labels);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const Tensor& gw = grads.weight_grads.layers[l].weight;
      for (std::size_t i = 0; i < gw.size(); ++i) {
        CHECK(gw[i] == doctest::Approx(rg.w[l][i]).epsilon(1e-4).scale(1e-6));
      }
    }
  }
}

TEST_CASE("random two-conv net passes a central finite-difference check") {
  std::mt19937_64 rng(5);
  NetworkDef net;
  net.name = "fd";
  net.input = {2, 6, 6};
  net.num_classes = 3;
  net.layers = {LayerSpec::conv(3, 3, 1, 1), LayerSpec::relu(), LayerSpec::conv(4, 3), LayerSpec::relu(),
                LayerSpec::dense(3)};
  for (;;) {
    const Graph g(net, ref::random_weights(rng, net));
    const Batch batch = ref::random_batch(rng, net, 2);
    const ref::Params p = ref::to_params(g.weights());
    const std::vector<double> x = ref::to_double(batch.images);
    const ref::Trace t = ref::forward(net, p, x, batch.labels);
    if (t.relu_margin < 2e-2) continue;
    const GradRecord grads = g.backward(g.forward(batch));
    const double eps = 1e-3;
    double worst = 0.0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      for (int which = 0; which < 2; ++which) {
        const Tensor& analytic = which == 0 ? grads.weight_grads.layers[l].weight : grads.weight_grads.layers[l].bias;
        for (std::size_t i = 0; i < analytic.size(); ++i) {
          ref::Params plus = p, minus = p;
          (which == 0 ? plus.w : plus.b)[l][i] += eps;
          (which == 0 ? minus.w : minus.b)[l][i] -= eps;
          const double fd = (ref::loss(net, plus, x, batch.labels) - ref::loss(net, minus, x, batch.labels)) / (2 * eps);
          worst = std::max(worst, std::abs(analytic[i] - fd) / (std::abs(fd) + 1e-8));
        }
      }
    }
    MESSAGE("worst relative error " << worst);
    CHECK(worst < 1e-4);
    break;
  }
}

}  // TEST_SUITE
