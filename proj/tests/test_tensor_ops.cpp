#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tasnn/ops.hpp"
#include "test_util.hpp"

using namespace tasnn;
using testutil::fd_gradient;
using testutil::max_abs_diff;
using testutil::max_rel_error;
using testutil::random_tensor;

TEST_CASE("conv2d zero input stays zero") {
  Rng rng(1);
  Tensor in({1, 1, 1});
  LayerParams p = LayerParams::conv(1, 1, 3, false, rng);
  const Tensor out = ops::conv2d(in, p);
  CHECK(out.size() == 1);
  CHECK(out[0] == real(0));
}

TEST_CASE("conv2d impulse response picks the kernel center") {
  Rng rng(2);
  Tensor in({1, 3, 3});
  in[4] = 1;  // center
  LayerParams p = LayerParams::conv(1, 1, 3, false, rng);
  const Tensor out = ops::conv2d(in, p);
  // output center sees the kernel center coefficient
  CHECK(out[4] == doctest::Approx(double(p.weights[4])).epsilon(1e-12));
}

TEST_CASE("conv2d shape mismatch names both shapes") {
  Rng rng(3);
  Tensor in({2, 4, 4});
  LayerParams p = LayerParams::conv(4, 3, 3, true, rng);  // expects 3 channels
  CHECK_THROWS_WITH_AS(ops::conv2d(in, p), doctest::Contains("[4,3,3,3]"),
                       ConfigError);
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(4);
  Tensor in = random_tensor({2, 8, 8}, rng);
  LayerParams p = LayerParams::conv(4, 2, 3, true, rng);
  // scalar loss: weighted sum of outputs so the gradient is nontrivial
  Tensor lw = random_tensor({4, 8, 8}, rng);
  const auto loss = [&] {
    const Tensor out = ops::conv2d(in, p);
    double acc = 0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += double(out[i] * lw[i]);
    return acc;
  };

  p.zero_grads();
  const Tensor out = ops::conv2d(in, p);
  const Tensor gin = ops::conv2d_backward(in, p, {}, lw);

  CHECK(max_rel_error(fd_gradient(p.weights, loss), p.grad_weights) < 1e-5);
  CHECK(max_rel_error(fd_gradient(p.bias, loss), p.grad_bias) < 1e-5);
  CHECK(max_rel_error(fd_gradient(in, loss), gin) < 1e-5);
}

TEST_CASE("conv2d is linear in the input without bias") {
  Rng rng(5);
  Tensor in = random_tensor({3, 6, 6}, rng);
  LayerParams p = LayerParams::conv(2, 3, 3, false, rng);
  Tensor scaled = in;
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= real(2.5);
  const Tensor a = ops::conv2d(scaled, p);
  Tensor b = ops::conv2d(in, p);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] *= real(2.5);
  CHECK(max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("avg pool of a 2x2 block is the arithmetic mean") {
  Tensor in({1, 2, 2});
  in[0] = 1;
  in[1] = 2;
  in[2] = 3;
  in[3] = 4;
  const Tensor out = ops::pool2d(in, PoolKind::Avg, 2);
  CHECK(out.size() == 1);
  CHECK(out[0] == doctest::Approx(2.5));
}

TEST_CASE("max pool tie-break routes gradient to the first index") {
  Tensor in({1, 4, 4}, real(0.7));
  const Tensor out = ops::pool2d(in, PoolKind::Max, 4);
  CHECK(out[0] == real(0.7));
  Tensor gout({1, 1, 1});
  gout[0] = 3;
  const Tensor gin = ops::pool2d_backward(in, PoolKind::Max, 4, gout);
  CHECK(gin[0] == real(3));
  for (std::size_t i = 1; i < gin.size(); ++i) CHECK(gin[i] == real(0));
}

TEST_CASE("pool2d rejects non-divisible dims") {
  Tensor in({1, 5, 4});
  CHECK_THROWS_AS(ops::pool2d(in, PoolKind::Avg, 2), ConfigError);
}

TEST_CASE("avg pool backward matches finite differences") {
  Rng rng(6);
  Tensor in = random_tensor({1, 8, 8}, rng);
  Tensor lw = random_tensor({1, 4, 4}, rng);
  const auto loss = [&] {
    const Tensor out = ops::pool2d(in, PoolKind::Avg, 2);
    double acc = 0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += double(out[i] * lw[i]);
    return acc;
  };
  const Tensor gin = ops::pool2d_backward(in, PoolKind::Avg, 2, lw);
  CHECK(max_rel_error(fd_gradient(in, loss), gin) < 1e-6);
}

TEST_CASE("avg pool preserves mass over k^2") {
  Rng rng(7);
  Tensor in = random_tensor({3, 8, 8}, rng, 0, 4);
  const Tensor out = ops::pool2d(in, PoolKind::Avg, 2);
  CHECK(double(out.sum()) ==
        doctest::Approx(double(in.sum()) / 4.0).epsilon(1e-12));
}

TEST_CASE("linear identity and sum") {
  Rng rng(8);
  LayerParams id = LayerParams::dense(3, 3, true, rng);
  id.weights.fill(0);
  id.bias.fill(0);
  for (std::size_t i = 0; i < 3; ++i) id.weights[i * 3 + i] = 1;
  Tensor x({3});
  x[0] = 1;
  x[1] = 2;
  x[2] = 3;
  const Tensor y = ops::linear(x, id);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y[i] == x[i]);

  LayerParams ones = LayerParams::dense(1, 3, false, rng);
  ones.weights.fill(1);
  CHECK(ops::linear(x, ones)[0] == real(6));
}

TEST_CASE("linear rejects length mismatch") {
  Rng rng(9);
  LayerParams p = LayerParams::dense(4, 8, true, rng);
  Tensor x({7});
  CHECK_THROWS_AS(ops::linear(x, p), ConfigError);
}

TEST_CASE("linear gradients match finite differences") {
  Rng rng(10);
  Tensor in = random_tensor({16}, rng);
  LayerParams p = LayerParams::dense(8, 16, true, rng);
  Tensor lw = random_tensor({8}, rng);
  const auto loss = [&] {
    const Tensor out = ops::linear(in, p);
    double acc = 0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += double(out[i] * lw[i]);
    return acc;
  };
  p.zero_grads();
  const Tensor gin = ops::linear_backward(in, p, lw);
  CHECK(max_rel_error(fd_gradient(p.weights, loss), p.grad_weights) < 1e-6);
  CHECK(max_rel_error(fd_gradient(p.bias, loss), p.grad_bias) < 1e-6);
  CHECK(max_rel_error(fd_gradient(in, loss), gin) < 1e-6);
}

TEST_CASE("pointwise forward values") {
  Tensor x({3});
  x[0] = 0;
  x[1] = -2;
  x[2] = 2;
  const Tensor h = ops::pointwise(x, Pointwise::Heaviside, 1.0);
  CHECK(h[0] == real(1));  // f(0) = 1
  CHECK(h[1] == real(0));
  CHECK(h[2] == real(1));
  const Tensor s = ops::pointwise(x, Pointwise::Sigmoid);
  CHECK(s[0] == doctest::Approx(0.5));
  const Tensor r = ops::pointwise(x, Pointwise::Relu);
  CHECK(r[0] == real(0));
  CHECK(r[1] == real(0));
  CHECK(r[2] == real(2));
}

TEST_CASE("heaviside surrogate factor window") {
  Tensor x({2});
  x[0] = 0;
  x[1] = real(0.6);
  Tensor ones({2}, 1);
  const Tensor g = ops::pointwise_backward(x, Pointwise::Heaviside, ones, 1.0);
  CHECK(g[0] == real(1));  // center of the window, height 1/a
  CHECK(g[1] == real(0));  // |0.6| >= a/2
}

TEST_CASE("heaviside requires a positive surrogate width") {
  Tensor x({1});
  CHECK_THROWS_AS(ops::pointwise(x, Pointwise::Heaviside, 0.0), ConfigError);
  CHECK_THROWS_AS(ops::pointwise(x, Pointwise::Heaviside, -1.0), ConfigError);
}

TEST_CASE("sigmoid and relu backward match finite differences") {
  Rng rng(11);
  Tensor in = random_tensor({32}, rng, -2, 2);
  Tensor lw = random_tensor({32}, rng);
  for (const Pointwise fn : {Pointwise::Sigmoid, Pointwise::Relu}) {
    const auto loss = [&] {
      const Tensor out = ops::pointwise(in, fn);
      double acc = 0;
      for (std::size_t i = 0; i < out.size(); ++i)
        acc += double(out[i] * lw[i]);
      return acc;
    };
    const Tensor gin = ops::pointwise_backward(in, fn, lw);
    // relu has a kink at zero; the draw above stays away from it
    CHECK(max_rel_error(fd_gradient(in, loss), gin) < 1e-5);
  }
}

TEST_CASE("parallel kernels agree with the serial reference") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t ic = 1 + rng.below(4), oc = 1 + rng.below(5);
    const std::size_t h = 4 * (1 + rng.below(3)), w = 4 * (1 + rng.below(3));
    Tensor in = random_tensor({ic, h, w}, rng);
    LayerParams p = LayerParams::conv(oc, ic, 3, true, rng);
    const Tensor a = ops::conv2d(in, p);
    const Tensor b = serial_ops::conv2d(in, p);
    CHECK(max_rel_error(a, b, 1e-9) < 1e-12);

    Tensor gout = random_tensor(a.shape(), rng);
    LayerParams pa = p, pb = p;
    pa.zero_grads();
    pb.zero_grads();
    const Tensor ga = ops::conv2d_backward(in, pa, {}, gout);
    const Tensor gb = serial_ops::conv2d_backward(in, pb, {}, gout);
    CHECK(max_rel_error(ga, gb, 1e-9) < 1e-12);
    CHECK(max_rel_error(pa.grad_weights, pb.grad_weights, 1e-9) < 1e-12);
    CHECK(max_rel_error(pa.grad_bias, pb.grad_bias, 1e-9) < 1e-12);

    const Tensor mp = ops::pool2d(in, PoolKind::Max, 2);
    CHECK(max_abs_diff(mp, serial_ops::pool2d(in, PoolKind::Max, 2)) == 0);
    const Tensor ap = ops::pool2d(in, PoolKind::Avg, 2);
    CHECK(max_abs_diff(ap, serial_ops::pool2d(in, PoolKind::Avg, 2)) < 1e-15);

    LayerParams lin = LayerParams::dense(6, in.size(), true, rng);
    const Tensor la = ops::linear(in, lin);
    const Tensor lb = serial_ops::linear(in, lin);
    CHECK(max_rel_error(la, lb, 1e-9) < 1e-12);
  }
}

TEST_CASE("all ops keep finite inputs finite") {
  Rng rng(13);
  Tensor in = random_tensor({2, 8, 8}, rng, -5, 5);
  LayerParams p = LayerParams::conv(3, 2, 3, true, rng);
  CHECK(ops::conv2d(in, p).all_finite());
  CHECK(ops::pool2d(in, PoolKind::Max, 2).all_finite());
  CHECK(ops::pointwise(in, Pointwise::Sigmoid).all_finite());
}
