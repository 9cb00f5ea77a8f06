// Timings of the OpenMP kernels against the serial reference, plus a full
// forward/backward pass. Results are checked to agree while we are at it.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#include <omp.h>

#include "tasnn/network.hpp"

using namespace tasnn;

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto start = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto stop = Clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() /
         reps;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  }
  return m;
}

void row(const char* name, double serial_ms, double parallel_ms, double diff) {
  std::printf("%-28s %10.3f %12.3f %9.2fx   %.3e\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms, diff);
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : omp_get_max_threads();
  omp_set_num_threads(threads);
  std::printf("threads=%d\n", threads);
  std::printf("%-28s %10s %12s %10s   %s\n", "kernel", "serial/ms",
              "parallel/ms", "speedup", "max|diff|");

  Rng rng(7);

  {
    Tensor in({16, 64, 64});
    in.fill_uniform(rng, -1, 1);
    LayerParams p = LayerParams::conv(32, 16, 3, true, rng);
    Tensor out_s, out_p;
    const double ts = time_ms([&] { out_s = serial_ops::conv2d(in, p); }, 5);
    const double tp = time_ms([&] { out_p = ops::conv2d(in, p); }, 5);
    row("conv2d fwd 16->32 @64x64", ts, tp, max_abs_diff(out_s, out_p));

    Tensor gout(out_s.shape());
    gout.fill_uniform(rng, -1, 1);
    LayerParams ps = p, pp = p;
    Tensor gin_s, gin_p;
    const double bs = time_ms(
        [&] {
          ps.zero_grads();
          gin_s = serial_ops::conv2d_backward(in, ps, {}, gout);
        },
        5);
    const double bp = time_ms(
        [&] {
          pp.zero_grads();
          gin_p = ops::conv2d_backward(in, pp, {}, gout);
        },
        5);
    double diff = max_abs_diff(gin_s, gin_p);
    diff = std::max(diff, max_abs_diff(ps.grad_weights, pp.grad_weights));
    row("conv2d bwd 16->32 @64x64", bs, bp, diff);
  }

  {
    Tensor in({4096});
    in.fill_uniform(rng, -1, 1);
    LayerParams p = LayerParams::dense(4096, 4096, true, rng);
    Tensor out_s, out_p;
    const double ts = time_ms([&] { out_s = serial_ops::linear(in, p); }, 10);
    const double tp = time_ms([&] { out_p = ops::linear(in, p); }, 10);
    row("linear 4096->4096", ts, tp, max_abs_diff(out_s, out_p));
  }

  {
    Tensor in({32, 128, 128});
    in.fill_uniform(rng, -1, 1);
    Tensor out_s, out_p;
    const double ts =
        time_ms([&] { out_s = serial_ops::pool2d(in, PoolKind::Max, 4); }, 10);
    const double tp =
        time_ms([&] { out_p = ops::pool2d(in, PoolKind::Max, 4); }, 10);
    row("maxpool4 32x128x128", ts, tp, max_abs_diff(out_s, out_p));
  }

  {
    // whole pipeline: batch-parallel training step vs single-threaded
    NetworkSpec spec;
    spec.in_c = 2;
    spec.in_h = 32;
    spec.in_w = 32;
    spec.T = 50;
    spec.structure = "Input-MP4-8C3-16C3-AP2-32FC-3";
    spec.layers = parse_structure(spec.structure);
    spec.strategy = TAStrategy::S3;
    spec.validate();
    Network net = Network::build(spec, 11);
    FrameTensor frames{Tensor({spec.T, 2, 32, 32})};
    frames.values.fill_uniform(rng, 0, 2);

    Network n1 = net;
    const double t1 = time_ms(
        [&] {
          n1.zero_grads();
          n1.loss_and_backward(frames, 0);
        },
        5);
    std::printf("%-28s %10.3f ms per sample (fwd+bwd, T=%zu)\n",
                "net train step", t1, spec.T);
  }
  return 0;
}
