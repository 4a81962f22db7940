// Benchmark comparing the vectorized/parallel kernels against the serial
// reference implementations at shapes the surrogate actually uses.
//
//   bench_kernels [reps]
//
// Matmul shapes: (sequence x d_model x d_model) projections, the feed-forward
// expansion, and the sparse-input embedding fallback.  Times are per call;
// GFLOP/s counts 2*M*K*N flops per matmul.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "molbbo/rng.hpp"
#include "molbbo/tensor.hpp"

namespace t = molbbo::tensor;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

using MatmulFn = void (*)(double*, const double*, const double*, int, int, int, bool);

double time_matmul(MatmulFn fn, const double* a, const double* b, double* c, int m,
                   int k, int n, int reps) {
  fn(c, a, b, m, k, n, false);  // warm-up
  const double t0 = now_seconds();
  for (int r = 0; r < reps; ++r) fn(c, a, b, m, k, n, false);
  return (now_seconds() - t0) / reps;
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 20;
  molbbo::Rng rng(42);

  std::printf("matmul_nn: optimized vs serial reference (%d reps)\n", reps);
  std::printf("%-18s %12s %12s %12s %8s\n", "shape (MxKxN)", "opt GF/s", "serial GF/s",
              "speedup", "max|d|");

  const int shapes[][3] = {
      {517, 128, 128},   // attention projections at sequence length 517
      {517, 128, 512},   // feed-forward expansion
      {517, 512, 128},   // feed-forward contraction
      {517, 128, 517},   // score matrix (one head handles 32-wide slices)
      {128, 2048, 128},  // x-embedder first layer, batch of sequences
  };
  for (const auto& s : shapes) {
    const int m = s[0], k = s[1], n = s[2];
    std::vector<double> a(static_cast<std::size_t>(m) * k);
    std::vector<double> b(static_cast<std::size_t>(k) * n);
    std::vector<double> c(static_cast<std::size_t>(m) * n);
    std::vector<double> c_ref(static_cast<std::size_t>(m) * n);
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = rng.normal();

    const double flops = 2.0 * m * k * n;
    const double opt = time_matmul(&t::matmul_nn, a.data(), b.data(), c.data(), m, k,
                                   n, reps);
    const double ser = time_matmul(&t::serial::matmul_nn, a.data(), b.data(),
                                   c_ref.data(), m, k, n, std::max(1, reps / 10));
    double max_diff = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double d = c[i] - c_ref[i];
      max_diff = std::max(max_diff, d < 0 ? -d : d);
    }
    char shape[32];
    std::snprintf(shape, sizeof shape, "%dx%dx%d", m, k, n);
    std::printf("%-18s %12.2f %12.2f %11.1fx %8.1e\n", shape, flops / opt / 1e9,
                flops / ser / 1e9, ser / opt, max_diff);
  }

  {
    const int rows = 517, dim = 128;
    std::vector<double> x(static_cast<std::size_t>(rows) * dim);
    for (double& v : x) v = rng.normal();
    std::vector<double> y(x.size()), mean(rows), rstd(rows);
    std::vector<double> gain(dim, 1.0), bias(dim, 0.0);
    const double t0 = now_seconds();
    for (int r = 0; r < reps * 10; ++r) {
      t::layernorm_forward(y.data(), mean.data(), rstd.data(), x.data(), gain.data(),
                           bias.data(), rows, dim);
    }
    const double per = (now_seconds() - t0) / (reps * 10);
    std::printf("\nlayernorm_forward %dx%d: %.1f us/call\n", rows, dim, per * 1e6);

    const double t1 = now_seconds();
    for (int r = 0; r < reps * 10; ++r) t::gelu_forward(y.data(), x.data(), x.size());
    const double per_gelu = (now_seconds() - t1) / (reps * 10);
    std::printf("gelu_forward %zu elems: %.1f us/call\n", x.size(), per_gelu * 1e6);
  }
  return 0;
}
