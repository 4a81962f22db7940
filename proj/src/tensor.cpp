#include "molbbo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "molbbo/parallel.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace molbbo::tensor {

namespace {

constexpr int kRowBlock = 6;

#if defined(__AVX512F__)

// One Rx16 output block: R rows of C, 16 columns held in two zmm accumulators
// per row, with the K loop innermost so each column accumulates in
// ascending-k order (same order as the scalar kernel).  Unmasked loads keep
// the hot loop at two loads + 2R FMAs per k.
template <int R>
void block_rx16_full(double* c, const double* const* a, const double* b_base,
                     int k_len, int n_stride, int j) {
  __m512d acc[R][2];
  for (int r = 0; r < R; ++r) {
    double* crow = c + static_cast<long>(r) * n_stride + j;
    acc[r][0] = _mm512_loadu_pd(crow);
    acc[r][1] = _mm512_loadu_pd(crow + 8);
  }
  for (int k = 0; k < k_len; ++k) {
    const double* b = b_base + static_cast<long>(k) * n_stride + j;
    const __m512d b0 = _mm512_loadu_pd(b);
    const __m512d b1 = _mm512_loadu_pd(b + 8);
    for (int r = 0; r < R; ++r) {
      const __m512d av = _mm512_set1_pd(a[r][k]);
      acc[r][0] = _mm512_fmadd_pd(av, b0, acc[r][0]);
      acc[r][1] = _mm512_fmadd_pd(av, b1, acc[r][1]);
    }
  }
  for (int r = 0; r < R; ++r) {
    double* crow = c + static_cast<long>(r) * n_stride + j;
    _mm512_storeu_pd(crow, acc[r][0]);
    _mm512_storeu_pd(crow + 8, acc[r][1]);
  }
}

// Masked variant for the last jr (< 16) columns.
template <int R>
void block_rx16_tail(double* c, const double* const* a, const double* b_base,
                     int k_len, int n_stride, int j, int jr) {
  __m512d acc[R][2];
  const __mmask8 m0 = jr >= 8 ? static_cast<__mmask8>(0xFF)
                              : static_cast<__mmask8>((1u << jr) - 1);
  const __mmask8 m1 = jr > 8 ? static_cast<__mmask8>((1u << (jr - 8)) - 1)
                             : static_cast<__mmask8>(0);
  for (int r = 0; r < R; ++r) {
    double* crow = c + static_cast<long>(r) * n_stride + j;
    acc[r][0] = _mm512_maskz_loadu_pd(m0, crow);
    acc[r][1] = _mm512_maskz_loadu_pd(m1, crow + 8);
  }
  for (int k = 0; k < k_len; ++k) {
    const double* b = b_base + static_cast<long>(k) * n_stride + j;
    const __m512d b0 = _mm512_maskz_loadu_pd(m0, b);
    const __m512d b1 = _mm512_maskz_loadu_pd(m1, b + 8);
    for (int r = 0; r < R; ++r) {
      const __m512d av = _mm512_set1_pd(a[r][k]);
      acc[r][0] = _mm512_fmadd_pd(av, b0, acc[r][0]);
      acc[r][1] = _mm512_fmadd_pd(av, b1, acc[r][1]);
    }
  }
  for (int r = 0; r < R; ++r) {
    double* crow = c + static_cast<long>(r) * n_stride + j;
    _mm512_mask_storeu_pd(crow, m0, acc[r][0]);
    _mm512_mask_storeu_pd(crow + 8, m1, acc[r][1]);
  }
}

template <int R>
void rows_rx(double* c, const double* const* a, const double* b, int k_len, int n) {
  int j = 0;
  for (; j + 16 <= n; j += 16) block_rx16_full<R>(c, a, b, k_len, n, j);
  if (j < n) block_rx16_tail<R>(c, a, b, k_len, n, j, n - j);
}

void matmul_block(double* c, const double* a_base, const double* b, int i, int rows,
                  int m, int k, int n) {
  (void)m;
  const double* a[kRowBlock];
  for (int r = 0; r < rows; ++r) {
    a[r] = a_base + static_cast<long>(i + r) * k;
  }
  double* crow = c + static_cast<long>(i) * n;
  switch (rows) {
    case 6: rows_rx<6>(crow, a, b, k, n); break;
    case 5: rows_rx<5>(crow, a, b, k, n); break;
    case 4: rows_rx<4>(crow, a, b, k, n); break;
    case 3: rows_rx<3>(crow, a, b, k, n); break;
    case 2: rows_rx<2>(crow, a, b, k, n); break;
    case 1: rows_rx<1>(crow, a, b, k, n); break;
    default: break;
  }
}

#else

// Portable fallback: same 6-row blocking so the parallel decomposition (and
// therefore bitwise reproducibility across thread counts) matches.
void matmul_block(double* c, const double* a_base, const double* b, int i, int rows,
                  int m, int k, int n) {
  (void)m;
  for (int r = 0; r < rows; ++r) {
    const double* arow = a_base + static_cast<long>(i + r) * k;
    double* crow = c + static_cast<long>(i + r) * n;
    for (int j = 0; j < n; ++j) {
      double s = crow[j];
      for (int kk = 0; kk < k; ++kk) s += arow[kk] * b[static_cast<long>(kk) * n + j];
      crow[j] = s;
    }
  }
}

#endif

void zero(double* p, long n) { std::memset(p, 0, static_cast<std::size_t>(n) * sizeof(double)); }

void transpose(double* dst, const double* src, int rows, int cols) {
  // dst is cols x rows
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      dst[static_cast<long>(j) * rows + i] = src[static_cast<long>(i) * cols + j];
    }
  }
}

}  // namespace

void matmul_nn(double* c, const double* a, const double* b, int m, int k, int n,
               bool accumulate) {
  if (!accumulate) zero(c, static_cast<long>(m) * n);
  const int blocks = (m + kRowBlock - 1) / kRowBlock;
  parallel_for(blocks, [&](int bi) {
    const int i = bi * kRowBlock;
    const int rows = std::min(kRowBlock, m - i);
    matmul_block(c, a, b, i, rows, m, k, n);
  });
}

void matmul_nt(double* c, const double* a, const double* b, int m, int k, int n,
               bool accumulate) {
  // b arrives n x k; transpose once into k x n scratch, then reuse the
  // blocked kernel.  The copy is O(kn), negligible next to the O(mkn) FLOPs.
  std::vector<double> bt(static_cast<std::size_t>(k) * static_cast<std::size_t>(n));
  transpose(bt.data(), b, n, k);
  matmul_nn(c, a, bt.data(), m, k, n, accumulate);
}

void matmul_tn(double* c, const double* a, const double* b, int m, int k, int n,
               bool accumulate) {
  // a arrives k x m; transpose once into m x k scratch.
  std::vector<double> at(static_cast<std::size_t>(m) * static_cast<std::size_t>(k));
  transpose(at.data(), a, k, m);
  matmul_nn(c, at.data(), b, m, k, n, accumulate);
}

namespace serial {

void matmul_nn(double* c, const double* a, const double* b, int m, int k, int n,
               bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = accumulate ? c[static_cast<long>(i) * n + j] : 0.0;
      for (int kk = 0; kk < k; ++kk) {
        s += a[static_cast<long>(i) * k + kk] * b[static_cast<long>(kk) * n + j];
      }
      c[static_cast<long>(i) * n + j] = s;
    }
  }
}

void matmul_nt(double* c, const double* a, const double* b, int m, int k, int n,
               bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = accumulate ? c[static_cast<long>(i) * n + j] : 0.0;
      for (int kk = 0; kk < k; ++kk) {
        s += a[static_cast<long>(i) * k + kk] * b[static_cast<long>(j) * k + kk];
      }
      c[static_cast<long>(i) * n + j] = s;
    }
  }
}

void matmul_tn(double* c, const double* a, const double* b, int m, int k, int n,
               bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = accumulate ? c[static_cast<long>(i) * n + j] : 0.0;
      for (int kk = 0; kk < k; ++kk) {
        s += a[static_cast<long>(kk) * m + i] * b[static_cast<long>(kk) * n + j];
      }
      c[static_cast<long>(i) * n + j] = s;
    }
  }
}

}  // namespace serial

void layernorm_forward(double* y, double* mean, double* rstd, const double* x,
                       const double* gain, const double* bias, int rows, int dim) {
  constexpr double kEps = 1e-5;
  parallel_for(rows, [&](int r) {
    const double* xr = x + static_cast<long>(r) * dim;
    double* yr = y + static_cast<long>(r) * dim;
    double mu = 0.0;
    for (int j = 0; j < dim; ++j) mu += xr[j];
    mu /= dim;
    double var = 0.0;
    for (int j = 0; j < dim; ++j) {
      const double d = xr[j] - mu;
      var += d * d;
    }
    var /= dim;
    const double rs = 1.0 / std::sqrt(var + kEps);
    for (int j = 0; j < dim; ++j) yr[j] = gain[j] * (xr[j] - mu) * rs + bias[j];
    mean[r] = mu;
    rstd[r] = rs;
  });
}

void layernorm_backward(double* dx, double* dgain, double* dbias, const double* dy,
                        const double* x, const double* gain, const double* mean,
                        const double* rstd, int rows, int dim) {
  for (int r = 0; r < rows; ++r) {
    const double* xr = x + static_cast<long>(r) * dim;
    const double* dyr = dy + static_cast<long>(r) * dim;
    double* dxr = dx + static_cast<long>(r) * dim;
    const double mu = mean[r];
    const double rs = rstd[r];
    // dhat = dy .* gain; dx = rs*(dhat - mean(dhat) - hat .* mean(dhat .* hat))
    double sum_dhat = 0.0;
    double sum_dhat_hat = 0.0;
    for (int j = 0; j < dim; ++j) {
      const double hat = (xr[j] - mu) * rs;
      const double dhat = dyr[j] * gain[j];
      sum_dhat += dhat;
      sum_dhat_hat += dhat * hat;
      dgain[j] += dyr[j] * hat;
      dbias[j] += dyr[j];
    }
    const double m1 = sum_dhat / dim;
    const double m2 = sum_dhat_hat / dim;
    for (int j = 0; j < dim; ++j) {
      const double hat = (xr[j] - mu) * rs;
      const double dhat = dyr[j] * gain[j];
      dxr[j] = rs * (dhat - m1 - hat * m2);
    }
  }
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;    // 1/sqrt(2)
constexpr double kInvSqrt2Pi = 0.3989422804014326779;   // 1/sqrt(2*pi)
}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

void gelu_forward(double* y, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = gelu(x[i]);
}

void gelu_backward(double* dx, const double* dy, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = dy[i] * gelu_grad(x[i]);
}

void softmax_inplace(double* x, int n) {
  if (n <= 0) return;
  double mx = x[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - mx);
    sum += x[i];
  }
  const double inv = 1.0 / sum;
  for (int i = 0; i < n; ++i) x[i] *= inv;
}

void softmax_backward(double* dx, const double* y, const double* dy, int n) {
  double dot = 0.0;
  for (int i = 0; i < n; ++i) dot += y[i] * dy[i];
  for (int i = 0; i < n; ++i) dx[i] = y[i] * (dy[i] - dot);
}

void add_bias(double* y, const double* bias, int rows, int dim) {
  for (int r = 0; r < rows; ++r) {
    double* yr = y + static_cast<long>(r) * dim;
    for (int j = 0; j < dim; ++j) yr[j] += bias[j];
  }
}

void bias_grad(double* dbias, const double* dy, int rows, int dim) {
  for (int r = 0; r < rows; ++r) {
    const double* dyr = dy + static_cast<long>(r) * dim;
    for (int j = 0; j < dim; ++j) dbias[j] += dyr[j];
  }
}

}  // namespace molbbo::tensor
