// Dense double-precision kernels for the transformer surrogate: matrix
// multiplies in the three layout variants backprop needs, layer
// normalization, exact (erf) GELU, and numerically stable softmax.
//
// The primary kernels vectorize the matmul with AVX-512 FMAs (6x16 register
// blocks) when the compiler targets it and parallelize over independent
// 6-row output blocks, which keeps results bit-identical across thread
// counts.  tensor::serial holds straightforward reference implementations;
// tools/bench_kernels compares the two and the test suite cross-checks them.
//
// Shape convention for all matmul variants: C is M x N and the logical
// product is op(A)[M x K] * op(B)[K x N], row-major, so
//   matmul_nn: A is M x K, B is K x N
//   matmul_nt: A is M x K, B is N x K   (B transposed)
//   matmul_tn: A is K x M, B is K x N   (A transposed)
// With accumulate, C += the product instead of overwriting.
#pragma once

#include <cstddef>

namespace molbbo::tensor {

void matmul_nn(double* c, const double* a, const double* b, int m, int k, int n,
               bool accumulate = false);
void matmul_nt(double* c, const double* a, const double* b, int m, int k, int n,
               bool accumulate = false);
void matmul_tn(double* c, const double* a, const double* b, int m, int k, int n,
               bool accumulate = false);

namespace serial {
void matmul_nn(double* c, const double* a, const double* b, int m, int k, int n,
               bool accumulate = false);
void matmul_nt(double* c, const double* a, const double* b, int m, int k, int n,
               bool accumulate = false);
void matmul_tn(double* c, const double* a, const double* b, int m, int k, int n,
               bool accumulate = false);
}  // namespace serial

// y[r] = gain * (x[r] - mean[r]) * rstd[r] + bias per row; mean/rstd are
// saved for the backward pass.  rstd = 1/sqrt(var + 1e-5), population var.
void layernorm_forward(double* y, double* mean, double* rstd, const double* x,
                       const double* gain, const double* bias, int rows, int dim);

// Gradients of layernorm: writes dx, accumulates into dgain/dbias.
void layernorm_backward(double* dx, double* dgain, double* dbias, const double* dy,
                        const double* x, const double* gain, const double* mean,
                        const double* rstd, int rows, int dim);

// Exact GELU 0.5*x*(1 + erf(x/sqrt(2))) and its derivative.
double gelu(double x);
double gelu_grad(double x);
void gelu_forward(double* y, const double* x, std::size_t n);
// dx = dy * gelu'(x)
void gelu_backward(double* dx, const double* dy, const double* x, std::size_t n);

// In-place stable softmax over x[0..n); no-op for n <= 0.
void softmax_inplace(double* x, int n);
// dx = y .* (dy - sum(y .* dy)) given y = softmax(x); dx may alias dy.
void softmax_backward(double* dx, const double* y, const double* dy, int n);

// y[r][j] += bias[j] for every row.
void add_bias(double* y, const double* bias, int rows, int dim);
// dbias[j] += sum over rows of dy[r][j].
void bias_grad(double* dbias, const double* dy, int rows, int dim);

}  // namespace molbbo::tensor
