#pragma once

#include <cstddef>
#include <cstdint>

namespace dapt::nn {

// Dense math used by the encoder. Each kernel exists twice: `par` carries
// OpenMP pragmas, `ref` is the plain serial implementation kept for testing
// and benchmarking. Both compute every output element with the same serial
// reduction order, so results are bit-identical for any thread count.

struct GemmDims {
  size_t m, n, k;
};

#define DAPT_DECLARE_KERNELS                                                                              \
  /* C[m,n] = A[m,k] * B[k,n] */                                                                          \
  void gemm_nn(double* c, const double* a, const double* b, GemmDims d);                                  \
  /* C[m,n] = A[m,k] * B[n,k]^T */                                                                        \
  void gemm_nt(double* c, const double* a, const double* b, GemmDims d);                                  \
  /* C[m,n] = A[k,m]^T * B[k,n] */                                                                        \
  void gemm_tn(double* c, const double* a, const double* b, GemmDims d);                                  \
  /* y[i,:] += bias */                                                                                    \
  void add_bias(double* y, const double* bias, size_t rows, size_t cols);                                 \
  /* db[j] = sum_i dy[i,j] (overwrites) */                                                                \
  void bias_grad(double* db, const double* dy, size_t rows, size_t cols);                                 \
  /* y = x + z elementwise */                                                                             \
  void add(double* y, const double* x, const double* z, size_t n);                                        \
  void gelu_forward(double* y, const double* x, size_t n);                                                \
  /* dx = dy * gelu'(x) */                                                                                \
  void gelu_backward(double* dx, const double* x, const double* dy, size_t n);                            \
  /* row-wise softmax in place; entries where mask[j]==0 get probability 0 */                             \
  void softmax_rows_masked(double* x, const uint8_t* mask, size_t rows, size_t cols);                     \
  /* y = (x - mean)/sqrt(var+eps) * gamma + beta, per row; mean/rstd cached */                            \
  void layernorm_forward(double* y, double* mean, double* rstd, const double* x, const double* gamma,     \
                         const double* beta, size_t rows, size_t cols, double eps);                       \
  /* accumulates dgamma/dbeta, overwrites dx */                                                           \
  void layernorm_backward(double* dx, double* dgamma, double* dbeta, const double* dy, const double* x,   \
                          const double* mean, const double* rstd, const double* gamma, size_t rows,       \
                          size_t cols);                                                                   \
  /* one Adam step with bias correction; t is 1-based */                                                  \
  void adam_step(double* param, double* m, double* v, const double* grad, size_t n, uint64_t t, double lr, \
                 double beta1, double beta2, double eps);

namespace par {
DAPT_DECLARE_KERNELS
}
namespace ref {
DAPT_DECLARE_KERNELS
}

#undef DAPT_DECLARE_KERNELS

}  // namespace dapt::nn
