#include <cmath>
#include <limits>

#include "dapt/kernels.hpp"

// Serial reference kernels. Same arithmetic as dapt::nn::par, no threading;
// the test suite asserts bitwise agreement and the bench tool compares them.

namespace dapt::nn::ref {

static constexpr double kInvSqrt2 = 0.70710678118654752440;
static constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void gemm_nn(double* c, const double* a, const double* b, GemmDims d) {
  for (size_t i = 0; i < d.m; ++i) {
    double* crow = c + i * d.n;
    for (size_t j = 0; j < d.n; ++j) crow[j] = 0.0;
    for (size_t k = 0; k < d.k; ++k) {
      const double av = a[i * d.k + k];
      const double* brow = b + k * d.n;
      for (size_t j = 0; j < d.n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(double* c, const double* a, const double* b, GemmDims d) {
  for (size_t i = 0; i < d.m; ++i) {
    const double* arow = a + i * d.k;
    double* crow = c + i * d.n;
    for (size_t j = 0; j < d.n; ++j) {
      const double* brow = b + j * d.k;
      double acc = 0.0;
      for (size_t k = 0; k < d.k; ++k) acc += arow[k] * brow[k];
      crow[j] = acc;
    }
  }
}

void gemm_tn(double* c, const double* a, const double* b, GemmDims d) {
  for (size_t i = 0; i < d.m; ++i) {
    double* crow = c + i * d.n;
    for (size_t j = 0; j < d.n; ++j) crow[j] = 0.0;
    for (size_t k = 0; k < d.k; ++k) {
      const double av = a[k * d.m + i];
      const double* brow = b + k * d.n;
      for (size_t j = 0; j < d.n; ++j) crow[j] += av * brow[j];
    }
  }
}

void add_bias(double* y, const double* bias, size_t rows, size_t cols) {
  for (size_t i = 0; i < rows; ++i) {
    double* row = y + i * cols;
    for (size_t j = 0; j < cols; ++j) row[j] += bias[j];
  }
}

void bias_grad(double* db, const double* dy, size_t rows, size_t cols) {
  for (size_t j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (size_t i = 0; i < rows; ++i) acc += dy[i * cols + j];
    db[j] = acc;
  }
}

void add(double* y, const double* x, const double* z, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] + z[i];
}

void gelu_forward(double* y, const double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * kInvSqrt2));
}

void gelu_backward(double* dx, const double* x, const double* dy, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    const double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
    dx[i] = dy[i] * (cdf + x[i] * pdf);
  }
}

void softmax_rows_masked(double* x, const uint8_t* mask, size_t rows, size_t cols) {
  for (size_t i = 0; i < rows; ++i) {
    double* row = x + i * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < cols; ++j)
      if (!mask || mask[j]) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (size_t j = 0; j < cols; ++j) {
      if (!mask || mask[j]) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
      } else {
        row[j] = 0.0;
      }
    }
    if (sum > 0.0)
      for (size_t j = 0; j < cols; ++j) row[j] /= sum;
  }
}

void layernorm_forward(double* y, double* mean, double* rstd, const double* x, const double* gamma,
                       const double* beta, size_t rows, size_t cols, double eps) {
  for (size_t i = 0; i < rows; ++i) {
    const double* xr = x + i * cols;
    double* yr = y + i * cols;
    double mu = 0.0;
    for (size_t j = 0; j < cols; ++j) mu += xr[j];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (size_t j = 0; j < cols; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(cols);
    const double rs = 1.0 / std::sqrt(var + eps);
    mean[i] = mu;
    rstd[i] = rs;
    for (size_t j = 0; j < cols; ++j) yr[j] = (xr[j] - mu) * rs * gamma[j] + beta[j];
  }
}

void layernorm_backward(double* dx, double* dgamma, double* dbeta, const double* dy, const double* x,
                        const double* mean, const double* rstd, const double* gamma, size_t rows, size_t cols) {
  for (size_t j = 0; j < cols; ++j) {
    double dg = 0.0, db = 0.0;
    for (size_t i = 0; i < rows; ++i) {
      const double xhat = (x[i * cols + j] - mean[i]) * rstd[i];
      dg += dy[i * cols + j] * xhat;
      db += dy[i * cols + j];
    }
    dgamma[j] += dg;
    dbeta[j] += db;
  }
  for (size_t i = 0; i < rows; ++i) {
    const double* xr = x + i * cols;
    const double* dyr = dy + i * cols;
    double* dxr = dx + i * cols;
    double s1 = 0.0, s2 = 0.0;
    for (size_t j = 0; j < cols; ++j) {
      const double xhat = (xr[j] - mean[i]) * rstd[i];
      const double dxhat = dyr[j] * gamma[j];
      s1 += dxhat;
      s2 += dxhat * xhat;
    }
    const double inv = 1.0 / static_cast<double>(cols);
    for (size_t j = 0; j < cols; ++j) {
      const double xhat = (xr[j] - mean[i]) * rstd[i];
      const double dxhat = dyr[j] * gamma[j];
      dxr[j] = rstd[i] * (dxhat - s1 * inv - xhat * s2 * inv);
    }
  }
}

void adam_step(double* param, double* m, double* v, const double* grad, size_t n, uint64_t t, double lr,
               double beta1, double beta2, double eps) {
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace dapt::nn::ref
