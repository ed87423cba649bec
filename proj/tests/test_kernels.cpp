#include <omp.h>

#include <cmath>

#include "dapt/kernels.hpp"
#include "dapt/util.hpp"
#include "doctest.h"

using namespace dapt;
using namespace dapt::nn;

namespace {
std::vector<double> randv(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.next_normal();
  return v;
}
}  // namespace

TEST_SUITE_BEGIN("kernels");

TEST_CASE("openmp kernels match the serial reference bit for bit") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const size_t m = 1 + rng.next_below(40), n = 1 + rng.next_below(40), k = 1 + rng.next_below(40);
    std::vector<double> a = randv(m * k, rng), b = randv(k * n, rng), bt = randv(n * k, rng),
                        at = randv(k * m, rng);
    std::vector<double> c1(m * n), c2(m * n);

    par::gemm_nn(c1.data(), a.data(), b.data(), {m, n, k});
    ref::gemm_nn(c2.data(), a.data(), b.data(), {m, n, k});
    CHECK(c1 == c2);

    par::gemm_nt(c1.data(), a.data(), bt.data(), {m, n, k});
    ref::gemm_nt(c2.data(), a.data(), bt.data(), {m, n, k});
    CHECK(c1 == c2);

    par::gemm_tn(c1.data(), at.data(), b.data(), {m, n, k});
    ref::gemm_tn(c2.data(), at.data(), b.data(), {m, n, k});
    CHECK(c1 == c2);

    std::vector<double> bias = randv(n, rng);
    std::vector<double> y1 = c1, y2 = c2;
    par::add_bias(y1.data(), bias.data(), m, n);
    ref::add_bias(y2.data(), bias.data(), m, n);
    CHECK(y1 == y2);

    std::vector<double> db1(n), db2(n);
    par::bias_grad(db1.data(), y1.data(), m, n);
    ref::bias_grad(db2.data(), y2.data(), m, n);
    CHECK(db1 == db2);

    std::vector<double> g1(m * n), g2(m * n);
    par::gelu_forward(g1.data(), y1.data(), m * n);
    ref::gelu_forward(g2.data(), y2.data(), m * n);
    CHECK(g1 == g2);
    par::gelu_backward(g1.data(), y1.data(), c1.data(), m * n);
    ref::gelu_backward(g2.data(), y2.data(), c2.data(), m * n);
    CHECK(g1 == g2);

    std::vector<uint8_t> mask(n, 1);
    if (n > 1) mask[rng.next_below(n)] = 0;
    std::vector<double> s1 = c1, s2 = c2;
    par::softmax_rows_masked(s1.data(), mask.data(), m, n);
    ref::softmax_rows_masked(s2.data(), mask.data(), m, n);
    CHECK(s1 == s2);

    std::vector<double> gamma = randv(n, rng), beta = randv(n, rng);
    std::vector<double> o1(m * n), o2(m * n), mu1(m), mu2(m), rs1(m), rs2(m);
    par::layernorm_forward(o1.data(), mu1.data(), rs1.data(), c1.data(), gamma.data(), beta.data(), m, n, 1e-12);
    ref::layernorm_forward(o2.data(), mu2.data(), rs2.data(), c2.data(), gamma.data(), beta.data(), m, n, 1e-12);
    CHECK(o1 == o2);
    CHECK(mu1 == mu2);
    CHECK(rs1 == rs2);

    std::vector<double> dy = randv(m * n, rng);
    std::vector<double> dx1(m * n), dx2(m * n), dg1(n, 0), dg2(n, 0), dbta1(n, 0), dbta2(n, 0);
    par::layernorm_backward(dx1.data(), dg1.data(), dbta1.data(), dy.data(), c1.data(), mu1.data(), rs1.data(),
                            gamma.data(), m, n);
    ref::layernorm_backward(dx2.data(), dg2.data(), dbta2.data(), dy.data(), c2.data(), mu2.data(), rs2.data(),
                            gamma.data(), m, n);
    CHECK(dx1 == dx2);
    CHECK(dg1 == dg2);
    CHECK(dbta1 == dbta2);

    std::vector<double> p1 = randv(m * n, rng), p2 = p1, mm1(m * n, 0), mm2(m * n, 0), vv1(m * n, 0),
                        vv2(m * n, 0);
    par::adam_step(p1.data(), mm1.data(), vv1.data(), dy.data(), m * n, 3, 1e-3, 0.9, 0.999, 1e-8);
    ref::adam_step(p2.data(), mm2.data(), vv2.data(), dy.data(), m * n, 3, 1e-3, 0.9, 0.999, 1e-8);
    CHECK(p1 == p2);
    CHECK(mm1 == mm2);
    CHECK(vv1 == vv2);
  }
}

TEST_CASE("kernels are invariant to the active thread count") {
  Rng rng(12);
  const size_t m = 33, n = 17, k = 29;
  std::vector<double> a = randv(m * k, rng), b = randv(k * n, rng);
  std::vector<double> base(m * n);
  ref::gemm_nn(base.data(), a.data(), b.data(), {m, n, k});
  for (int threads : {1, 2, 5}) {
    std::vector<double> c(m * n);
    omp_set_num_threads(threads);
    par::gemm_nn(c.data(), a.data(), b.data(), {m, n, k});
    CHECK(c == base);
  }
  omp_set_num_threads(omp_get_num_procs());
}

TEST_CASE("softmax rows are normalized and masked entries are zero") {
  Rng rng(13);
  const size_t rows = 8, cols = 12;
  std::vector<double> x = randv(rows * cols, rng);
  std::vector<uint8_t> mask(cols, 1);
  mask[3] = 0;
  mask[7] = 0;
  par::softmax_rows_masked(x.data(), mask.data(), rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (size_t j = 0; j < cols; ++j) {
      CHECK(x[i * cols + j] >= 0.0);
      sum += x[i * cols + j];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(x[i * cols + 3] == 0.0);
    CHECK(x[i * cols + 7] == 0.0);
  }
}

TEST_CASE("layernorm output has zero mean and unit variance before affine") {
  Rng rng(14);
  const size_t rows = 6, cols = 32;
  std::vector<double> x = randv(rows * cols, rng);
  std::vector<double> gamma(cols, 1.0), beta(cols, 0.0);
  std::vector<double> y(rows * cols), mu(rows), rs(rows);
  par::layernorm_forward(y.data(), mu.data(), rs.data(), x.data(), gamma.data(), beta.data(), rows, cols, 1e-12);
  for (size_t i = 0; i < rows; ++i) {
    double mean = 0.0, var = 0.0;
    for (size_t j = 0; j < cols; ++j) mean += y[i * cols + j];
    mean /= cols;
    for (size_t j = 0; j < cols; ++j) var += (y[i * cols + j] - mean) * (y[i * cols + j] - mean);
    var /= cols;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("gelu derivative matches central differences") {
  Rng rng(15);
  std::vector<double> x = randv(64, rng);
  std::vector<double> dy(64, 1.0), dx(64);
  par::gelu_backward(dx.data(), x.data(), dy.data(), 64);
  const double h = 1e-6;
  for (size_t i = 0; i < 64; ++i) {
    double xp = x[i] + h, xm = x[i] - h, yp, ym;
    par::gelu_forward(&yp, &xp, 1);
    par::gelu_forward(&ym, &xm, 1);
    const double fd = (yp - ym) / (2 * h);
    CHECK(dx[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("layernorm backward matches central differences") {
  Rng rng(16);
  const size_t rows = 3, cols = 7;
  std::vector<double> x = randv(rows * cols, rng), gamma = randv(cols, rng), beta = randv(cols, rng);
  std::vector<double> dy = randv(rows * cols, rng);

  auto apply = [&](const std::vector<double>& xx, const std::vector<double>& gg, const std::vector<double>& bb) {
    std::vector<double> y(rows * cols), mu(rows), rs(rows);
    ref::layernorm_forward(y.data(), mu.data(), rs.data(), xx.data(), gg.data(), bb.data(), rows, cols, 1e-12);
    double s = 0.0;
    for (size_t i = 0; i < y.size(); ++i) s += y[i] * dy[i];
    return s;
  };

  std::vector<double> y(rows * cols), mu(rows), rs(rows);
  ref::layernorm_forward(y.data(), mu.data(), rs.data(), x.data(), gamma.data(), beta.data(), rows, cols, 1e-12);
  std::vector<double> dx(rows * cols), dg(cols, 0), db(cols, 0);
  ref::layernorm_backward(dx.data(), dg.data(), db.data(), dy.data(), x.data(), mu.data(), rs.data(), gamma.data(),
                          rows, cols);

  const double h = 1e-6;
  for (size_t i = 0; i < x.size(); ++i) {
    std::vector<double> xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (apply(xp, gamma, beta) - apply(xm, gamma, beta)) / (2 * h);
    CHECK(dx[i] == doctest::Approx(fd).epsilon(1e-5));
  }
  for (size_t i = 0; i < cols; ++i) {
    std::vector<double> gp = gamma, gm = gamma;
    gp[i] += h;
    gm[i] -= h;
    const double fd = (apply(x, gp, beta) - apply(x, gm, beta)) / (2 * h);
    CHECK(dg[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_SUITE_END();
