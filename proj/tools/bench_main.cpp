#include <omp.h>

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dapt/corpus.hpp"
#include "dapt/fixtures.hpp"
#include "dapt/kernels.hpp"
#include "dapt/preprocess.hpp"
#include "dapt/util.hpp"

using dapt::Rng;
using namespace dapt::nn;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.next_normal();
  return v;
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e100;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

void bench_kernels(size_t n, int reps) {
  Rng rng(7);
  std::vector<double> a = random_vec(n * n, rng), b = random_vec(n * n, rng), c(n * n);
  std::vector<double> gamma = random_vec(n, rng), beta = random_vec(n, rng);
  std::vector<double> mean(n), rstd(n), y(n * n);

  struct Row {
    const char* name;
    double ser, par;
  };
  std::vector<Row> rows;
  GemmDims d{n, n, n};
  rows.push_back({"gemm_nn", time_best_of(reps, [&] { ref::gemm_nn(c.data(), a.data(), b.data(), d); }),
                  time_best_of(reps, [&] { par::gemm_nn(c.data(), a.data(), b.data(), d); })});
  rows.push_back({"gemm_nt", time_best_of(reps, [&] { ref::gemm_nt(c.data(), a.data(), b.data(), d); }),
                  time_best_of(reps, [&] { par::gemm_nt(c.data(), a.data(), b.data(), d); })});
  rows.push_back({"gemm_tn", time_best_of(reps, [&] { ref::gemm_tn(c.data(), a.data(), b.data(), d); }),
                  time_best_of(reps, [&] { par::gemm_tn(c.data(), a.data(), b.data(), d); })});
  rows.push_back(
      {"layernorm_fwd",
       time_best_of(reps, [&] {
         ref::layernorm_forward(y.data(), mean.data(), rstd.data(), a.data(), gamma.data(), beta.data(), n, n, 1e-12);
       }),
       time_best_of(reps, [&] {
         par::layernorm_forward(y.data(), mean.data(), rstd.data(), a.data(), gamma.data(), beta.data(), n, n, 1e-12);
       })});
  rows.push_back({"softmax_rows",
                  time_best_of(reps,
                               [&] {
                                 y = a;
                                 ref::softmax_rows_masked(y.data(), nullptr, n, n);
                               }),
                  time_best_of(reps, [&] {
                    y = a;
                    par::softmax_rows_masked(y.data(), nullptr, n, n);
                  })});
  rows.push_back({"gelu_fwd", time_best_of(reps, [&] { ref::gelu_forward(y.data(), a.data(), n * n); }),
                  time_best_of(reps, [&] { par::gelu_forward(y.data(), a.data(), n * n); })});

  std::printf("kernels, %zux%zu, best of %d (threads=%d)\n", n, n, reps, omp_get_max_threads());
  std::printf("%-14s %12s %12s %9s\n", "kernel", "serial(s)", "openmp(s)", "speedup");
  for (const Row& r : rows) std::printf("%-14s %12.4f %12.4f %8.2fx\n", r.name, r.ser, r.par, r.ser / r.par);
}

void bench_corpus(size_t records, int reps) {
  std::vector<std::string> lines = dapt::fixtures::dump_lines(records, 42);
  dapt::CorpusConfig cfg;
  cfg.allowlist = {"alpha", "bravo", "charlie"};
  auto pre = [](std::string_view t) { return dapt::preprocess(t, dapt::PreprocessMode::retraining); };

  const double serial = time_best_of(reps, [&] { dapt::build(lines, cfg, pre, nullptr, 1); });
  const double parallel =
      time_best_of(reps, [&] { dapt::build(lines, cfg, pre, nullptr, omp_get_max_threads()); });
  std::printf("\ncorpus build, %zu records, best of %d\n", records, reps);
  std::printf("%-14s %12.4f\n%-14s %12.4f  (%0.2fx, threads=%d)\n", "1 worker", serial, "max workers", parallel,
              serial / parallel, omp_get_max_threads());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compare the OpenMP kernels against the serial reference"};
  size_t size = 384;
  size_t records = 20000;
  int reps = 3;
  app.add_option("--size", size, "square matrix size")->capture_default_str();
  app.add_option("--records", records, "synthetic dump records")->capture_default_str();
  app.add_option("--reps", reps, "repetitions, best kept")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  bench_kernels(size, reps);
  bench_corpus(records, reps);
  return 0;
}
