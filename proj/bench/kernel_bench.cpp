// Parallel kernels against the serial reference. Shapes follow the
// toy (hidden 64) and full (hidden 512) model profiles.
//   ./kernel_bench --benchmark_counters_tabular=true
// Set OMP_NUM_THREADS to pick the thread count.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <vector>

#include "interaction/kernels.hpp"

namespace k = interaction::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

using MatmulFn = void (*)(std::span<const double>, std::span<const double>, std::span<double>, int,
                          int, int, bool);

template <MatmulFn fn>
void bm_matmul(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0)), kk = static_cast<int>(state.range(1)),
            n = static_cast<int>(state.range(2));
  // Same element count for every layout, so one buffer size fits all three kernels.
  const auto a = random_vector(static_cast<std::size_t>(m) * kk, 1);
  const auto b = random_vector(static_cast<std::size_t>(kk) * n, 2);
  std::vector<double> c(static_cast<std::size_t>(m) * n);
  for (auto _ : state) {
    fn(a, b, c, m, kk, n, false);
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.counters["threads"] = omp_get_max_threads();
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * m * kk * n, benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}

template <bool parallel>
void bm_softmax(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0)), cols = static_cast<int>(state.range(1));
  const auto x = random_vector(static_cast<std::size_t>(rows) * cols, 3);
  std::vector<double> y(x.size());
  for (auto _ : state) {
    if constexpr (parallel) k::softmax_rows(x, {}, y, rows, cols);
    else k::reference::softmax_rows(x, {}, y, rows, cols);
    benchmark::DoNotOptimize(y.data());
  }
  state.counters["threads"] = omp_get_max_threads();
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({50, 64, 64})->Args({50, 64, 256})->Args({128, 512, 512})->Args({128, 512, 2048});
  b->Unit(benchmark::kMicrosecond);
}

void softmax_shapes(benchmark::internal::Benchmark* b) {
  b->Args({400, 50})->Args({1024, 128})->Args({128, 30000});
  b->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(bm_matmul<k::matmul>)->Name("matmul/parallel")->Apply(shapes);
BENCHMARK(bm_matmul<k::reference::matmul>)->Name("matmul/serial")->Apply(shapes);
BENCHMARK(bm_matmul<k::matmul_nt>)->Name("matmul_nt/parallel")->Apply(shapes);
BENCHMARK(bm_matmul<k::reference::matmul_nt>)->Name("matmul_nt/serial")->Apply(shapes);
BENCHMARK(bm_matmul<k::matmul_tn>)->Name("matmul_tn/parallel")->Apply(shapes);
BENCHMARK(bm_matmul<k::reference::matmul_tn>)->Name("matmul_tn/serial")->Apply(shapes);
BENCHMARK(bm_softmax<true>)->Name("softmax_rows/parallel")->Apply(softmax_shapes);
BENCHMARK(bm_softmax<false>)->Name("softmax_rows/serial")->Apply(softmax_shapes);

BENCHMARK_MAIN();
