// Serial reference vs OpenMP kernels at the shapes the MNIST codec uses.

#include <benchmark/benchmark.h>

#include <vector>

#include "rsc/numerics/kernels.hpp"
#include "rsc/numerics/rng.hpp"

namespace {

std::vector<float> random_buffer(std::size_t n, std::uint64_t stream) {
  rsc::RngStream rng(42, stream);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.next_uniform() * 2 - 1);
  return v;
}

// args: batch m, input width k, output width n
void gemm_args(benchmark::internal::Benchmark* b) {
  b->Args({64, 784, 512})->Args({64, 512, 256})->Args({64, 128, 512})->Args({500, 64, 12});
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = random_buffer(m * k, 1), b = random_buffer(k * n, 2);
  std::vector<float> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      rsc::kernels::gemm(a.data(), b.data(), c.data(), m, k, n);
    } else {
      rsc::kernels::reference::gemm(a.data(), b.data(), c.data(), m, k, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}
BENCHMARK(BM_gemm<false>)->Name("gemm/reference")->Apply(gemm_args);
BENCHMARK(BM_gemm<true>)->Name("gemm/openmp")->Apply(gemm_args);

// Weight gradient: Aᵀ·G with A the layer input.
template <bool Parallel>
void BM_gemm_tn(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = random_buffer(m * k, 3), g = random_buffer(m * n, 4);
  std::vector<float> c(k * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      rsc::kernels::gemm_tn(a.data(), g.data(), c.data(), m, k, n);
    } else {
      rsc::kernels::reference::gemm_tn(a.data(), g.data(), c.data(), m, k, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}
BENCHMARK(BM_gemm_tn<false>)->Name("gemm_tn/reference")->Apply(gemm_args);
BENCHMARK(BM_gemm_tn<true>)->Name("gemm_tn/openmp")->Apply(gemm_args);

// Input gradient: G·Bᵀ.
template <bool Parallel>
void BM_gemm_nt(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto g = random_buffer(m * n, 5), b = random_buffer(k * n, 6);
  std::vector<float> c(m * k);
  for (auto _ : state) {
    if constexpr (Parallel) {
      rsc::kernels::gemm_nt(g.data(), b.data(), c.data(), m, n, k);
    } else {
      rsc::kernels::reference::gemm_nt(g.data(), b.data(), c.data(), m, n, k);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}
BENCHMARK(BM_gemm_nt<false>)->Name("gemm_nt/reference")->Apply(gemm_args);
BENCHMARK(BM_gemm_nt<true>)->Name("gemm_nt/openmp")->Apply(gemm_args);

template <bool Parallel>
void BM_column_sums(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto x = random_buffer(m * n, 7);
  std::vector<float> out(n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      rsc::kernels::column_sums(x.data(), out.data(), m, n);
    } else {
      rsc::kernels::reference::column_sums(x.data(), out.data(), m, n);
    }
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_column_sums<false>)->Name("column_sums/reference")->Args({64, 512})->Args({1000, 784});
BENCHMARK(BM_column_sums<true>)->Name("column_sums/openmp")->Args({64, 512})->Args({1000, 784});

}  // namespace

BENCHMARK_MAIN();
