// Parallel GEMM against the serial reference at walk-product sizes.

#include <random>

#include <benchmark/benchmark.h>

#include "maxcorr/kernels.hpp"

namespace {

maxcorr::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  maxcorr::Matrix m(r, c);
  for (double& v : m.flat()) v = n(rng);
  return m;
}

void BM_ParallelGemm(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = random_matrix(n, n, 1), b = random_matrix(n, 64, 2);
  for (auto _ : st) benchmark::DoNotOptimize(maxcorr::kernels::matmul(a, b));
  st.SetItemsProcessed(st.iterations() * static_cast<int64_t>(n * n * 64));
}

void BM_ReferenceGemm(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = random_matrix(n, n, 1), b = random_matrix(n, 64, 2);
  for (auto _ : st) benchmark::DoNotOptimize(maxcorr::kernels::reference::matmul(a, b));
  st.SetItemsProcessed(st.iterations() * static_cast<int64_t>(n * n * 64));
}

void BM_ParallelGramNT(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto z = random_matrix(n, 64, 3);
  for (auto _ : st) benchmark::DoNotOptimize(maxcorr::kernels::matmul_nt(z, z));
}

}  // namespace

BENCHMARK(BM_ParallelGemm)->Arg(140)->Arg(420)->Arg(1200);
BENCHMARK(BM_ReferenceGemm)->Arg(140)->Arg(420)->Arg(1200);
BENCHMARK(BM_ParallelGramNT)->Arg(140)->Arg(600);

BENCHMARK_MAIN();
