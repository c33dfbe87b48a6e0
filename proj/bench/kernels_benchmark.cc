// Copyright 2026 The FedRoad Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Compares the OpenMP kernels against their serial references at the sizes
// the simulator actually hits (MLP layers on digit batches, encoder layers).

#include <benchmark/benchmark.h>

#include <vector>

#include "fedroad/kernels.h"
#include "fedroad/rng.h"

namespace {

std::vector<double> RandomBuffer(std::size_t n, std::uint64_t seed) {
  fedroad::RngStream rng(seed, 0);
  std::vector<double> v(n);
  for (double& x : v) x = rng.Uniform(-1.0, 1.0);
  return v;
}

template <void (*Kernel)(std::span<const double>, std::span<const double>,
                         std::span<double>, std::size_t, std::size_t,
                         std::size_t)>
void BM_Gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = RandomBuffer(m * k, 1);
  const auto b = RandomBuffer(k * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Kernel(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * m * k * n));
}

template <void (*Kernel)(std::span<const double>, std::span<const double>,
                         std::span<double>, std::size_t, std::size_t,
                         std::size_t, bool)>
void BM_GemmTN(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = RandomBuffer(k * m, 3);
  const auto b = RandomBuffer(k * n, 4);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Kernel(a, b, c, m, k, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * m * k * n));
}

// Batch 16 x 784 inputs into a 64-unit hidden layer; 256 x 1024 image batch.
#define GEMM_SIZES Args({16, 784, 64})->Args({256, 1024, 32})->Args({128, 128, 128})

BENCHMARK(BM_Gemm<fedroad::kernels::MatMul>)->Name("MatMul/omp")->GEMM_SIZES;
BENCHMARK(BM_Gemm<fedroad::kernels::ref::MatMul>)->Name("MatMul/serial")->GEMM_SIZES;
BENCHMARK(BM_Gemm<fedroad::kernels::MatMulNT>)->Name("MatMulNT/omp")->GEMM_SIZES;
BENCHMARK(BM_Gemm<fedroad::kernels::ref::MatMulNT>)->Name("MatMulNT/serial")->GEMM_SIZES;
BENCHMARK(BM_GemmTN<fedroad::kernels::MatMulTN>)->Name("MatMulTN/omp")->GEMM_SIZES;
BENCHMARK(BM_GemmTN<fedroad::kernels::ref::MatMulTN>)->Name("MatMulTN/serial")->GEMM_SIZES;

}  // namespace

BENCHMARK_MAIN();
