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


#include "fedroad/kernels.h"

#include <algorithm>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace fedroad::kernels {
namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelMinWork = 1 << 15;

// Row kernels shared by both paths so the arithmetic is literally the same.
inline void MatMulRow(const double* a_row, const double* b, double* c_row,
                      std::size_t k, std::size_t n) {
  std::fill(c_row, c_row + n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double ap = a_row[p];
    const double* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += ap * b_row[j];
  }
}

inline void MatMulNTRow(const double* a_row, const double* b, double* c_row,
                        std::size_t k, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double* b_row = b + j * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
    c_row[j] = acc;
  }
}

// Row i of transpose(a) * b: sum over p of a[p][i] * b[p][:].
inline void MatMulTNRow(const double* a, const double* b, double* c_row,
                        std::size_t i, std::size_t m, std::size_t k,
                        std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c_row, c_row + n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double api = a[p * m + i];
    if (api == 0.0) continue;
    const double* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += api * b_row[j];
  }
}

}  // namespace

int MaxThreads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void MatMul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
  const bool parallel = m * k * n >= kParallelMinWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    MatMulRow(a.data() + i * k, b.data(), c.data() + i * n, k, n);
  }
}

void MatMulNT(std::span<const double> a, std::span<const double> b,
              std::span<double> c, std::size_t m, std::size_t k,
              std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
  const bool parallel = m * k * n >= kParallelMinWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    MatMulNTRow(a.data() + i * k, b.data(), c.data() + i * n, k, n);
  }
}

void MatMulTN(std::span<const double> a, std::span<const double> b,
              std::span<double> c, std::size_t m, std::size_t k, std::size_t n,
              bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
  const bool parallel = m * k * n >= kParallelMinWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    MatMulTNRow(a.data(), b.data(), c.data() + i * n, i, m, k, n, accumulate);
  }
}

namespace ref {

void MatMul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    MatMulRow(a.data() + i * k, b.data(), c.data() + i * n, k, n);
  }
}

void MatMulNT(std::span<const double> a, std::span<const double> b,
              std::span<double> c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    MatMulNTRow(a.data() + i * k, b.data(), c.data() + i * n, k, n);
  }
}

void MatMulTN(std::span<const double> a, std::span<const double> b,
              std::span<double> c, std::size_t m, std::size_t k, std::size_t n,
              bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    MatMulTNRow(a.data(), b.data(), c.data() + i * n, i, m, k, n, accumulate);
  }
}

}  // namespace ref
}  // namespace fedroad::kernels
