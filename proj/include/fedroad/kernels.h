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


#ifndef FEDROAD_KERNELS_H_
#define FEDROAD_KERNELS_H_

#include <cstddef>
#include <span>

// Dense row-major GEMM kernels. The default entry points split output rows
// across OpenMP threads; the `ref` namespace holds the serial reference used
// by tests and the benchmark. Each output element is accumulated by a single
// thread in a fixed order, so both paths are bit-identical.
namespace fedroad::kernels {

// c[m x n] = a[m x k] * b[k x n]
void MatMul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t m, std::size_t k, std::size_t n);

// c[m x n] = a[m x k] * transpose(b[n x k])
void MatMulNT(std::span<const double> a, std::span<const double> b,
              std::span<double> c, std::size_t m, std::size_t k,
              std::size_t n);

// c[m x n] (+)= transpose(a[k x m]) * b[k x n]; accumulates when `accumulate`.
void MatMulTN(std::span<const double> a, std::span<const double> b,
              std::span<double> c, std::size_t m, std::size_t k, std::size_t n,
              bool accumulate);

// Number of threads the parallel kernels will use.
int MaxThreads();

namespace ref {

void MatMul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t m, std::size_t k, std::size_t n);
void MatMulNT(std::span<const double> a, std::span<const double> b,
              std::span<double> c, std::size_t m, std::size_t k,
              std::size_t n);
void MatMulTN(std::span<const double> a, std::span<const double> b,
              std::span<double> c, std::size_t m, std::size_t k, std::size_t n,
              bool accumulate);

}  // namespace ref
}  // namespace fedroad::kernels

#endif  // FEDROAD_KERNELS_H_
