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


#ifndef FEDROAD_NUMERIC_H_
#define FEDROAD_NUMERIC_H_

#include <cstddef>
#include <functional>
#include <span>

#include "fedroad/rng.h"
#include "fedroad/tensor.h"

namespace fedroad {

// Standard matrix product of a[m x k] and b[k x n]. Throws ShapeError on
// non-matrix operands or mismatched inner dimensions.
Tensor MatMul(const Tensor& a, const Tensor& b);

double Dot(std::span<const double> u, std::span<const double> v);
double L2Norm(std::span<const double> v);

// dot(u, v) / (|u| |v|), clamped to [-1, 1]. Throws DomainError if either
// vector has zero norm and ShapeError on length mismatch.
double CosineSimilarity(std::span<const double> u, std::span<const double> v);
inline double CosineSimilarity(const Tensor& u, const Tensor& v) {
  return CosineSimilarity(u.data(), v.data());
}

// Gradients of CosineSimilarity(u, v) with respect to each argument.
struct CosineGrad {
  double value;
  Tensor d_u;
  Tensor d_v;
};
CosineGrad CosineSimilarityWithGrad(const Tensor& u, const Tensor& v);

// In-place max-subtracted softmax.
void SoftmaxInPlace(std::span<double> logits);
Tensor Softmax(const Tensor& logits);

struct LossAndGrad {
  double loss;
  Tensor grad;
};

// loss = -log softmax(logits)[label], grad = softmax(logits) - onehot(label).
// Throws IndexError when label is out of range.
LossAndGrad SoftmaxCrossEntropy(const Tensor& logits, std::size_t label);

// One Laplace(0, scale) draw by inverse CDF:
//   u ~ U(-0.5, 0.5) (open), x = -scale * sign(u) * ln(1 - 2|u|).
// Consumes exactly one 64-bit output. Throws DomainError unless scale > 0.
double LaplaceSample(double scale, RngStream& rng);

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
Tensor FiniteDifferenceGrad(const std::function<double(const Tensor&)>& f,
                            const Tensor& x, double h);

// |a - b|_2 / max(|a|_2, |b|_2); 0 when both vanish. Used by gradient checks.
double RelativeError(const Tensor& a, const Tensor& b);

}  // namespace fedroad

#endif  // FEDROAD_NUMERIC_H_
