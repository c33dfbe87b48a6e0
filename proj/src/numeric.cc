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


#include "fedroad/numeric.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedroad/errors.h"
#include "fedroad/kernels.h"

namespace fedroad {

Tensor MatMul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("MatMul expects matrices, got " +
                     ShapeToString(a.shape()) + " and " +
                     ShapeToString(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("MatMul inner dimension mismatch: " +
                     ShapeToString(a.shape()) + " x " +
                     ShapeToString(b.shape()));
  }
  Tensor c({a.dim(0), b.dim(1)});
  kernels::MatMul(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(1));
  return c;
}

double Dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("Dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

double L2Norm(std::span<const double> v) { return std::sqrt(Dot(v, v)); }

double CosineSimilarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("CosineSimilarity: length mismatch");
  const double nu = L2Norm(u);
  const double nv = L2Norm(v);
  if (nu == 0.0 || nv == 0.0) {
    throw DomainError("CosineSimilarity: zero-norm input");
  }
  return std::clamp(Dot(u, v) / (nu * nv), -1.0, 1.0);
}

CosineGrad CosineSimilarityWithGrad(const Tensor& u, const Tensor& v) {
  CheckSameShape(u, v, "CosineSimilarityWithGrad");
  const double nu = L2Norm(u.data());
  const double nv = L2Norm(v.data());
  if (nu == 0.0 || nv == 0.0) {
    throw DomainError("CosineSimilarity: zero-norm input");
  }
  // Unclamped value keeps the gradient consistent with the formula.
  const double s = Dot(u.data(), v.data()) / (nu * nv);
  // ds/du = v / (|u||v|) - s u / |u|^2, symmetric for v.
  Tensor du = v * (1.0 / (nu * nv));
  du.Axpy(-s / (nu * nu), u);
  Tensor dv = u * (1.0 / (nu * nv));
  dv.Axpy(-s / (nv * nv), v);
  return {s, std::move(du), std::move(dv)};
}

void SoftmaxInPlace(std::span<double> logits) {
  if (logits.empty()) return;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - mx);
    sum += z;
  }
  for (double& z : logits) z /= sum;
}

Tensor Softmax(const Tensor& logits) {
  Tensor p = logits;
  SoftmaxInPlace(p.data());
  return p;
}

LossAndGrad SoftmaxCrossEntropy(const Tensor& logits, std::size_t label) {
  if (label >= logits.size()) {
    throw IndexError("SoftmaxCrossEntropy: label " + std::to_string(label) +
                     " out of range for " + std::to_string(logits.size()) +
                     " classes");
  }
  const auto z = logits.data();
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  const double log_sum = std::log(sum);
  // log softmax[label] = z_label - mx - log_sum
  const double loss = std::max(0.0, -(z[label] - mx - log_sum));
  Tensor grad(logits.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    grad[i] = std::exp(z[i] - mx - log_sum);
  }
  grad[label] -= 1.0;
  return {loss, std::move(grad)};
}

double LaplaceSample(double scale, RngStream& rng) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw DomainError("LaplaceSample: scale must be positive and finite");
  }
  const double u = rng.NextOpenUnit() - 0.5;
  const double sign = u < 0.0 ? -1.0 : 1.0;
  return -scale * sign * std::log1p(-2.0 * std::abs(u));
}

Tensor FiniteDifferenceGrad(const std::function<double(const Tensor&)>& f,
                            const Tensor& x, double h) {
  if (!(h > 0.0)) throw DomainError("FiniteDifferenceGrad: h must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double plus = f(probe);
    probe[i] = orig - h;
    const double minus = f(probe);
    probe[i] = orig;
    grad[i] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

double RelativeError(const Tensor& a, const Tensor& b) {
  CheckSameShape(a, b, "RelativeError");
  const double denom = std::max(L2Norm(a.data()), L2Norm(b.data()));
  if (denom == 0.0) return 0.0;
  return L2Norm((a - b).data()) / denom;
}

}  // namespace fedroad
