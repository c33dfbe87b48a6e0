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


#ifndef FEDROAD_MLDP_H_
#define FEDROAD_MLDP_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fedroad/record.h"
#include "fedroad/rng.h"
#include "fedroad/tensor.h"

// Local differential privacy for multimodal records: random sign-matrix
// projection, tanh squashing into (-1, 1) and per-coordinate Laplace noise.
namespace fedroad::mldp {

struct SignMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t e = 1;  // entries are +-1/e
  Tensor values;      // rows x cols
};

// entry = sign(u) / e with u = rng.Uniform(-1, 1); u == 0 counts as positive.
// Throws InputError when a dimension or e is zero.
SignMatrix MakeSignMatrix(std::size_t rows, std::size_t cols, std::size_t e,
                          RngStream& rng);
// The same matrix regenerated from a seed alone (stream 0 of `seed`).
SignMatrix MakeSignMatrix(std::size_t rows, std::size_t cols, std::size_t e,
                          std::uint64_t seed);

// tanh(Q y). Throws ShapeError unless q.cols == y.size().
Tensor ReduceText(const Tensor& y, const SignMatrix& q);
// tanh(Q X R) for a square image X. Throws ShapeError on a broken chain.
Tensor ReduceImage(const Tensor& x, const SignMatrix& q, const SignMatrix& r);

class PrivacyBudget {
 public:
  // Throws DomainError unless epsilon_total > 0 and sensitivity > 0, and
  // InputError when output_dims is zero.
  PrivacyBudget(double epsilon_total, std::size_t output_dims,
                double per_dim_sensitivity = 2.0);

  double epsilon_total() const { return epsilon_total_; }
  std::size_t output_dims() const { return output_dims_; }
  double per_dim_sensitivity() const { return per_dim_sensitivity_; }
  double per_dim_epsilon() const { return epsilon_total_ / output_dims_; }
  // per_dim_sensitivity / per_dim_epsilon
  double laplace_scale() const { return per_dim_sensitivity_ / per_dim_epsilon(); }

  friend bool operator==(const PrivacyBudget&, const PrivacyBudget&) = default;

 private:
  double epsilon_total_;
  std::size_t output_dims_;
  double per_dim_sensitivity_;
};

// v + Laplace(budget.laplace_scale()) per coordinate, drawn in index order.
// Throws InputError when v.size() != budget.output_dims().
Tensor LaplacePerturb(const Tensor& v, const PrivacyBudget& budget, RngStream& rng);

struct MldpConfig {
  double epsilon = 0.8;
  std::size_t image_rows = 8;  // c
  std::size_t image_cols = 8;  // e
  std::size_t text_dims = 16;  // c for text, used only above the threshold
  // Text features of at most this length keep their dimension (tanh only).
  std::size_t text_skip_threshold = 64;
  double sensitivity = 2.0;
  // Federation-wide seed the projection matrices are regenerated from.
  std::uint64_t projection_seed = 0;

  friend bool operator==(const MldpConfig&, const MldpConfig&) = default;
};

// Seeds of the three projection matrices derived from projection_seed.
struct ProjectionSeeds {
  std::uint64_t image_q;
  std::uint64_t image_r;
  std::uint64_t text_q;
};
ProjectionSeeds DeriveProjectionSeeds(std::uint64_t projection_seed);

// Noised feature of one modality of one record. The budget and seeds are
// fixed at construction; post-processing only ever touches the feature.
class PrivatizedRecord {
 public:
  PrivatizedRecord(Modality modality, Tensor feature, PrivacyBudget budget,
                   bool projected, std::uint64_t q_seed, std::uint64_t r_seed,
                   std::size_t label);

  Modality modality() const { return modality_; }
  const Tensor& feature() const { return feature_; }
  Tensor& mutable_feature() { return feature_; }
  const PrivacyBudget& budget() const { return budget_; }
  bool projected() const { return projected_; }
  std::uint64_t q_seed() const { return q_seed_; }
  std::uint64_t r_seed() const { return r_seed_; }
  std::size_t label() const { return label_; }

  friend bool operator==(const PrivatizedRecord&, const PrivatizedRecord&) = default;

 private:
  Modality modality_;
  Tensor feature_;
  PrivacyBudget budget_;
  bool projected_;
  std::uint64_t q_seed_;
  std::uint64_t r_seed_;
  std::size_t label_;
};

// Token-frequency vector of length vocab (counts / length).
Tensor TextFeatures(std::span<const std::uint32_t> tokens, std::size_t vocab);

// Noise-free projected features: what PrivatizeRecord perturbs.
Tensor ProjectText(const Tensor& y, const MldpConfig& cfg);
Tensor ProjectImage(const Tensor& image, const MldpConfig& cfg);

// One PrivatizedRecord per present modality, text first. Each modality is
// charged the full epsilon. A flat image of square length is treated as
// d x d. Text is taken from `text_features` when given, otherwise from the
// record's tokens via TextFeatures(tokens, vocab).
// Throws DomainError for epsilon <= 0, InputError when no modality is
// present or a target dimension exceeds its input.
std::vector<PrivatizedRecord> PrivatizeRecord(const Record& record,
                                              const MldpConfig& cfg,
                                              std::size_t vocab, RngStream& rng);

// Wire form: header "FRP1" with the feature shape, then modality u8,
// epsilon f64, output dims u32, sensitivity f64, projected u8, q/r seeds u64,
// label u32 and the feature as f64 values.
std::vector<std::uint8_t> Serialize(const PrivatizedRecord& r);
PrivatizedRecord DeserializePrivatized(std::span<const std::uint8_t> bytes);

using Mechanism = std::function<Tensor(const Tensor&, RngStream&)>;

struct LdpRatioOptions {
  std::size_t bins = 20;
  std::size_t trials = 1'000'000;
  std::uint64_t seed = 0;
  // Scalar statistic of an output; default is the first coordinate.
  std::function<double(const Tensor&)> projection;
};

// Runs the mechanism `trials` times on x (stream 1) and x_prime (stream 2),
// histograms the projected outputs into equal-width bins spanning the pooled
// 0.5% to 99.5% quantiles (outliers clamp into the edge bins) and returns the
// largest (count_x + 1) / (count_x' + 1). Throws ShapeError when x and x_prime
// differ in shape.
double EmpiricalLdpRatio(const Mechanism& mechanism, const Tensor& x,
                         const Tensor& x_prime, const LdpRatioOptions& options);

}  // namespace fedroad::mldp

#endif  // FEDROAD_MLDP_H_
