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


#include "fedroad/mldp.h"

#include <algorithm>
#include <cmath>

#include "fedroad/errors.h"
#include "fedroad/numeric.h"
#include "fedroad/wire.h"

namespace fedroad::mldp {
namespace {

Tensor TanhInPlace(Tensor t) {
  for (double& v : t.data()) v = std::tanh(v);
  return t;
}

Tensor AsSquare(const Tensor& image) {
  if (image.rank() == 2) return image;
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(image.size())));
  if (image.rank() != 1 || side * side != image.size()) {
    throw ShapeError("image of shape " + ShapeToString(image.shape()) +
                     " is not a square matrix");
  }
  return image.Reshaped({side, side});
}

}  // namespace

SignMatrix MakeSignMatrix(std::size_t rows, std::size_t cols, std::size_t e,
                          RngStream& rng) {
  if (rows == 0 || cols == 0 || e == 0) {
    throw InputError("sign matrix dimensions and scale must be positive");
  }
  SignMatrix m{rows, cols, e, Tensor({rows, cols})};
  const double mag = 1.0 / static_cast<double>(e);
  for (double& v : m.values.data()) v = rng.Uniform(-1.0, 1.0) < 0.0 ? -mag : mag;
  return m;
}

SignMatrix MakeSignMatrix(std::size_t rows, std::size_t cols, std::size_t e,
                          std::uint64_t seed) {
  RngStream rng(seed, 0);
  return MakeSignMatrix(rows, cols, e, rng);
}

Tensor ReduceText(const Tensor& y, const SignMatrix& q) {
  if (y.size() != q.cols) {
    throw ShapeError("text feature of length " + std::to_string(y.size()) +
                     " does not match a " + std::to_string(q.rows) + "x" +
                     std::to_string(q.cols) + " projection");
  }
  return TanhInPlace(MatMul(q.values, y.Reshaped({y.size(), 1})).Reshaped({q.rows}));
}

Tensor ReduceImage(const Tensor& x, const SignMatrix& q, const SignMatrix& r) {
  if (x.rank() != 2 || x.dim(0) != q.cols || x.dim(1) != r.rows) {
    throw ShapeError("image " + ShapeToString(x.shape()) + " does not chain with " +
                     std::to_string(q.rows) + "x" + std::to_string(q.cols) + " and " +
                     std::to_string(r.rows) + "x" + std::to_string(r.cols) +
                     " projections");
  }
  return TanhInPlace(MatMul(MatMul(q.values, x), r.values));
}

PrivacyBudget::PrivacyBudget(double epsilon_total, std::size_t output_dims,
                             double per_dim_sensitivity)
    : epsilon_total_(epsilon_total),
      output_dims_(output_dims),
      per_dim_sensitivity_(per_dim_sensitivity) {
  if (!(epsilon_total > 0.0) || !std::isfinite(epsilon_total)) {
    throw DomainError("privacy budget epsilon must be positive and finite");
  }
  if (!(per_dim_sensitivity > 0.0)) {
    throw DomainError("per-coordinate sensitivity must be positive");
  }
  if (output_dims == 0) throw InputError("privacy budget needs output_dims >= 1");
}

Tensor LaplacePerturb(const Tensor& v, const PrivacyBudget& budget, RngStream& rng) {
  if (v.size() != budget.output_dims()) {
    throw InputError("feature has " + std::to_string(v.size()) +
                     " coordinates, budget covers " +
                     std::to_string(budget.output_dims()));
  }
  const double scale = budget.laplace_scale();
  Tensor out = v;
  for (double& x : out.data()) x += LaplaceSample(scale, rng);
  return out;
}

ProjectionSeeds DeriveProjectionSeeds(std::uint64_t projection_seed) {
  return {MixSeed(projection_seed ^ 0x51494D47),   // "QIMG"
          MixSeed(projection_seed ^ 0x52494D47),   // "RIMG"
          MixSeed(projection_seed ^ 0x51545854)};  // "QTXT"
}

PrivatizedRecord::PrivatizedRecord(Modality modality, Tensor feature,
                                   PrivacyBudget budget, bool projected,
                                   std::uint64_t q_seed, std::uint64_t r_seed,
                                   std::size_t label)
    : modality_(modality),
      feature_(std::move(feature)),
      budget_(budget),
      projected_(projected),
      q_seed_(q_seed),
      r_seed_(r_seed),
      label_(label) {
  if (feature_.size() != budget_.output_dims()) {
    throw InputError("privatized feature size disagrees with its budget");
  }
}

Tensor TextFeatures(std::span<const std::uint32_t> tokens, std::size_t vocab) {
  if (tokens.empty()) throw InputError("text features of an empty token list");
  Tensor y({vocab});
  for (std::uint32_t t : tokens) {
    if (t >= vocab) throw InputError("token id outside vocabulary");
    y[t] += 1.0;
  }
  y *= 1.0 / static_cast<double>(tokens.size());
  return y;
}

Tensor ProjectText(const Tensor& y, const MldpConfig& cfg) {
  if (y.size() <= cfg.text_skip_threshold) return TanhInPlace(y.Reshaped({y.size()}));
  if (cfg.text_dims > y.size()) {
    throw InputError("text target dimension exceeds the input dimension");
  }
  const auto seeds = DeriveProjectionSeeds(cfg.projection_seed);
  return ReduceText(y.Reshaped({y.size()}),
                    MakeSignMatrix(cfg.text_dims, y.size(), cfg.text_dims, seeds.text_q));
}

Tensor ProjectImage(const Tensor& image, const MldpConfig& cfg) {
  const Tensor x = AsSquare(image);
  if (cfg.image_rows > x.dim(0) || cfg.image_cols > x.dim(1)) {
    throw InputError("image target dimensions exceed the input dimensions");
  }
  const auto seeds = DeriveProjectionSeeds(cfg.projection_seed);
  const SignMatrix q = MakeSignMatrix(cfg.image_rows, x.dim(0), cfg.image_cols, seeds.image_q);
  const SignMatrix r = MakeSignMatrix(x.dim(1), cfg.image_cols, cfg.image_cols, seeds.image_r);
  return ReduceImage(x, q, r);
}

std::vector<PrivatizedRecord> PrivatizeRecord(const Record& record,
                                              const MldpConfig& cfg,
                                              std::size_t vocab, RngStream& rng) {
  if (!(cfg.epsilon > 0.0)) throw DomainError("epsilon must be positive");
  if (!record.has_text() && !record.has_image()) {
    throw InputError("record has neither text nor image");
  }
  const auto seeds = DeriveProjectionSeeds(cfg.projection_seed);
  std::vector<PrivatizedRecord> out;
  if (record.has_text()) {
    const Tensor y = TextFeatures(*record.tokens, vocab);
    const bool projected = y.size() > cfg.text_skip_threshold;
    Tensor clean = ProjectText(y, cfg);
    const PrivacyBudget budget(cfg.epsilon, clean.size(), cfg.sensitivity);
    out.emplace_back(Modality::kText, LaplacePerturb(clean, budget, rng), budget,
                     projected, projected ? seeds.text_q : 0, 0, record.label);
  }
  if (record.has_image()) {
    Tensor clean = ProjectImage(*record.image, cfg);
    const PrivacyBudget budget(cfg.epsilon, clean.size(), cfg.sensitivity);
    out.emplace_back(Modality::kImage, LaplacePerturb(clean, budget, rng), budget, true,
                     seeds.image_q, seeds.image_r, record.label);
  }
  return out;
}

std::vector<std::uint8_t> Serialize(const PrivatizedRecord& r) {
  wire::ByteWriter w;
  w.PutHeader(wire::Kind::kPrivatized, r.feature().shape());
  w.PutU8(static_cast<std::uint8_t>(r.modality()));
  w.PutF64(r.budget().epsilon_total());
  w.PutU32(static_cast<std::uint32_t>(r.budget().output_dims()));
  w.PutF64(r.budget().per_dim_sensitivity());
  w.PutU8(r.projected() ? 1 : 0);
  w.PutU64(r.q_seed());
  w.PutU64(r.r_seed());
  w.PutU32(static_cast<std::uint32_t>(r.label()));
  for (double v : r.feature().data()) w.PutF64(v);
  return w.Take();
}

PrivatizedRecord DeserializePrivatized(std::span<const std::uint8_t> bytes) {
  wire::ByteReader rd(bytes);
  const Shape shape = rd.GetHeader(wire::Kind::kPrivatized);
  const std::uint8_t modality = rd.GetU8();
  if (modality != static_cast<std::uint8_t>(Modality::kText) &&
      modality != static_cast<std::uint8_t>(Modality::kImage)) {
    throw FormatError("privatized record: unknown modality tag");
  }
  const double epsilon = rd.GetF64();
  const std::uint32_t dims = rd.GetU32();
  const double sensitivity = rd.GetF64();
  const std::uint8_t projected = rd.GetU8();
  if (projected > 1) throw FormatError("privatized record: bad projected flag");
  const std::uint64_t q_seed = rd.GetU64();
  const std::uint64_t r_seed = rd.GetU64();
  const std::uint32_t label = rd.GetU32();
  if (ShapeSize(shape) != dims) {
    throw FormatError("privatized record: shape disagrees with budget dims");
  }
  Tensor feature(shape);
  for (double& v : feature.data()) v = rd.GetF64();
  rd.ExpectEnd();
  try {
    return PrivatizedRecord(static_cast<Modality>(modality), std::move(feature),
                            PrivacyBudget(epsilon, dims, sensitivity), projected == 1,
                            q_seed, r_seed, label);
  } catch (const Error& e) {
    throw FormatError(std::string("privatized record: ") + e.what());
  }
}

double EmpiricalLdpRatio(const Mechanism& mechanism, const Tensor& x,
                         const Tensor& x_prime, const LdpRatioOptions& options) {
  CheckSameShape(x, x_prime, "EmpiricalLdpRatio");
  if (options.bins == 0 || options.trials == 0) {
    throw InputError("EmpiricalLdpRatio needs bins >= 1 and trials >= 1");
  }
  const auto project = options.projection
                           ? options.projection
                           : std::function<double(const Tensor&)>(
                                 [](const Tensor& t) { return t[0]; });
  auto run = [&](const Tensor& input, std::uint64_t stream) {
    RngStream rng(options.seed, stream);
    std::vector<double> out(options.trials);
    for (double& v : out) v = project(mechanism(input, rng));
    return out;
  };
  const std::vector<double> a = run(x, 1);
  const std::vector<double> b = run(x_prime, 2);

  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto quantile = [&](double q) {
    const auto k = static_cast<std::size_t>(q * static_cast<double>(pooled.size() - 1));
    std::nth_element(pooled.begin(), pooled.begin() + k, pooled.end());
    return pooled[k];
  };
  const double lo = quantile(0.005);
  const double hi = quantile(0.995);
  const double width = (hi - lo) / static_cast<double>(options.bins);

  auto histogram = [&](const std::vector<double>& values) {
    std::vector<double> counts(options.bins, 0.0);
    for (double v : values) {
      std::size_t k = 0;
      if (width > 0.0 && v > lo) {
        k = std::min(options.bins - 1, static_cast<std::size_t>((v - lo) / width));
      }
      counts[k] += 1.0;
    }
    return counts;
  };
  const auto ca = histogram(a);
  const auto cb = histogram(b);
  double worst = 0.0;
  for (std::size_t k = 0; k < options.bins; ++k) {
    worst = std::max(worst, (ca[k] + 1.0) / (cb[k] + 1.0));
  }
  return worst;
}

}  // namespace fedroad::mldp
