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


#include "support/grad_suite.h"

#include "fedroad/models.h"
#include "fedroad/numeric.h"
#include "fedroad/rng.h"
#include "fedroad/tasks.h"

namespace fedroad::testing {
namespace {

using models::EncoderParams;
using models::FusionParams;

Tensor RandomTensor(Shape shape, RngStream& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.Uniform(-1.0, 1.0);
  return t;
}

models::ModelDims SmallDims(RngStream& rng) {
  models::ModelDims d;
  d.vocab = 5 + rng.UniformInt(4);
  d.hidden = 3 + rng.UniformInt(4);
  d.embed = 2 + rng.UniformInt(7);  // <= 8
  d.image_dim = 3 + rng.UniformInt(6);
  d.fusion_hidden = 3 + rng.UniformInt(4);
  d.classes = 2 + rng.UniformInt(3);
  return d;
}

// Biases are randomized too so that every path carries a signal.
EncoderParams RandomEncoder(const models::ModelDims& d, RngStream& rng) {
  EncoderParams p = EncoderParams::Init(d, rng);
  p.text_b = RandomTensor(p.text_b.shape(), rng);
  p.image_b1 = RandomTensor(p.image_b1.shape(), rng);
  p.image_b2 = RandomTensor(p.image_b2.shape(), rng);
  return p;
}

Record RandomRecord(const models::ModelDims& d, std::size_t label, bool text,
                    bool image, RngStream& rng) {
  Record r;
  r.label = label;
  if (text) {
    TokenIds t(1 + rng.UniformInt(4));
    for (auto& id : t) id = static_cast<std::uint32_t>(rng.UniformInt(d.vocab));
    r.tokens = t;
  }
  if (image) r.image = RandomTensor({d.image_dim}, rng);
  return r;
}

ModelParams Pack(const EncoderParams& e) {
  ModelParams p;
  e.AppendTo(p);
  return p;
}

ModelParams Pack(const EncoderParams& e, const FusionParams& f) {
  ModelParams p;
  e.AppendTo(p);
  f.AppendTo(p);
  return p;
}

// Flat-vector check for functions of a single tensor.
double TensorGradError(const std::function<double(const Tensor&)>& f,
                       const Tensor& x, const Tensor& analytic) {
  return RelativeError(FiniteDifferenceGrad(f, x, 1e-6), analytic);
}

double CrossEntropyCase(RngStream& rng) {
  const std::size_t c = 2 + rng.UniformInt(6);
  const Tensor logits = RandomTensor({c}, rng) * 3.0;
  const std::size_t label = rng.UniformInt(c);
  return TensorGradError(
      [&](const Tensor& z) { return SoftmaxCrossEntropy(z, label).loss; }, logits,
      SoftmaxCrossEntropy(logits, label).grad);
}

double CosineCase(RngStream& rng) {
  const std::size_t k = 2 + rng.UniformInt(7);
  const Tensor u = RandomTensor({k}, rng);
  const Tensor v = RandomTensor({k}, rng);
  const CosineGrad g = CosineSimilarityWithGrad(u, v);
  Tensor uv({2 * k});
  Tensor analytic({2 * k});
  for (std::size_t i = 0; i < k; ++i) {
    uv[i] = u[i];
    uv[k + i] = v[i];
    analytic[i] = g.d_u[i];
    analytic[k + i] = g.d_v[i];
  }
  return TensorGradError(
      [&](const Tensor& x) {
        Tensor a({k}), b({k});
        for (std::size_t i = 0; i < k; ++i) {
          a[i] = x[i];
          b[i] = x[k + i];
        }
        return CosineSimilarity(a, b);
      },
      uv, analytic);
}

double TextEncoderCase(RngStream& rng) {
  const auto d = SmallDims(rng);
  const EncoderParams enc = RandomEncoder(d, rng);
  const Record r = RandomRecord(d, 0, true, false, rng);
  const Tensor w = RandomTensor({d.embed}, rng);
  EncoderParams grad = enc.ZerosLike();
  models::EncodeTextBackward(*r.tokens, enc, w, grad);
  return ParamsGradError(
      [&](const ModelParams& p) {
        return Dot(w.data(), models::EncodeText(*r.tokens, EncoderParams::FromParams(p)).data());
      },
      Pack(enc), Pack(grad));
}

double ImageEncoderCase(RngStream& rng) {
  const auto d = SmallDims(rng);
  const EncoderParams enc = RandomEncoder(d, rng);
  const Record r = RandomRecord(d, 0, false, true, rng);
  const Tensor w = RandomTensor({d.embed}, rng);
  EncoderParams grad = enc.ZerosLike();
  models::EncodeImageBackward(*r.image, enc, w, grad);
  return ParamsGradError(
      [&](const ModelParams& p) {
        return Dot(w.data(), models::EncodeImage(*r.image, EncoderParams::FromParams(p)).data());
      },
      Pack(enc), Pack(grad));
}

double TripletTermCase(RngStream& rng) {
  const std::size_t k = 2 + rng.UniformInt(7);
  models::TripletConfig cfg;
  // Alternate between the paper margin and a floor low enough to keep the
  // hinge active, so both branches are exercised.
  if (rng.Bernoulli(0.5)) cfg.floor = -3.0;
  if (rng.Bernoulli(0.25)) cfg.measure = models::PairMeasure::kLiteralSimilarity;
  const Tensor a = RandomTensor({k}, rng);
  const Tensor p = RandomTensor({k}, rng);
  const Tensor n = RandomTensor({k}, rng);
  const auto g = models::TripletTermWithGrad(a, p, n, cfg);
  Tensor x({3 * k}), analytic({3 * k});
  for (std::size_t i = 0; i < k; ++i) {
    x[i] = a[i];
    x[k + i] = p[i];
    x[2 * k + i] = n[i];
    analytic[i] = g.d_anchor[i];
    analytic[k + i] = g.d_positive[i];
    analytic[2 * k + i] = g.d_negative[i];
  }
  return TensorGradError(
      [&](const Tensor& v) {
        Tensor aa({k}), pp({k}), nn({k});
        for (std::size_t i = 0; i < k; ++i) {
          aa[i] = v[i];
          pp[i] = v[k + i];
          nn[i] = v[2 * k + i];
        }
        return models::TripletTerm(aa, pp, nn, cfg);
      },
      x, analytic);
}

// Two records per class, one triplet of each family plus one extra.
double CombinedTripletCase(RngStream& rng) {
  const auto d = SmallDims(rng);
  const EncoderParams enc = RandomEncoder(d, rng);
  std::vector<Record> records;
  for (std::size_t i = 0; i < 4; ++i) {
    records.push_back(RandomRecord(d, i / 2, true, true, rng));
  }
  std::vector<models::SampleRef> samples;
  for (std::size_t i = 0; i < records.size(); ++i) {
    samples.push_back({i, Modality::kText});
    samples.push_back({i, Modality::kImage});
  }
  // sample 2r is text of record r, 2r+1 its image
  const std::vector<models::IndexTriplet> triplets = {
      {models::TripletFamily::kTextText, 0, 2, 4},
      {models::TripletFamily::kTextImage, 0, 3, 5},
      {models::TripletFamily::kImageText, 7, 4, 0},
      {models::TripletFamily::kTextText, 6, 4, 2},
  };
  models::TripletConfig cfg;
  cfg.floor = rng.Bernoulli(0.5) ? -3.0 : 0.0;
  const auto result = models::TripletLossForEncoders(records, samples, triplets, enc, cfg);
  return ParamsGradError(
      [&](const ModelParams& p) {
        return models::TripletLossForEncoders(records, samples, triplets,
                                              EncoderParams::FromParams(p), cfg)
            .loss;
      },
      Pack(enc), Pack(result.grad));
}

double ClassifierCase(RngStream& rng) {
  const auto d = SmallDims(rng);
  const EncoderParams enc = RandomEncoder(d, rng);
  FusionParams fusion = FusionParams::Init(d, rng);
  fusion.b1 = RandomTensor(fusion.b1.shape(), rng);
  fusion.b2 = RandomTensor(fusion.b2.shape(), rng);
  const std::uint64_t which = rng.UniformInt(3);
  const Record r = RandomRecord(d, rng.UniformInt(d.classes), which != 1, which != 0, rng);
  EncoderParams d_enc = enc.ZerosLike();
  FusionParams d_fusion = fusion.ZerosLike();
  models::ClassifierLossAndGrad(r, enc, fusion, &d_enc, &d_fusion);
  return ParamsGradError(
      [&](const ModelParams& p) {
        return models::ClassifierLossAndGrad(r, EncoderParams::FromParams(p),
                                             FusionParams::FromParams(p), nullptr,
                                             nullptr);
      },
      Pack(enc, fusion), Pack(d_enc, d_fusion));
}

// Softmax regression when the hidden width draws 0, otherwise the ReLU MLP.
double DenseCase(RngStream& rng) {
  const std::size_t n = 4 + rng.UniformInt(5);
  const std::size_t dim = 2 + rng.UniformInt(5);
  const std::size_t hidden = rng.Bernoulli(0.3) ? 0 : 2 + rng.UniformInt(4);
  const std::size_t classes = 2 + rng.UniformInt(3);
  fedsim::DenseDataset train{RandomTensor({n, dim}, rng), {}};
  for (std::size_t i = 0; i < n; ++i) train.labels.push_back(rng.UniformInt(classes));
  const fedsim::DenseClassificationTask task(train, train, hidden, classes);
  ModelParams params = task.InitParams(rng);
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (double& v : params.tensor(t).data()) v = rng.Uniform(-1.0, 1.0);
  }
  std::vector<std::size_t> batch;
  for (std::size_t i = 0; i < 1 + rng.UniformInt(n); ++i) batch.push_back(rng.UniformInt(n));
  ModelParams grad = params.ZerosLike();
  task.LossAndGrad(params, batch, grad);
  ModelParams scratch = params.ZerosLike();
  return ParamsGradError(
      [&](const ModelParams& p) { return task.LossAndGrad(p, batch, scratch); }, params,
      grad);
}

}  // namespace

double ParamsGradError(const std::function<double(const ModelParams&)>& loss,
                       const ModelParams& at, const ModelParams& analytic,
                       double h) {
  ModelParams scratch = at;
  const Tensor numeric = FiniteDifferenceGrad(
      [&](const Tensor& flat) {
        scratch.Unflatten(flat);
        return loss(scratch);
      },
      at.Flatten(), h);
  return RelativeError(numeric, analytic.Flatten());
}

std::vector<GradCase> RunGradientSuite(std::size_t instances, std::uint64_t seed) {
  using CaseFn = double (*)(RngStream&);
  static constexpr struct {
    const char* name;
    CaseFn fn;
  } kCases[] = {
      {"cross_entropy", CrossEntropyCase},   {"cosine", CosineCase},
      {"text_encoder", TextEncoderCase},     {"image_encoder", ImageEncoderCase},
      {"triplet_term", TripletTermCase},     {"combined_triplet", CombinedTripletCase},
      {"classifier", ClassifierCase},       {"dense", DenseCase},
  };
  std::vector<GradCase> out;
  for (std::size_t i = 0; i < instances; ++i) {
    RngStream rng(seed, i);
    const auto& c = kCases[i % std::size(kCases)];
    out.push_back({std::string(c.name) + "#" + std::to_string(i), c.fn(rng)});
  }
  return out;
}

}  // namespace fedroad::testing
