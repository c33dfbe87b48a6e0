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


#include <cmath>
#include <numeric>
#include <vector>

#include "fedroad/data.h"
#include "fedroad/errors.h"
#include "fedroad/models.h"
#include "fedroad/numeric.h"
#include "fedroad/rng.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "support/grad_suite.h"

namespace fedroad::models {
namespace {

using ::testing::DoubleNear;
using ::testing::Each;
using ::testing::Gt;
using ::testing::Lt;

Tensor Unit(std::size_t k, std::size_t i) {
  Tensor t({k});
  t[i] = 1.0;
  return t;
}

// A vector whose cosine distance to e0 is exactly `d` (for d in [0, 2]).
Tensor AtDistance(double d) {
  const double c = 1.0 - d;
  return Tensor::Vector({c, std::sqrt(std::max(0.0, 1.0 - c * c))});
}

EncoderParams SmallEncoder(RngStream& rng) {
  ModelDims d;
  d.vocab = 8;
  d.hidden = 4;
  d.embed = 3;
  d.image_dim = 5;
  return EncoderParams::Init(d, rng);
}

TEST(EncodeTextTest, RepeatedTokenEqualsSingle) {
  RngStream rng(1, 0);
  const EncoderParams p = SmallEncoder(rng);
  const TokenIds eight(8, 3);
  const TokenIds one = {3};
  const Tensor a = EncodeText(eight, p);
  const Tensor b = EncodeText(one, p);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(EncodeTextTest, ZeroTableGivesBias) {
  RngStream rng(2, 0);
  EncoderParams p = SmallEncoder(rng);
  p.token_table = Tensor(p.token_table.shape());
  p.text_b = Tensor::Vector({0.5, -1.0, 2.0});
  const TokenIds ids = {0, 1, 7};
  EXPECT_EQ(EncodeText(ids, p), p.text_b);
}

TEST(EncodeTextTest, RejectsEmptyAndOutOfVocabulary) {
  RngStream rng(3, 0);
  const EncoderParams p = SmallEncoder(rng);
  EXPECT_THROW(EncodeText(TokenIds{}, p), InputError);
  EXPECT_THROW(EncodeText(TokenIds{1, 8}, p), InputError);
}

TEST(EncodeImageTest, ZeroWeightsGiveBias) {
  RngStream rng(4, 0);
  EncoderParams p = SmallEncoder(rng);
  p.image_w2 = Tensor(p.image_w2.shape());
  p.image_b2 = Tensor::Vector({1.0, 2.0, 3.0});
  EXPECT_EQ(EncodeImage(Tensor::Filled({5}, 0.3), p), p.image_b2);
}

TEST(EncodeImageTest, FiniteUnderHugeInputs) {
  RngStream rng(5, 0);
  const EncoderParams p = SmallEncoder(rng);
  const Tensor big = Tensor::Vector({1e6, -1e6, 1e6, 1e6, -1e6});
  EXPECT_TRUE(EncodeImage(big, p).AllFinite());
}

TEST(EncodeImageTest, RejectsWrongLength) {
  RngStream rng(6, 0);
  const EncoderParams p = SmallEncoder(rng);
  EXPECT_THROW(EncodeImage(Tensor({4}), p), ShapeError);
}

TEST(TripletTermTest, SatisfiedTripletReturnsFloor) {
  TripletConfig cfg;
  const Tensor a = Unit(3, 0);
  EXPECT_DOUBLE_EQ(TripletTerm(a, a, Unit(3, 1), cfg), cfg.floor);
}

TEST(TripletTermTest, NegativeEqualsAnchorPositiveOrthogonal) {
  TripletConfig cfg;  // c = 0.2, m = 0
  const Tensor a = Unit(3, 0);
  EXPECT_NEAR(TripletTerm(a, Unit(3, 2), a, cfg), 1.2, 1e-15);
}

TEST(TripletTermTest, MatchesDirectFormulaOnRandomVectors) {
  RngStream rng(7, 0);
  TripletConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    Tensor a({6}), p({6}), n({6});
    for (Tensor* t : {&a, &p, &n}) {
      for (double& v : t->data()) v = rng.Normal();
    }
    auto cosdist = [](const Tensor& u, const Tensor& v) {
      double uv = 0, uu = 0, vv = 0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
      }
      return 1.0 - uv / std::sqrt(uu * vv);
    };
    const double oracle = std::max(cosdist(a, p) - cosdist(a, n) + 0.2, 0.0);
    EXPECT_NEAR(TripletTerm(a, p, n, cfg), oracle, 1e-12);
    EXPECT_GE(TripletTerm(a, p, n, cfg), cfg.floor);
  }
}

TEST(TripletTermTest, ZeroEmbeddingIsDomainError) {
  EXPECT_THROW(TripletTerm(Tensor({2}), Unit(2, 0), Unit(2, 1), TripletConfig{}),
               DomainError);
}

TEST(TripletConfigTest, RejectsInvalidMarginAndFloor) {
  TripletConfig cfg;
  cfg.margin = -0.1;
  EXPECT_THROW(cfg.Validate(), InputError);
  cfg.margin = 0.2;
  cfg.floor = 0.3;
  EXPECT_THROW(cfg.Validate(), InputError);
}

EmbeddedSample Text(Tensor e, std::size_t label) {
  return {Modality::kText, std::move(e), label};
}
EmbeddedSample Image(Tensor e, std::size_t label) {
  return {Modality::kImage, std::move(e), label};
}

TEST(CombinedTripletLossTest, SatisfiedBatchIsZero) {
  const Tensor a = Unit(2, 0), n = Unit(2, 1);
  TripletBatch batch = {
      {TripletFamily::kTextText, Text(a, 0), Text(a, 0), Text(n, 1)},
      {TripletFamily::kTextImage, Text(a, 0), Image(a, 0), Image(n, 1)},
      {TripletFamily::kImageText, Image(a, 0), Text(a, 0), Text(n, 1)},
  };
  EXPECT_EQ(CombinedTripletLoss(batch, TripletConfig{}).loss, 0.0);
}

TEST(CombinedTripletLossTest, TextOnlyTermWeightedByAlpha) {
  // Text-text term: cosdist(a,p) = 0.8, cosdist(a,n) = 0 -> 0.8 + 0.2 = 1.0.
  const Tensor a = Unit(2, 0);
  TripletBatch batch = {
      {TripletFamily::kTextText, Text(a, 0), Text(AtDistance(0.8), 0), Text(a, 1)},
      {TripletFamily::kTextImage, Text(a, 0), Image(a, 0), Image(Unit(2, 1), 1)},
      {TripletFamily::kImageText, Image(a, 0), Text(a, 0), Text(Unit(2, 1), 1)},
  };
  EXPECT_NEAR(CombinedTripletLoss(batch, TripletConfig{}).loss, 0.1, 1e-12);
}

TEST(CombinedTripletLossTest, MissingFamilyOrBadLabelsRejected) {
  const Tensor a = Unit(2, 0), n = Unit(2, 1);
  TripletBatch batch = {
      {TripletFamily::kTextText, Text(a, 0), Text(a, 0), Text(n, 1)},
      {TripletFamily::kTextImage, Text(a, 0), Image(a, 0), Image(n, 1)},
  };
  EXPECT_THROW(CombinedTripletLoss(batch, TripletConfig{}), InputError);
  batch.push_back({TripletFamily::kImageText, Image(a, 0), Text(a, 0), Text(n, 0)});
  EXPECT_THROW(CombinedTripletLoss(batch, TripletConfig{}), InputError);
  batch.back().negative.label = 1;
  batch.back().positive.modality = Modality::kImage;
  EXPECT_THROW(CombinedTripletLoss(batch, TripletConfig{}), InputError);
}

TEST(CombinedTripletLossTest, GradientsMatchFiniteDifferences) {
  // Two triplets per family over k = 4 random embeddings; floor pushed down so
  // every hinge is active.
  RngStream rng(8, 0);
  TripletConfig cfg;
  cfg.floor = -3.0;
  std::vector<Tensor> e(18);
  for (auto& t : e) {
    t = Tensor({4});
    for (double& v : t.data()) v = rng.Uniform(-1, 1);
  }
  const TripletFamily fam[] = {TripletFamily::kTextText, TripletFamily::kTextImage,
                               TripletFamily::kImageText};
  auto build = [&](const std::vector<Tensor>& emb) {
    TripletBatch b;
    for (std::size_t t = 0; t < 6; ++t) {
      const TripletFamily f = fam[t % 3];
      const Modality am = f == TripletFamily::kImageText ? Modality::kImage : Modality::kText;
      const Modality om = f == TripletFamily::kTextImage ? Modality::kImage : Modality::kText;
      b.push_back({f, {am, emb[3 * t], 0}, {om, emb[3 * t + 1], 0}, {om, emb[3 * t + 2], 1}});
    }
    return b;
  };
  const auto result = CombinedTripletLoss(build(e), cfg);
  Tensor flat({72}), analytic({72});
  for (std::size_t t = 0; t < 6; ++t) {
    const auto& g = result.grads[t];
    for (std::size_t i = 0; i < 4; ++i) {
      flat[12 * t + i] = e[3 * t][i];
      flat[12 * t + 4 + i] = e[3 * t + 1][i];
      flat[12 * t + 8 + i] = e[3 * t + 2][i];
      analytic[12 * t + i] = g.d_anchor[i];
      analytic[12 * t + 4 + i] = g.d_positive[i];
      analytic[12 * t + 8 + i] = g.d_negative[i];
    }
  }
  const Tensor numeric = FiniteDifferenceGrad(
      [&](const Tensor& x) {
        std::vector<Tensor> emb(18, Tensor({4}));
        for (std::size_t j = 0; j < 18; ++j) {
          for (std::size_t i = 0; i < 4; ++i) emb[j][i] = x[4 * j + i];
        }
        return CombinedTripletLoss(build(emb), cfg).loss;
      },
      flat, 1e-6);
  EXPECT_LT(RelativeError(numeric, analytic), 1e-4);
}

TEST(MineHardNegativeTest, PicksClosestNegative) {
  const Tensor anchor = Unit(2, 0);
  const Tensor c0 = AtDistance(0.9), c1 = AtDistance(0.1), c2 = AtDistance(0.5);
  const std::vector<Candidate> cands = {{&c0, 1}, {&c1, 2}, {&c2, 1}};
  EXPECT_EQ(MineHardNegative(anchor, cands, 0), 1u);
}

TEST(MineHardNegativeTest, SkipsSameLabelAndBreaksTiesLow) {
  const Tensor anchor = Unit(2, 0);
  const Tensor same = anchor, far = AtDistance(1.5), tie = AtDistance(0.4);
  const std::vector<Candidate> single = {{&same, 0}, {&far, 3}};
  EXPECT_EQ(MineHardNegative(anchor, single, 0), 1u);
  const std::vector<Candidate> ties = {{&same, 0}, {&tie, 1}, {&tie, 2}};
  EXPECT_EQ(MineHardNegative(anchor, ties, 0), 1u);
  const std::vector<Candidate> none = {{&same, 0}};
  EXPECT_THROW(MineHardNegative(anchor, none, 0), InputError);
}

TEST(MineHardNegativeTest, InvariantUnderPositiveRescaling) {
  RngStream rng(9, 0);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor anchor({5});
    for (double& v : anchor.data()) v = rng.Normal();
    std::vector<Tensor> emb(8, Tensor({5}));
    std::vector<Tensor> scaled;
    std::vector<Candidate> a, b;
    for (auto& t : emb) {
      for (double& v : t.data()) v = rng.Normal();
    }
    for (auto& t : emb) scaled.push_back(t * rng.Uniform(0.01, 100.0));
    for (std::size_t i = 0; i < emb.size(); ++i) {
      a.push_back({&emb[i], i % 3});
      b.push_back({&scaled[i], i % 3});
    }
    EXPECT_EQ(MineHardNegative(anchor, a, 0), MineHardNegative(anchor, b, 0));
  }
}

TEST(MineBatchTripletsTest, RespectsFamiliesAndLabels) {
  RngStream rng(10, 0);
  data::SynthConfig sc;
  sc.classes = 3;
  sc.per_class = 4;
  sc.image_dim = 5;
  sc.vocab = 8;
  const auto records = data::SynthMultimodal(sc);
  const EncoderParams enc = SmallEncoder(rng);
  std::vector<SampleRef> samples;
  std::vector<Tensor> emb;
  for (std::size_t i = 0; i < records.size(); ++i) {
    samples.push_back({i, Modality::kText});
    emb.push_back(EncodeText(*records[i].tokens, enc));
    samples.push_back({i, Modality::kImage});
    emb.push_back(EncodeImage(*records[i].image, enc));
  }
  const auto triplets = MineBatchTriplets(samples, emb, records, PairMeasure::kDistance, rng);
  EXPECT_EQ(triplets.size(), 3 * records.size());
  for (const auto& t : triplets) {
    const auto label = [&](std::size_t s) { return records[samples[s].record].label; };
    EXPECT_EQ(label(t.anchor), label(t.positive));
    EXPECT_NE(label(t.anchor), label(t.negative));
    EXPECT_NE(samples[t.anchor].record, samples[t.positive].record);
    const Modality other = t.family == TripletFamily::kTextImage ? Modality::kImage
                                                                 : Modality::kText;
    EXPECT_EQ(samples[t.positive].modality, other);
    EXPECT_EQ(samples[t.negative].modality, other);
    // The negative is the hardest one of its modality in the batch.
    for (std::size_t s = 0; s < samples.size(); ++s) {
      if (samples[s].modality != other || label(s) == label(t.anchor)) continue;
      EXPECT_LE(PairScore(emb[t.anchor], emb[t.negative], PairMeasure::kDistance),
                PairScore(emb[t.anchor], emb[s], PairMeasure::kDistance));
    }
  }
}

FusionParams SmallFusion(RngStream& rng) {
  ModelDims d;
  d.embed = 3;
  d.fusion_hidden = 6;
  d.classes = 4;
  return FusionParams::Init(d, rng);
}

TEST(FusePredictTest, ZeroParamsGiveUniform) {
  RngStream rng(11, 0);
  FusionParams m = SmallFusion(rng).ZerosLike();
  const Tensor p = FusePredict(Tensor::Vector({1, -2, 3}), m);
  EXPECT_THAT(p.values(), Each(DoubleNear(0.25, 1e-15)));
}

TEST(FusePredictTest, ProbabilityVectorAndBruteForceArgmax) {
  RngStream rng(12, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const FusionParams m = SmallFusion(rng);
    const Tensor e = Tensor::Vector({rng.Normal(), rng.Normal(), rng.Normal()});
    const Tensor p = FusePredict(e, m);
    EXPECT_THAT(p.values(), Each(Gt(0.0)));
    EXPECT_THAT(p.values(), Each(Lt(1.0)));
    EXPECT_NEAR(std::accumulate(p.values().begin(), p.values().end(), 0.0), 1.0, 1e-12);
    // Direct evaluation of W2 relu(W1 e + b1) + b2.
    std::vector<double> h(6), z(4);
    for (std::size_t r = 0; r < 6; ++r) {
      double acc = m.b1[r];
      for (std::size_t c = 0; c < 3; ++c) acc += m.w1.at(r, c) * e[c];
      h[r] = acc > 0 ? acc : 0;
    }
    for (std::size_t r = 0; r < 4; ++r) {
      z[r] = m.b2[r];
      for (std::size_t c = 0; c < 6; ++c) z[r] += m.w2.at(r, c) * h[c];
    }
    const auto oracle = std::max_element(z.begin(), z.end()) - z.begin();
    EXPECT_EQ(std::max_element(p.values().begin(), p.values().end()) - p.values().begin(),
              oracle);
  }
}

TEST(FusePredictTest, RejectsWrongEmbeddingSize) {
  RngStream rng(13, 0);
  EXPECT_THROW(FusePredict(Tensor({4}), SmallFusion(rng)), ShapeError);
}

TEST(PredictRecordTest, SingleAndBothModalities) {
  RngStream rng(14, 0);
  const EncoderParams enc = SmallEncoder(rng);
  const FusionParams m = SmallFusion(rng);
  Record text_only;
  text_only.tokens = TokenIds{1, 2, 5};
  EXPECT_EQ(PredictRecord(text_only, enc, m), FusePredict(EncodeText(*text_only.tokens, enc), m));

  Record both = text_only;
  both.image = Tensor::Vector({0.1, 0.2, -0.3, 0.4, 0.5});
  const Tensor mean =
      (EncodeText(*both.tokens, enc) + EncodeImage(*both.image, enc)) * 0.5;
  const Tensor got = PredictRecord(both, enc, m);
  const Tensor want = FusePredict(mean, m);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-15);
  EXPECT_EQ(PredictRecord(both, enc, m), got);  // no randomness at inference

  EXPECT_THROW(PredictRecord(Record{}, enc, m), InputError);
}

TEST(PredictRecordTest, IdenticalEmbeddingsMatchEitherAlone) {
  // Text and image encoders reduced to their (equal) biases.
  RngStream rng(15, 0);
  EncoderParams enc = SmallEncoder(rng);
  enc.token_table = Tensor(enc.token_table.shape());
  enc.image_w2 = Tensor(enc.image_w2.shape());
  enc.text_b = enc.image_b2 = Tensor::Vector({0.3, -0.7, 1.1});
  const FusionParams m = SmallFusion(rng);
  Record both;
  both.tokens = TokenIds{0};
  both.image = Tensor({5});
  Record image_only;
  image_only.image = both.image;
  EXPECT_EQ(PredictRecord(both, enc, m), PredictRecord(image_only, enc, m));
}

TEST(GradientTest, RandomizedSuiteWithinTolerance) {
  for (const auto& c : testing::RunGradientSuite(70, 2024)) {
    EXPECT_LT(c.relative_error, 1e-4) << c.name;
  }
}

data::SynthConfig PretrainData() {
  data::SynthConfig sc;
  sc.classes = 4;
  sc.per_class = 40;
  sc.image_dim = 64;
  sc.vocab = 64;
  sc.noise_sigma = 0.3;
  sc.seed = 77;
  return sc;
}

ModelDims PretrainDims() {
  ModelDims d;
  d.image_dim = 64;
  d.classes = 4;
  return d;
}

TEST(PretrainTest, ZeroLearningRateLeavesParametersUnchanged) {
  RngStream rng(16, 0);
  const auto train = data::SynthMultimodal(PretrainData());
  const EncoderParams init = EncoderParams::Init(PretrainDims(), rng);
  PretrainOptions opts;
  opts.epochs = 2;
  opts.lr = 0.0;
  const auto result = Pretrain(train, init, TripletConfig{}, opts, rng);
  ModelParams a, b;
  init.AppendTo(a);
  result.encoders.AppendTo(b);
  EXPECT_EQ(a, b);
}

TEST(PretrainTest, SeparatesClassesOnHeldOutData) {
  RngStream rng(17, 0);
  const auto train = data::SynthMultimodal(PretrainData(), 0);
  const auto held_out = data::SynthMultimodal(PretrainData(), 1);
  const EncoderParams init = EncoderParams::Init(PretrainDims(), rng);
  PretrainOptions opts;
  opts.epochs = 8;
  const auto result = Pretrain(train, init, TripletConfig{}, opts, rng);
  ASSERT_EQ(result.epoch_loss.size(), 8u);
  EXPECT_LE(result.epoch_loss.back(), result.epoch_loss.front());
  const auto g = MeasureGeometry(held_out, result.encoders);
  // mean intra-class similarity > mean inter-class similarity
  EXPECT_LT(g.mean_intra_distance, g.mean_inter_distance);
}

TEST(PretrainTest, RejectsDegenerateDatasets) {
  RngStream rng(18, 0);
  auto train = data::SynthMultimodal(PretrainData());
  const EncoderParams init = EncoderParams::Init(PretrainDims(), rng);
  auto one_class = train;
  for (auto& r : one_class) r.label = 0;
  EXPECT_THROW(Pretrain(one_class, init, TripletConfig{}, {}, rng), InputError);
  for (auto& r : train) r.image.reset();
  EXPECT_THROW(Pretrain(train, init, TripletConfig{}, {}, rng), InputError);
}

TEST(ParamsTest, NamedRoundTrip) {
  RngStream rng(19, 0);
  const EncoderParams enc = SmallEncoder(rng);
  const FusionParams m = SmallFusion(rng);
  ModelParams p;
  enc.AppendTo(p);
  m.AppendTo(p);
  EXPECT_EQ(p.size(), 11u);
  ModelParams q;
  EncoderParams::FromParams(p).AppendTo(q);
  FusionParams::FromParams(p).AppendTo(q);
  EXPECT_EQ(p, q);
}

}  // namespace
}  // namespace fedroad::models
