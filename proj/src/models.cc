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


#include "fedroad/models.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedroad/errors.h"
#include "fedroad/numeric.h"

namespace fedroad::models {
namespace {

Tensor GlorotUniform(std::size_t rows, std::size_t cols, RngStream& rng) {
  Tensor t({rows, cols});
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : t.data()) v = static_cast<float>(rng.Uniform(-limit, limit));
  return t;
}

// y = W x + b for W[rows x cols].
Tensor Affine(const Tensor& w, const Tensor& b, std::span<const double> x) {
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  Tensor y = b;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data().data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
  return y;
}

// d_w += g x^T, d_b += g, returns W^T g.
Tensor AffineBackward(const Tensor& w, std::span<const double> x, const Tensor& g,
                      Tensor& d_w, Tensor& d_b) {
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  Tensor dx({cols});
  for (std::size_t r = 0; r < rows; ++r) {
    const double gr = g[r];
    d_b[r] += gr;
    if (gr == 0.0) continue;
    const double* wr = w.data().data() + r * cols;
    double* dwr = d_w.data().data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      dwr[c] += gr * x[c];
      dx[c] += gr * wr[c];
    }
  }
  return dx;
}

Tensor MeanTokenEmbedding(std::span<const std::uint32_t> tokens,
                          const EncoderParams& p) {
  if (tokens.empty()) throw InputError("EncodeText: empty token list");
  const std::size_t h = p.token_table.dim(1);
  Tensor pooled({h});
  for (std::uint32_t t : tokens) {
    if (t >= p.vocab()) {
      throw InputError("EncodeText: token id " + std::to_string(t) +
                       " outside vocabulary of " + std::to_string(p.vocab()));
    }
    const double* row = p.token_table.data().data() + t * h;
    for (std::size_t j = 0; j < h; ++j) pooled[j] += row[j];
  }
  pooled *= 1.0 / static_cast<double>(tokens.size());
  return pooled;
}

void CheckImage(const Tensor& image, const EncoderParams& p) {
  if (image.size() != p.image_dim()) {
    throw ShapeError("EncodeImage: image has " + std::to_string(image.size()) +
                     " values, encoder expects " + std::to_string(p.image_dim()));
  }
}

Modality AnchorModality(TripletFamily f) {
  return f == TripletFamily::kImageText ? Modality::kImage : Modality::kText;
}

Modality OtherModality(TripletFamily f) {
  return f == TripletFamily::kTextImage ? Modality::kImage : Modality::kText;
}

double FamilyWeight(TripletFamily f, const TripletConfig& cfg) {
  return f == TripletFamily::kTextText ? cfg.alpha : 1.0;
}

// Gradient of PairScore(u, v) w.r.t. u and v.
CosineGrad PairScoreGrad(const Tensor& u, const Tensor& v, PairMeasure measure) {
  CosineGrad g = CosineSimilarityWithGrad(u, v);
  if (measure == PairMeasure::kDistance) {
    g.value = 1.0 - g.value;
    g.d_u *= -1.0;
    g.d_v *= -1.0;
  }
  return g;
}

Tensor EmbedSample(const Record& r, Modality m, const EncoderParams& enc) {
  if (m == Modality::kText) return EncodeText(*r.tokens, enc);
  return EncodeImage(*r.image, enc);
}

}  // namespace

// ------------------------------------------------------------------ params

EncoderParams EncoderParams::Init(const ModelDims& d, RngStream& rng) {
  EncoderParams p;
  p.token_table = GlorotUniform(d.vocab, d.hidden, rng);
  p.text_w = GlorotUniform(d.embed, d.hidden, rng);
  p.text_b = Tensor({d.embed});
  p.image_w1 = GlorotUniform(d.hidden, d.image_dim, rng);
  p.image_b1 = Tensor({d.hidden});
  p.image_w2 = GlorotUniform(d.embed, d.hidden, rng);
  p.image_b2 = Tensor({d.embed});
  return p;
}

EncoderParams EncoderParams::ZerosLike() const {
  return {Tensor(token_table.shape()), Tensor(text_w.shape()),
          Tensor(text_b.shape()),      Tensor(image_w1.shape()),
          Tensor(image_b1.shape()),    Tensor(image_w2.shape()),
          Tensor(image_b2.shape())};
}

void EncoderParams::AppendTo(ModelParams& params) const {
  params.Add("text.table", token_table);
  params.Add("text.w", text_w);
  params.Add("text.b", text_b);
  params.Add("image.w1", image_w1);
  params.Add("image.b1", image_b1);
  params.Add("image.w2", image_w2);
  params.Add("image.b2", image_b2);
}

EncoderParams EncoderParams::FromParams(const ModelParams& params) {
  return {params.Get("text.table"), params.Get("text.w"),  params.Get("text.b"),
          params.Get("image.w1"),   params.Get("image.b1"), params.Get("image.w2"),
          params.Get("image.b2")};
}

FusionParams FusionParams::Init(const ModelDims& d, RngStream& rng) {
  FusionParams m;
  m.w1 = GlorotUniform(d.fusion_hidden, d.embed, rng);
  m.b1 = Tensor({d.fusion_hidden});
  m.w2 = GlorotUniform(d.classes, d.fusion_hidden, rng);
  m.b2 = Tensor({d.classes});
  return m;
}

FusionParams FusionParams::ZerosLike() const {
  return {Tensor(w1.shape()), Tensor(b1.shape()), Tensor(w2.shape()),
          Tensor(b2.shape())};
}

void FusionParams::AppendTo(ModelParams& params) const {
  params.Add("fusion.w1", w1);
  params.Add("fusion.b1", b1);
  params.Add("fusion.w2", w2);
  params.Add("fusion.b2", b2);
}

FusionParams FusionParams::FromParams(const ModelParams& params) {
  return {params.Get("fusion.w1"), params.Get("fusion.b1"),
          params.Get("fusion.w2"), params.Get("fusion.b2")};
}

void TripletConfig::Validate() const {
  if (!(margin >= 0.0)) throw InputError("triplet margin c must be >= 0");
  if (!(floor <= margin)) throw InputError("triplet floor m must not exceed c");
}

double PairScore(const Tensor& u, const Tensor& v, PairMeasure measure) {
  const double s = CosineSimilarity(u, v);
  return measure == PairMeasure::kDistance ? 1.0 - s : s;
}

// ---------------------------------------------------------------- encoders

Tensor EncodeText(std::span<const std::uint32_t> tokens, const EncoderParams& p) {
  const Tensor pooled = MeanTokenEmbedding(tokens, p);
  return Affine(p.text_w, p.text_b, pooled.data());
}

Tensor EncodeImage(const Tensor& image, const EncoderParams& p) {
  CheckImage(image, p);
  Tensor hidden = Affine(p.image_w1, p.image_b1, image.data());
  for (double& v : hidden.data()) v = std::tanh(v);
  return Affine(p.image_w2, p.image_b2, hidden.data());
}

void EncodeTextBackward(std::span<const std::uint32_t> tokens,
                        const EncoderParams& p, const Tensor& d_embedding,
                        EncoderParams& grad) {
  const Tensor pooled = MeanTokenEmbedding(tokens, p);
  const Tensor d_pooled =
      AffineBackward(p.text_w, pooled.data(), d_embedding, grad.text_w, grad.text_b);
  const std::size_t h = p.token_table.dim(1);
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (std::uint32_t t : tokens) {
    double* row = grad.token_table.data().data() + t * h;
    for (std::size_t j = 0; j < h; ++j) row[j] += inv * d_pooled[j];
  }
}

void EncodeImageBackward(const Tensor& image, const EncoderParams& p,
                         const Tensor& d_embedding, EncoderParams& grad) {
  CheckImage(image, p);
  Tensor hidden = Affine(p.image_w1, p.image_b1, image.data());
  for (double& v : hidden.data()) v = std::tanh(v);
  Tensor d_hidden = AffineBackward(p.image_w2, hidden.data(), d_embedding,
                                   grad.image_w2, grad.image_b2);
  for (std::size_t j = 0; j < hidden.size(); ++j) {
    d_hidden[j] *= 1.0 - hidden[j] * hidden[j];
  }
  AffineBackward(p.image_w1, image.data(), d_hidden, grad.image_w1, grad.image_b1);
}

// ------------------------------------------------------------------ triplets

double TripletTerm(const Tensor& a, const Tensor& p, const Tensor& n,
                   const TripletConfig& cfg) {
  return std::max(PairScore(a, p, cfg.measure) - PairScore(a, n, cfg.measure) +
                      cfg.margin,
                  cfg.floor);
}

TripletTermGrad TripletTermWithGrad(const Tensor& a, const Tensor& p,
                                    const Tensor& n, const TripletConfig& cfg) {
  const CosineGrad ap = PairScoreGrad(a, p, cfg.measure);
  const CosineGrad an = PairScoreGrad(a, n, cfg.measure);
  const double hinge = ap.value - an.value + cfg.margin;
  if (hinge <= cfg.floor) {
    return {cfg.floor, Tensor(a.shape()), Tensor(p.shape()), Tensor(n.shape())};
  }
  Tensor d_anchor = ap.d_u - an.d_u;
  Tensor d_negative = an.d_v * -1.0;
  return {hinge, std::move(d_anchor), ap.d_v, std::move(d_negative)};
}

CombinedTripletResult CombinedTripletLoss(const TripletBatch& batch,
                                          const TripletConfig& cfg) {
  cfg.Validate();
  bool seen[3] = {false, false, false};
  for (const Triplet& t : batch) {
    const Modality am = AnchorModality(t.family);
    const Modality om = OtherModality(t.family);
    if (t.anchor.modality != am || t.positive.modality != om ||
        t.negative.modality != om) {
      throw InputError("triplet modalities do not match its family");
    }
    if (t.anchor.label != t.positive.label || t.anchor.label == t.negative.label) {
      throw InputError("triplet labels must satisfy anchor == positive != negative");
    }
    seen[static_cast<int>(t.family)] = true;
  }
  if (!seen[0] || !seen[1] || !seen[2]) {
    throw InputError(
        "combined triplet loss needs text-text, text-image and image-text triplets");
  }
  CombinedTripletResult out{0.0, {}};
  out.grads.reserve(batch.size());
  for (const Triplet& t : batch) {
    TripletTermGrad g = TripletTermWithGrad(t.anchor.embedding, t.positive.embedding,
                                            t.negative.embedding, cfg);
    const double w = FamilyWeight(t.family, cfg);
    out.loss += w * g.loss;
    g.loss *= w;
    g.d_anchor *= w;
    g.d_positive *= w;
    g.d_negative *= w;
    out.grads.push_back(std::move(g));
  }
  return out;
}

std::size_t MineHardNegative(const Tensor& anchor,
                             std::span<const Candidate> candidates,
                             std::size_t anchor_label, PairMeasure measure) {
  std::size_t best = candidates.size();
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].label == anchor_label) continue;
    const double s = PairScore(anchor, *candidates[i].embedding, measure);
    if (s < best_score) {
      best_score = s;
      best = i;
    }
  }
  if (best == candidates.size()) {
    throw InputError("MineHardNegative: no candidate with a different label");
  }
  return best;
}

std::vector<IndexTriplet> MineBatchTriplets(std::span<const SampleRef> samples,
                                            std::span<const Tensor> embeddings,
                                            std::span<const Record> records,
                                            PairMeasure measure, RngStream& rng) {
  std::vector<IndexTriplet> out;
  auto label_of = [&](std::size_t s) { return records[samples[s].record].label; };

  auto pick_positive = [&](std::size_t anchor, Modality m) -> std::optional<std::size_t> {
    std::vector<std::size_t> other_record, same_record;
    for (std::size_t j = 0; j < samples.size(); ++j) {
      if (j == anchor || samples[j].modality != m || label_of(j) != label_of(anchor)) {
        continue;
      }
      (samples[j].record == samples[anchor].record ? same_record : other_record)
          .push_back(j);
    }
    const auto& pool = other_record.empty() ? same_record : other_record;
    if (pool.empty()) return std::nullopt;
    return pool[rng.UniformInt(pool.size())];
  };

  auto pick_negative = [&](std::size_t anchor, Modality m) -> std::optional<std::size_t> {
    std::vector<Candidate> cands;
    std::vector<std::size_t> ids;
    for (std::size_t j = 0; j < samples.size(); ++j) {
      if (samples[j].modality != m) continue;
      cands.push_back({&embeddings[j], label_of(j)});
      ids.push_back(j);
    }
    const bool any = std::any_of(cands.begin(), cands.end(), [&](const Candidate& c) {
      return c.label != label_of(anchor);
    });
    if (!any) return std::nullopt;
    return ids[MineHardNegative(embeddings[anchor], cands, label_of(anchor), measure)];
  };

  auto emit = [&](TripletFamily family, std::size_t anchor) {
    const Modality m = OtherModality(family);
    const auto pos = pick_positive(anchor, m);
    if (!pos) return;
    const auto neg = pick_negative(anchor, m);
    if (!neg) return;
    out.push_back({family, anchor, *pos, *neg});
  };

  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (samples[s].modality == Modality::kText) {
      emit(TripletFamily::kTextText, s);
      emit(TripletFamily::kTextImage, s);
    } else {
      emit(TripletFamily::kImageText, s);
    }
  }
  return out;
}

EncoderLossResult TripletLossForEncoders(std::span<const Record> records,
                                         std::span<const SampleRef> samples,
                                         std::span<const IndexTriplet> triplets,
                                         const EncoderParams& enc,
                                         const TripletConfig& cfg) {
  std::vector<Tensor> emb;
  emb.reserve(samples.size());
  for (const SampleRef& s : samples) {
    emb.push_back(EmbedSample(records[s.record], s.modality, enc));
  }
  std::vector<Tensor> d_emb;
  d_emb.reserve(samples.size());
  for (const Tensor& e : emb) d_emb.emplace_back(e.shape());

  EncoderLossResult out{0.0, triplets.size(), enc.ZerosLike()};
  for (const IndexTriplet& t : triplets) {
    const TripletTermGrad g =
        TripletTermWithGrad(emb[t.anchor], emb[t.positive], emb[t.negative], cfg);
    const double w = FamilyWeight(t.family, cfg);
    out.loss += w * g.loss;
    d_emb[t.anchor].Axpy(w, g.d_anchor);
    d_emb[t.positive].Axpy(w, g.d_positive);
    d_emb[t.negative].Axpy(w, g.d_negative);
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (L2Norm(d_emb[i].data()) == 0.0) continue;
    const Record& r = records[samples[i].record];
    if (samples[i].modality == Modality::kText) {
      EncodeTextBackward(*r.tokens, enc, d_emb[i], out.grad);
    } else {
      EncodeImageBackward(*r.image, enc, d_emb[i], out.grad);
    }
  }
  return out;
}

// -------------------------------------------------------------------- fusion

namespace {

struct FusionForward {
  Tensor hidden;  // post-ReLU
  Tensor logits;
};

FusionForward RunFusion(const Tensor& embedding, const FusionParams& m) {
  if (embedding.size() != m.w1.dim(1)) {
    throw ShapeError("fusion block expects embedding of size " +
                     std::to_string(m.w1.dim(1)) + ", got " +
                     std::to_string(embedding.size()));
  }
  Tensor hidden = Affine(m.w1, m.b1, embedding.data());
  for (double& v : hidden.data()) v = std::max(v, 0.0);
  Tensor logits = Affine(m.w2, m.b2, hidden.data());
  return {std::move(hidden), std::move(logits)};
}

}  // namespace

Tensor FusionLogits(const Tensor& embedding, const FusionParams& m) {
  return RunFusion(embedding, m).logits;
}

Tensor FusePredict(const Tensor& embedding, const FusionParams& m) {
  return Softmax(FusionLogits(embedding, m));
}

Tensor EmbedRecord(const Record& record, const EncoderParams& enc) {
  if (record.has_text() && record.has_image()) {
    Tensor e = EncodeText(*record.tokens, enc);
    e += EncodeImage(*record.image, enc);
    e *= 0.5;
    return e;
  }
  if (record.has_text()) return EncodeText(*record.tokens, enc);
  if (record.has_image()) return EncodeImage(*record.image, enc);
  throw InputError("record has neither text nor image");
}

Tensor PredictRecord(const Record& record, const EncoderParams& enc,
                     const FusionParams& fusion) {
  return FusePredict(EmbedRecord(record, enc), fusion);
}

double ClassifierLossAndGrad(const Record& record, const EncoderParams& enc,
                             const FusionParams& fusion, EncoderParams* d_enc,
                             FusionParams* d_fusion) {
  const Tensor embedding = EmbedRecord(record, enc);
  const FusionForward fwd = RunFusion(embedding, fusion);
  const LossAndGrad ce = SoftmaxCrossEntropy(fwd.logits, record.label);
  if (d_enc == nullptr && d_fusion == nullptr) return ce.loss;

  FusionParams scratch;
  FusionParams& fg = d_fusion != nullptr ? *d_fusion : (scratch = fusion.ZerosLike());
  Tensor d_hidden = AffineBackward(fusion.w2, fwd.hidden.data(), ce.grad, fg.w2, fg.b2);
  for (std::size_t j = 0; j < d_hidden.size(); ++j) {
    if (fwd.hidden[j] <= 0.0) d_hidden[j] = 0.0;
  }
  Tensor d_embedding = AffineBackward(fusion.w1, embedding.data(), d_hidden, fg.w1, fg.b1);
  if (d_enc == nullptr) return ce.loss;

  const bool both = record.has_text() && record.has_image();
  if (both) d_embedding *= 0.5;
  if (record.has_text()) EncodeTextBackward(*record.tokens, enc, d_embedding, *d_enc);
  if (record.has_image()) EncodeImageBackward(*record.image, enc, d_embedding, *d_enc);
  return ce.loss;
}

// ---------------------------------------------------------------- pretraining

namespace {

void ApplyStep(EncoderParams& p, const EncoderParams& g, double step) {
  p.token_table.Axpy(-step, g.token_table);
  p.text_w.Axpy(-step, g.text_w);
  p.text_b.Axpy(-step, g.text_b);
  p.image_w1.Axpy(-step, g.image_w1);
  p.image_b1.Axpy(-step, g.image_b1);
  p.image_w2.Axpy(-step, g.image_w2);
  p.image_b2.Axpy(-step, g.image_b2);
}

}  // namespace

PretrainResult Pretrain(std::span<const Record> dataset, EncoderParams init,
                        const TripletConfig& cfg, const PretrainOptions& opts,
                        RngStream& rng) {
  cfg.Validate();
  if (opts.batch < 2) throw InputError("pretraining batch must hold >= 2 records");
  std::vector<std::size_t> labels;
  bool any_text = false, any_image = false;
  for (const Record& r : dataset) {
    labels.push_back(r.label);
    any_text |= r.has_text();
    any_image |= r.has_image();
  }
  std::sort(labels.begin(), labels.end());
  if (std::unique(labels.begin(), labels.end()) - labels.begin() < 2) {
    throw InputError("pretraining needs at least two classes");
  }
  if (!any_text || !any_image) {
    throw InputError("pretraining needs both text and image samples");
  }

  PretrainResult result{std::move(init), {}};
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.Shuffle(std::span(order));
    double epoch_loss = 0.0;
    std::size_t epoch_triplets = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch) {
      const std::size_t end = std::min(order.size(), start + opts.batch);
      std::vector<Record> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
      std::vector<SampleRef> samples;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].has_text()) samples.push_back({i, Modality::kText});
        if (batch[i].has_image()) samples.push_back({i, Modality::kImage});
      }
      std::vector<Tensor> emb;
      for (const SampleRef& s : samples) {
        emb.push_back(EmbedSample(batch[s.record], s.modality, result.encoders));
      }
      const std::vector<IndexTriplet> triplets =
          MineBatchTriplets(samples, emb, batch, cfg.measure, rng);
      if (triplets.empty()) continue;
      const EncoderLossResult r =
          TripletLossForEncoders(batch, samples, triplets, result.encoders, cfg);
      epoch_loss += r.loss;
      epoch_triplets += r.triplets;
      ApplyStep(result.encoders, r.grad, opts.lr / static_cast<double>(r.triplets));
    }
    result.epoch_loss.push_back(
        epoch_triplets == 0 ? 0.0 : epoch_loss / static_cast<double>(epoch_triplets));
  }
  return result;
}

EmbeddingGeometry MeasureGeometry(std::span<const Record> records,
                                  const EncoderParams& enc) {
  struct Item {
    Tensor emb;
    std::size_t label;
    std::size_t record;
    Modality modality;
  };
  std::vector<Item> items;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Record& r = records[i];
    if (r.has_text()) items.push_back({EncodeText(*r.tokens, enc), r.label, i, Modality::kText});
    if (r.has_image()) items.push_back({EncodeImage(*r.image, enc), r.label, i, Modality::kImage});
  }
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  std::vector<double> best_sim(items.size(), -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> best_label(items.size(), 0);
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      const double sim = CosineSimilarity(items[i].emb, items[j].emb);
      if (items[i].label == items[j].label) {
        intra += 1.0 - sim;
        ++n_intra;
      } else {
        inter += 1.0 - sim;
        ++n_inter;
      }
      if (items[i].modality != items[j].modality && items[i].record != items[j].record) {
        if (sim > best_sim[i]) {
          best_sim[i] = sim;
          best_label[i] = items[j].label;
        }
        if (sim > best_sim[j]) {
          best_sim[j] = sim;
          best_label[j] = items[i].label;
        }
      }
    }
  }
  std::size_t hits = 0, queries = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!std::isfinite(best_sim[i])) continue;
    ++queries;
    if (best_label[i] == items[i].label) ++hits;
  }
  return {n_intra ? intra / static_cast<double>(n_intra) : 0.0,
          n_inter ? inter / static_cast<double>(n_inter) : 0.0,
          queries ? static_cast<double>(hits) / static_cast<double>(queries) : 0.0};
}

}  // namespace fedroad::models
