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


#ifndef FEDROAD_MODELS_H_
#define FEDROAD_MODELS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fedroad/params.h"
#include "fedroad/record.h"
#include "fedroad/rng.h"
#include "fedroad/tensor.h"

// Toy-scale multimodal hazard detector: a text encoder (token-embedding mean
// followed by an affine map), an image encoder (affine, tanh, affine), a
// fusion block (affine, ReLU, affine) and the combined cross-modal triplet
// loss used to pretrain the encoders.
namespace fedroad::models {

struct ModelDims {
  std::size_t vocab = 64;          // V
  std::size_t hidden = 32;         // h, encoder hidden width
  std::size_t embed = 16;          // k, shared embedding width
  std::size_t image_dim = 32 * 32; // flattened image length
  std::size_t fusion_hidden = 32;
  std::size_t classes = 5;         // C

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct EncoderParams {
  Tensor token_table;  // V x h
  Tensor text_w;       // k x h
  Tensor text_b;       // k
  Tensor image_w1;     // h x d_img
  Tensor image_b1;     // h
  Tensor image_w2;     // k x h
  Tensor image_b2;     // k

  // Glorot-uniform weights rounded to float32, zero biases.
  static EncoderParams Init(const ModelDims& dims, RngStream& rng);
  EncoderParams ZerosLike() const;
  std::size_t vocab() const { return token_table.dim(0); }
  std::size_t embed() const { return text_b.size(); }
  std::size_t image_dim() const { return image_w1.dim(1); }

  // Tensors are registered under "text.*" and "image.*".
  void AppendTo(ModelParams& params) const;
  static EncoderParams FromParams(const ModelParams& params);
};

struct FusionParams {
  Tensor w1;  // fusion_hidden x k
  Tensor b1;
  Tensor w2;  // C x fusion_hidden
  Tensor b2;

  static FusionParams Init(const ModelDims& dims, RngStream& rng);
  FusionParams ZerosLike() const;
  std::size_t classes() const { return b2.size(); }

  // Tensors are registered under "fusion.*".
  void AppendTo(ModelParams& params) const;
  static FusionParams FromParams(const ModelParams& params);
};

// How the "cos(., .)" of the triplet terms is read. kDistance uses
// 1 - cosine similarity; kLiteralSimilarity plugs in the raw similarity.
enum class PairMeasure { kDistance, kLiteralSimilarity };

struct TripletConfig {
  double alpha = 0.1;   // weight of the text-only term
  double margin = 0.2;  // c
  double floor = 0.0;   // m
  PairMeasure measure = PairMeasure::kDistance;

  // Throws InputError unless margin >= 0 and floor <= margin.
  void Validate() const;

  friend bool operator==(const TripletConfig&, const TripletConfig&) = default;
};

double PairScore(const Tensor& u, const Tensor& v, PairMeasure measure);

// ---------------------------------------------------------------- encoders

// Throws InputError on an empty list or an out-of-vocabulary id.
Tensor EncodeText(std::span<const std::uint32_t> tokens, const EncoderParams& p);
// Throws ShapeError when the image length differs from image_dim.
Tensor EncodeImage(const Tensor& image, const EncoderParams& p);

// Accumulate d(loss)/d(params) given d(loss)/d(embedding) into `grad`.
void EncodeTextBackward(std::span<const std::uint32_t> tokens,
                        const EncoderParams& p, const Tensor& d_embedding,
                        EncoderParams& grad);
void EncodeImageBackward(const Tensor& image, const EncoderParams& p,
                         const Tensor& d_embedding, EncoderParams& grad);

// ------------------------------------------------------------------ triplets

// max{ score(a,p) - score(a,n) + c, m }. Throws DomainError on zero norms.
double TripletTerm(const Tensor& a, const Tensor& p, const Tensor& n,
                   const TripletConfig& cfg);

struct TripletTermGrad {
  double loss;
  Tensor d_anchor;
  Tensor d_positive;
  Tensor d_negative;
};
// Gradients are zero when the floor is active.
TripletTermGrad TripletTermWithGrad(const Tensor& a, const Tensor& p,
                                    const Tensor& n, const TripletConfig& cfg);

// (a_t, p_t, n_t), (a_t, p_i, n_i), (a_i, p_t, n_t).
enum class TripletFamily { kTextText, kTextImage, kImageText };

struct EmbeddedSample {
  Modality modality;
  Tensor embedding;
  std::size_t label;
};

struct Triplet {
  TripletFamily family;
  EmbeddedSample anchor;
  EmbeddedSample positive;
  EmbeddedSample negative;
};

using TripletBatch = std::vector<Triplet>;

struct CombinedTripletResult {
  double loss;
  std::vector<TripletTermGrad> grads;  // one per triplet, already weighted
};

// alpha * L(text-text) + L(text-image) + L(image-text) summed over the batch.
// Throws InputError if a family is missing, modalities do not match the
// family, or labels violate anchor == positive != negative.
CombinedTripletResult CombinedTripletLoss(const TripletBatch& batch,
                                          const TripletConfig& cfg);

struct Candidate {
  const Tensor* embedding;
  std::size_t label;
};

// Index of the candidate with label != anchor_label that minimizes
// PairScore(anchor, candidate); lowest index wins ties. Throws InputError when
// no candidate qualifies.
std::size_t MineHardNegative(const Tensor& anchor,
                             std::span<const Candidate> candidates,
                             std::size_t anchor_label,
                             PairMeasure measure = PairMeasure::kDistance);

// A modality-specific view of one record inside a batch.
struct SampleRef {
  std::size_t record;
  Modality modality;
};

struct IndexTriplet {
  TripletFamily family;
  std::size_t anchor;  // indices into the sample list
  std::size_t positive;
  std::size_t negative;
};

// In-batch triplet construction: every text sample anchors a text-text and a
// text-image triplet, every image sample anchors an image-text triplet. The
// positive is a random same-label sample of the required modality (another
// record when possible); the negative is the hardest one in the batch.
std::vector<IndexTriplet> MineBatchTriplets(std::span<const SampleRef> samples,
                                            std::span<const Tensor> embeddings,
                                            std::span<const Record> records,
                                            PairMeasure measure, RngStream& rng);

struct EncoderLossResult {
  double loss = 0.0;  // summed over triplets
  std::size_t triplets = 0;
  EncoderParams grad;
};

// Encodes the samples, evaluates the weighted triplet sum over `triplets` and
// backpropagates into encoder-parameter gradients.
EncoderLossResult TripletLossForEncoders(std::span<const Record> records,
                                         std::span<const SampleRef> samples,
                                         std::span<const IndexTriplet> triplets,
                                         const EncoderParams& enc,
                                         const TripletConfig& cfg);

// -------------------------------------------------------------------- fusion

Tensor FusionLogits(const Tensor& embedding, const FusionParams& m);
// softmax(M(embedding)). Throws ShapeError on a dimension mismatch.
Tensor FusePredict(const Tensor& embedding, const FusionParams& m);

// Embedding of a record: the present modality, or the mean of both.
// Throws InputError when neither modality is present.
Tensor EmbedRecord(const Record& record, const EncoderParams& enc);
Tensor PredictRecord(const Record& record, const EncoderParams& enc,
                     const FusionParams& fusion);

// Cross-entropy of PredictRecord against record.label, with gradients for the
// encoders and the fusion block. Gradients accumulate into the non-null outputs.
double ClassifierLossAndGrad(const Record& record, const EncoderParams& enc,
                             const FusionParams& fusion, EncoderParams* d_enc,
                             FusionParams* d_fusion);

// ---------------------------------------------------------------- pretraining

struct PretrainOptions {
  std::size_t epochs = 10;
  double lr = 0.05;
  std::size_t batch = 32;

  friend bool operator==(const PretrainOptions&, const PretrainOptions&) = default;
};

struct PretrainResult {
  EncoderParams encoders;
  std::vector<double> epoch_loss;  // mean per-triplet loss per epoch
};

// Gradient descent on the combined triplet loss with per-batch hard-negative
// mining. Each step moves by lr times the mean per-triplet gradient. Throws
// InputError for fewer than two classes or a missing modality.
PretrainResult Pretrain(std::span<const Record> dataset, EncoderParams init,
                        const TripletConfig& cfg, const PretrainOptions& opts,
                        RngStream& rng);

// Embedding-space diagnostics on a labeled set with both modalities.
struct EmbeddingGeometry {
  double mean_intra_distance;  // same label, any modality pair
  double mean_inter_distance;
  double cross_modal_retrieval;  // nearest opposite-modality sample has same label
};
EmbeddingGeometry MeasureGeometry(std::span<const Record> records,
                                  const EncoderParams& enc);

}  // namespace fedroad::models

#endif  // FEDROAD_MODELS_H_
