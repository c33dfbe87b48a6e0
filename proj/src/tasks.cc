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


#include "fedroad/tasks.h"

#include <algorithm>
#include <cmath>

#include "fedroad/errors.h"
#include "fedroad/kernels.h"
#include "fedroad/numeric.h"

namespace fedroad::fedsim {
namespace {

constexpr std::size_t kEvalChunk = 256;

Tensor GlorotUniform(std::size_t rows, std::size_t cols, RngStream& rng) {
  Tensor t({rows, cols});
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : t.data()) v = static_cast<float>(rng.Uniform(-limit, limit));
  return t;
}

std::size_t ArgMax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

DenseDataset DenseFromImages(std::span<const Record> records) {
  if (records.empty()) return {Tensor({0, 0}), {}};
  if (!records[0].has_image()) throw InputError("record 0 has no image");
  const std::size_t d = records[0].image->size();
  DenseDataset out{Tensor({records.size(), d}), {}};
  out.labels.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].has_image() || records[i].image->size() != d) {
      throw InputError("record " + std::to_string(i) +
                       " lacks an image of the common size");
    }
    std::copy_n(records[i].image->data().begin(), d, out.features.data().begin() + i * d);
    out.labels.push_back(records[i].label);
  }
  return out;
}

// ------------------------------------------------------------------- dense

DenseClassificationTask::DenseClassificationTask(DenseDataset train, DenseDataset test,
                                                 std::size_t hidden, std::size_t classes)
    : train_(std::move(train)), test_(std::move(test)), hidden_(hidden), classes_(classes) {
  if (classes_ < 2) throw InputError("classification needs at least 2 classes");
  if (train_.size() > 0 && test_.size() > 0 && train_.dim() != test_.dim()) {
    throw ShapeError("train and test feature widths differ");
  }
  for (auto l : train_.labels) {
    if (l >= classes_) throw InputError("training label exceeds class count");
  }
  for (auto l : test_.labels) {
    if (l >= classes_) throw InputError("test label exceeds class count");
  }
}

ModelParams DenseClassificationTask::InitParams(RngStream& rng) const {
  const std::size_t d = train_.size() > 0 ? train_.dim() : test_.dim();
  ModelParams p;
  if (hidden_ == 0) {
    p.Add("dense.w", GlorotUniform(classes_, d, rng));
    p.Add("dense.b", Tensor({classes_}));
    return p;
  }
  p.Add("dense.w1", GlorotUniform(hidden_, d, rng));
  p.Add("dense.b1", Tensor({hidden_}));
  p.Add("dense.w2", GlorotUniform(classes_, hidden_, rng));
  p.Add("dense.b2", Tensor({classes_}));
  return p;
}

namespace {

// Forward pass of the MLP on `rows` of `x`; returns hidden activations and
// logits, both row-major.
struct DenseForward {
  std::vector<double> hidden;  // B x h (post-ReLU)
  std::vector<double> logits;  // B x C
};

DenseForward RunDense(const ModelParams& p, const Tensor& x,
                      std::span<const std::size_t> rows, std::size_t h, std::size_t c,
                      std::vector<double>& gathered) {
  const std::size_t b = rows.size();
  const std::size_t d = x.dim(1);
  gathered.resize(b * d);
  for (std::size_t i = 0; i < b; ++i) {
    std::copy_n(x.data().begin() + rows[i] * d, d, gathered.begin() + i * d);
  }
  DenseForward f{std::vector<double>(b * h), std::vector<double>(b * c)};
  std::span<const double> last_in = gathered;
  std::size_t last_width = d;
  if (h > 0) {
    const Tensor& w1 = p.tensor(0);
    const Tensor& b1 = p.tensor(1);
    kernels::MatMulNT(gathered, w1.data(), f.hidden, b, d, h);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < h; ++j) {
        double& v = f.hidden[i * h + j];
        v = std::max(v + b1[j], 0.0);
      }
    }
    last_in = f.hidden;
    last_width = h;
  }
  const Tensor& w_out = p.tensor(p.size() - 2);
  const Tensor& b_out = p.tensor(p.size() - 1);
  kernels::MatMulNT(last_in, w_out.data(), f.logits, b, last_width, c);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < c; ++j) f.logits[i * c + j] += b_out[j];
  }
  return f;
}

void CheckDenseLayout(const ModelParams& p, std::size_t d, std::size_t h, std::size_t c) {
  const bool ok = h == 0 ? p.size() == 2 && p.tensor(0).shape() == Shape{c, d}
                         : p.size() == 4 && p.tensor(0).shape() == Shape{h, d} &&
                               p.tensor(2).shape() == Shape{c, h};
  if (!ok) {
    throw ProtocolError("parameters do not match the dense task layout");
  }
}

}  // namespace

double DenseClassificationTask::LossAndGrad(const ModelParams& params,
                                            std::span<const std::size_t> indices,
                                            ModelParams& grad) const {
  const std::size_t d = train_.dim(), h = hidden_, c = classes_, b = indices.size();
  CheckDenseLayout(params, d, h, c);
  if (!grad.SameLayout(params)) grad = params.ZerosLike();
  if (b == 0) throw InputError("empty training batch");
  for (std::size_t i : indices) {
    if (i >= train_.size()) throw IndexError("training index out of range");
  }
  std::vector<double> x;
  DenseForward f = RunDense(params, train_.features, indices, h, c, x);

  // Softmax cross-entropy, turning logits into d(loss)/d(logits) in place.
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(b);
  std::vector<double>& dz2 = f.logits;
  for (std::size_t i = 0; i < b; ++i) {
    std::span<double> row(dz2.data() + i * c, c);
    SoftmaxInPlace(row);
    const std::size_t y = train_.labels[indices[i]];
    loss -= std::log(std::max(row[y], 1e-300));
    row[y] -= 1.0;
    for (double& v : row) v *= inv_b;
  }

  // Output layer: d(w_out) = dz2^T * input, d(b_out) = column sums of dz2.
  const std::size_t width = h > 0 ? h : d;
  std::span<const double> last_in = h > 0 ? std::span<const double>(f.hidden) : x;
  Tensor& dw_out = grad.tensor(grad.size() - 2);
  Tensor& db_out = grad.tensor(grad.size() - 1);
  kernels::MatMulTN(dz2, last_in, dw_out.data(), c, b, width, /*accumulate=*/false);
  std::fill(db_out.data().begin(), db_out.data().end(), 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < c; ++j) db_out[j] += dz2[i * c + j];
  }
  if (h == 0) return loss * inv_b;

  Tensor& dw1 = grad.tensor(0);
  Tensor& db1 = grad.tensor(1);
  std::vector<double> dz1(b * h);
  kernels::MatMul(dz2, params.tensor(2).data(), dz1, b, c, h);
  std::fill(db1.data().begin(), db1.data().end(), 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < h; ++j) {
      double& g = dz1[i * h + j];
      if (f.hidden[i * h + j] <= 0.0) g = 0.0;
      db1[j] += g;
    }
  }
  kernels::MatMulTN(dz1, x, dw1.data(), h, b, d, /*accumulate=*/false);
  return loss * inv_b;
}

std::vector<std::size_t> DenseClassificationTask::PredictTest(
    const ModelParams& params) const {
  CheckDenseLayout(params, test_.dim(), hidden_, classes_);
  std::vector<std::size_t> out;
  out.reserve(test_.size());
  std::vector<std::size_t> rows;
  std::vector<double> x;
  for (std::size_t start = 0; start < test_.size(); start += kEvalChunk) {
    const std::size_t end = std::min(test_.size(), start + kEvalChunk);
    rows.resize(end - start);
    for (std::size_t i = start; i < end; ++i) rows[i - start] = i;
    const DenseForward f = RunDense(params, test_.features, rows, hidden_, classes_, x);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.push_back(ArgMax({f.logits.data() + i * classes_, classes_}));
    }
  }
  return out;
}

EvalResult DenseClassificationTask::Evaluate(const ModelParams& params) const {
  CheckDenseLayout(params, test_.dim(), hidden_, classes_);
  EvalResult r;
  if (test_.size() == 0) return r;
  std::vector<std::size_t> rows;
  std::vector<double> x;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < test_.size(); start += kEvalChunk) {
    const std::size_t end = std::min(test_.size(), start + kEvalChunk);
    rows.resize(end - start);
    for (std::size_t i = start; i < end; ++i) rows[i - start] = i;
    DenseForward f = RunDense(params, test_.features, rows, hidden_, classes_, x);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::span<double> row(f.logits.data() + i * classes_, classes_);
      const std::size_t y = test_.labels[rows[i]];
      if (ArgMax(row) == y) ++correct;
      SoftmaxInPlace(row);
      r.loss -= std::log(std::max(row[y], 1e-300));
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(test_.size());
  r.loss /= static_cast<double>(test_.size());
  return r;
}

// -------------------------------------------------------------- multimodal

MultimodalTask::MultimodalTask(std::vector<Record> train, std::vector<Record> test,
                               models::ModelDims dims,
                               std::optional<models::EncoderParams> encoders,
                               bool freeze_encoders)
    : train_(std::move(train)),
      test_(std::move(test)),
      dims_(dims),
      encoders_(std::move(encoders)),
      freeze_(freeze_encoders) {
  if (freeze_ && !encoders_) throw InputError("frozen encoders require given encoders");
  for (const Record& r : test_) test_labels_.push_back(r.label);
  for (const auto* set : {&train_, &test_}) {
    for (const Record& r : *set) {
      if (r.label >= dims_.classes) throw InputError("label exceeds class count");
    }
  }
}

ModelParams MultimodalTask::InitParams(RngStream& rng) const {
  const models::EncoderParams enc =
      encoders_ ? *encoders_ : models::EncoderParams::Init(dims_, rng);
  const models::FusionParams fusion = models::FusionParams::Init(dims_, rng);
  ModelParams p;
  if (!freeze_) enc.AppendTo(p);
  fusion.AppendTo(p);
  return p;
}

models::EncoderParams MultimodalTask::Encoders(const ModelParams& params) const {
  return freeze_ ? *encoders_ : models::EncoderParams::FromParams(params);
}

double MultimodalTask::LossAndGrad(const ModelParams& params,
                                   std::span<const std::size_t> indices,
                                   ModelParams& grad) const {
  if (indices.empty()) throw InputError("empty training batch");
  const models::EncoderParams enc = Encoders(params);
  const models::FusionParams fusion = models::FusionParams::FromParams(params);
  models::EncoderParams d_enc = enc.ZerosLike();
  models::FusionParams d_fusion = fusion.ZerosLike();
  double loss = 0.0;
  for (std::size_t i : indices) {
    if (i >= train_.size()) throw IndexError("training index out of range");
    loss += models::ClassifierLossAndGrad(train_[i], enc, fusion,
                                          freeze_ ? nullptr : &d_enc, &d_fusion);
  }
  ModelParams g;
  if (!freeze_) d_enc.AppendTo(g);
  d_fusion.AppendTo(g);
  const double inv = 1.0 / static_cast<double>(indices.size());
  g *= inv;
  grad = std::move(g);
  return loss * inv;
}

std::vector<std::size_t> MultimodalTask::PredictTest(const ModelParams& params) const {
  const models::EncoderParams enc = Encoders(params);
  const models::FusionParams fusion = models::FusionParams::FromParams(params);
  std::vector<std::size_t> out;
  out.reserve(test_.size());
  for (const Record& r : test_) {
    out.push_back(ArgMax(models::FusionLogits(models::EmbedRecord(r, enc), fusion).data()));
  }
  return out;
}

EvalResult MultimodalTask::Evaluate(const ModelParams& params) const {
  const models::EncoderParams enc = Encoders(params);
  const models::FusionParams fusion = models::FusionParams::FromParams(params);
  EvalResult r;
  if (test_.empty()) return r;
  std::size_t correct = 0;
  for (const Record& rec : test_) {
    const Tensor logits = models::FusionLogits(models::EmbedRecord(rec, enc), fusion);
    if (ArgMax(logits.data()) == rec.label) ++correct;
    r.loss += SoftmaxCrossEntropy(logits, rec.label).loss;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(test_.size());
  r.loss /= static_cast<double>(test_.size());
  return r;
}

}  // namespace fedroad::fedsim
