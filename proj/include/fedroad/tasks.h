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


#ifndef FEDROAD_TASKS_H_
#define FEDROAD_TASKS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fedroad/models.h"
#include "fedroad/params.h"
#include "fedroad/record.h"
#include "fedroad/rng.h"
#include "fedroad/tensor.h"

// Learning problems the federation trains. Implementations are immutable after
// construction, so clients may call them concurrently.
namespace fedroad::fedsim {

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;  // mean cross-entropy
};

class FederatedTask {
 public:
  virtual ~FederatedTask() = default;

  virtual ModelParams InitParams(RngStream& rng) const = 0;
  virtual std::size_t TrainSize() const = 0;
  virtual std::size_t NumClasses() const = 0;
  // Mean loss over the training records `indices`; `grad` is overwritten with
  // its gradient and must share the layout of `params`.
  virtual double LossAndGrad(const ModelParams& params,
                             std::span<const std::size_t> indices,
                             ModelParams& grad) const = 0;
  virtual std::vector<std::size_t> PredictTest(const ModelParams& params) const = 0;
  virtual const std::vector<std::size_t>& TestLabels() const = 0;
  virtual EvalResult Evaluate(const ModelParams& params) const = 0;
};

// Row-per-sample feature matrix with labels.
struct DenseDataset {
  Tensor features;  // N x d
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.dim(1); }
};

// Flattens record images into rows; throws InputError on a missing image or
// unequal image sizes.
DenseDataset DenseFromImages(std::span<const Record> records);

// One-hidden-layer ReLU MLP with softmax cross-entropy, trained through the
// batched GEMM kernels. Parameters: dense.w1 (h x d), dense.b1, dense.w2
// (C x h), dense.b2. With hidden == 0 the model is softmax regression with
// dense.w (C x d) and dense.b.
class DenseClassificationTask : public FederatedTask {
 public:
  DenseClassificationTask(DenseDataset train, DenseDataset test, std::size_t hidden,
                          std::size_t classes);

  ModelParams InitParams(RngStream& rng) const override;
  std::size_t TrainSize() const override { return train_.size(); }
  std::size_t NumClasses() const override { return classes_; }
  double LossAndGrad(const ModelParams& params, std::span<const std::size_t> indices,
                     ModelParams& grad) const override;
  std::vector<std::size_t> PredictTest(const ModelParams& params) const override;
  const std::vector<std::size_t>& TestLabels() const override { return test_.labels; }
  EvalResult Evaluate(const ModelParams& params) const override;

 private:
  DenseDataset train_;
  DenseDataset test_;
  std::size_t hidden_;
  std::size_t classes_;
};

// Encoders plus fusion block trained end to end with cross-entropy. With
// frozen encoders only the fusion block is federated.
class MultimodalTask : public FederatedTask {
 public:
  MultimodalTask(std::vector<Record> train, std::vector<Record> test,
                 models::ModelDims dims,
                 std::optional<models::EncoderParams> encoders = std::nullopt,
                 bool freeze_encoders = false);

  ModelParams InitParams(RngStream& rng) const override;
  std::size_t TrainSize() const override { return train_.size(); }
  std::size_t NumClasses() const override { return dims_.classes; }
  double LossAndGrad(const ModelParams& params, std::span<const std::size_t> indices,
                     ModelParams& grad) const override;
  std::vector<std::size_t> PredictTest(const ModelParams& params) const override;
  const std::vector<std::size_t>& TestLabels() const override { return test_labels_; }
  EvalResult Evaluate(const ModelParams& params) const override;

 private:
  models::EncoderParams Encoders(const ModelParams& params) const;

  std::vector<Record> train_;
  std::vector<Record> test_;
  std::vector<std::size_t> test_labels_;
  models::ModelDims dims_;
  std::optional<models::EncoderParams> encoders_;
  bool freeze_;
};

}  // namespace fedroad::fedsim

#endif  // FEDROAD_TASKS_H_
