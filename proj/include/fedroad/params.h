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


#ifndef FEDROAD_PARAMS_H_
#define FEDROAD_PARAMS_H_

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fedroad/tensor.h"

namespace fedroad {

// Ordered collection of named tensors. Order is significant: it defines the
// serialization order and the order in which payloads travel on the wire.
class ModelParams {
 public:
  using Entry = std::pair<std::string, Tensor>;

  ModelParams() = default;

  // Throws InputError on a duplicate name.
  void Add(std::string name, Tensor tensor);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t TotalElements() const;

  const std::vector<Entry>& entries() const { return entries_; }
  Tensor& tensor(std::size_t i) { return entries_[i].second; }
  const Tensor& tensor(std::size_t i) const { return entries_[i].second; }
  const std::string& name(std::size_t i) const { return entries_[i].first; }

  // Throws InputError when absent.
  Tensor& Get(const std::string& name);
  const Tensor& Get(const std::string& name) const;
  bool Contains(const std::string& name) const;

  // Same names and shapes, all zeros.
  ModelParams ZerosLike() const;

  bool SameLayout(const ModelParams& other) const;

  // Element-wise ops; all throw ProtocolError on a layout mismatch.
  ModelParams& operator+=(const ModelParams& other);
  ModelParams& operator-=(const ModelParams& other);
  ModelParams& operator*=(double factor);
  ModelParams& Axpy(double alpha, const ModelParams& other);

  bool AllFinite() const;

  // All values concatenated in order; handy for gradient checks.
  Tensor Flatten() const;
  // Inverse of Flatten for a flat tensor of matching length.
  void Unflatten(const Tensor& flat);

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.entries_ == b.entries_;
  }

 private:
  void CheckLayout(const ModelParams& other, const char* op) const;

  std::vector<Entry> entries_;
};

ModelParams operator-(ModelParams a, const ModelParams& b);
ModelParams operator+(ModelParams a, const ModelParams& b);

}  // namespace fedroad

#endif  // FEDROAD_PARAMS_H_
