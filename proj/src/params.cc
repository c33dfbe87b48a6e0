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


#include "fedroad/params.h"

#include <algorithm>

#include "fedroad/errors.h"

namespace fedroad {

void ModelParams::Add(std::string name, Tensor tensor) {
  if (Contains(name)) throw InputError("duplicate parameter name: " + name);
  entries_.emplace_back(std::move(name), std::move(tensor));
}

std::size_t ModelParams::TotalElements() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

Tensor& ModelParams::Get(const std::string& name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw InputError("no parameter named " + name);
}

const Tensor& ModelParams::Get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw InputError("no parameter named " + name);
}

bool ModelParams::Contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.first == name; });
}

ModelParams ModelParams::ZerosLike() const {
  ModelParams out;
  for (const auto& [n, t] : entries_) out.Add(n, Tensor::Zeros(t.shape()));
  return out;
}

bool ModelParams::SameLayout(const ModelParams& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first ||
        entries_[i].second.shape() != other.entries_[i].second.shape()) {
      return false;
    }
  }
  return true;
}

void ModelParams::CheckLayout(const ModelParams& other, const char* op) const {
  if (!SameLayout(other)) {
    throw ProtocolError(std::string(op) + ": parameter layouts differ");
  }
}

ModelParams& ModelParams::operator+=(const ModelParams& other) {
  CheckLayout(other, "ModelParams::operator+=");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    entries_[i].second += other.entries_[i].second;
  }
  return *this;
}

ModelParams& ModelParams::operator-=(const ModelParams& other) {
  CheckLayout(other, "ModelParams::operator-=");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    entries_[i].second -= other.entries_[i].second;
  }
  return *this;
}

ModelParams& ModelParams::operator*=(double factor) {
  for (auto& [n, t] : entries_) t *= factor;
  return *this;
}

ModelParams& ModelParams::Axpy(double alpha, const ModelParams& other) {
  CheckLayout(other, "ModelParams::Axpy");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    entries_[i].second.Axpy(alpha, other.entries_[i].second);
  }
  return *this;
}

bool ModelParams::AllFinite() const {
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const Entry& e) { return e.second.AllFinite(); });
}

Tensor ModelParams::Flatten() const {
  std::vector<double> flat;
  flat.reserve(TotalElements());
  for (const auto& [n, t] : entries_) {
    flat.insert(flat.end(), t.data().begin(), t.data().end());
  }
  return Tensor::Vector(std::move(flat));
}

void ModelParams::Unflatten(const Tensor& flat) {
  if (flat.size() != TotalElements()) {
    throw ShapeError("Unflatten: expected " + std::to_string(TotalElements()) +
                     " values, got " + std::to_string(flat.size()));
  }
  std::size_t offset = 0;
  for (auto& [n, t] : entries_) {
    std::copy_n(flat.data().begin() + static_cast<std::ptrdiff_t>(offset),
                t.size(), t.data().begin());
    offset += t.size();
  }
}

ModelParams operator-(ModelParams a, const ModelParams& b) { return a -= b; }
ModelParams operator+(ModelParams a, const ModelParams& b) { return a += b; }

}  // namespace fedroad
