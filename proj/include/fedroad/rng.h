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


#ifndef FEDROAD_RNG_H_
#define FEDROAD_RNG_H_

#include <cstdint>
#include <span>
#include <utility>

namespace fedroad {

// Deterministic random stream: xoshiro256** (Blackman & Vigna), a member of the
// xorshift family, with its 256-bit state expanded by SplitMix64 from the
// (seed, stream_id) pair. Only integer arithmetic touches the state, so the
// sequence is identical on every platform. Floating-point helpers below map the
// 64-bit outputs with fixed, documented formulas.
//
// A stream is a single logical actor's source of randomness: copyable (to
// snapshot/replay) but never shared between threads.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t NextU64();

  // k / 2^53 for the top 53 bits k: uniform on [0, 1).
  double NextDouble();
  // (k + 0.5) / 2^53: uniform on the open interval (0, 1).
  double NextOpenUnit();
  // lo + (hi - lo) * NextDouble().
  double Uniform(double lo, double hi);
  // Box-Muller on two open-unit draws; consumes exactly two outputs.
  double Normal();
  // Unbiased integer in [0, n) by Lemire's multiply-and-reject; n > 0.
  std::uint64_t UniformInt(std::uint64_t n);
  // NextDouble() < p.
  bool Bernoulli(double p);

  // Fisher-Yates, drawing UniformInt(i + 1) for i = n-1 down to 1.
  template <typename T>
  void Shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(UniformInt(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  friend bool operator==(const RngStream& a, const RngStream& b) {
    return a.s_[0] == b.s_[0] && a.s_[1] == b.s_[1] && a.s_[2] == b.s_[2] &&
           a.s_[3] == b.s_[3];
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t s_[4];
};

// SplitMix64 finalizer; exposed for deriving child seeds.
std::uint64_t MixSeed(std::uint64_t x);

}  // namespace fedroad

#endif  // FEDROAD_RNG_H_
