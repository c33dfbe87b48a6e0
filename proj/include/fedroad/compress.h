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


#ifndef FEDROAD_COMPRESS_H_
#define FEDROAD_COMPRESS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "fedroad/rng.h"
#include "fedroad/tensor.h"

namespace fedroad {

inline constexpr std::uint32_t kDefaultQsgdLevels = 127;

// QSGD stochastic quantization of one tensor: a shared l2 norm plus a sign bit
// and a level in [0, s] per element. On the wire each element occupies
// 1 + bit_width(s) bits, packed LSB-first (sign first), so s = 127 costs
// exactly one byte per element.
//
//   FRQ1 header | l2_norm f32 | s u32 | ceil(n * (1 + bit_width(s)) / 8) bytes
struct QsgdPayload {
  Shape shape;
  float l2_norm = 0.0f;
  std::uint32_t levels_count = kDefaultQsgdLevels;  // s
  std::vector<std::uint8_t> negative;               // 1 = negative sign
  std::vector<std::uint32_t> levels;

  friend bool operator==(const QsgdPayload&, const QsgdPayload&) = default;
};

// Per-tensor affine 8-bit code: x ~= code * scale + min.
//
//   FRI1 header | min f32 | scale f32 | n bytes of codes
struct Int8Tensor {
  Shape shape;
  float min = 0.0f;
  float scale = 0.0f;
  std::vector<std::uint8_t> codes;

  friend bool operator==(const Int8Tensor&, const Int8Tensor&) = default;
};

// For each element r = s |v_i| / |v|_2 and level = floor(r) + Bernoulli(r -
// floor(r)), which makes the dequantized estimate unbiased. A zero vector
// encodes with norm 0 and consumes no randomness. Throws DomainError for
// s < 1 or non-finite input.
QsgdPayload QsgdQuantize(const Tensor& v, std::uint32_t s, RngStream& rng);

// element_i = l2_norm * sign_i * level_i / s. Throws FormatError when a level
// exceeds s or the payload is internally inconsistent.
Tensor QsgdDequantize(const QsgdPayload& p);

// Range-based 8-bit quantization with round-half-away-from-zero. The stored
// min is the largest float32 not above the true min, and the float32 scale is
// rounded up just enough that min + 255 * scale covers the true max, so no code
// saturates and every element is within scale / 2 of its reconstruction.
// Constant float32-valued tensors get scale 0 and all-zero codes and round-trip
// exactly; a constant that float32 cannot hold takes the general path with a
// tiny scale so the half-step bound still applies.
// Throws InputError on NaN or infinity.
Int8Tensor Int8Quantize(const Tensor& t);
Tensor Int8Dequantize(const Int8Tensor& q);

// Anything that can travel between edge and cloud. A raw Tensor is sent as
// float32:  FRT1 header | n x f32.
using Payload = std::variant<Tensor, QsgdPayload, Int8Tensor>;

std::size_t PayloadBytes(const Tensor& raw);
std::size_t PayloadBytes(const QsgdPayload& p);
std::size_t PayloadBytes(const Int8Tensor& q);
std::size_t PayloadBytes(const Payload& p);

std::vector<std::uint8_t> Serialize(const Tensor& raw);
std::vector<std::uint8_t> Serialize(const QsgdPayload& p);
std::vector<std::uint8_t> Serialize(const Int8Tensor& q);
std::vector<std::uint8_t> Serialize(const Payload& p);

// Dispatches on the header; throws FormatError on corrupt input.
Payload DeserializePayload(std::span<const std::uint8_t> bytes);
QsgdPayload DeserializeQsgd(std::span<const std::uint8_t> bytes);
Int8Tensor DeserializeInt8(std::span<const std::uint8_t> bytes);
Tensor DeserializeRaw(std::span<const std::uint8_t> bytes);

// Reconstructs the tensor a payload stands for.
Tensor Decode(const Payload& p);

}  // namespace fedroad

#endif  // FEDROAD_COMPRESS_H_
