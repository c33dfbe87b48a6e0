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


#ifndef FEDROAD_WIRE_H_
#define FEDROAD_WIRE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedroad/tensor.h"

// Little-endian byte streams and the common payload header:
//
//   magic[4] | kind u8 | rank u8 | dims u32 x rank | body ...
//
// Every binary artifact in the project (compressed payloads, privatized
// records, checkpoints) starts with this header.
namespace fedroad::wire {

enum class Kind : std::uint8_t {
  kRawF32 = 0x01,      // "FRT1"
  kQsgd = 0x02,        // "FRQ1"
  kInt8 = 0x03,        // "FRI1"
  kPrivatized = 0x04,  // "FRP1"
  kContainer = 0x05,   // "FRC1"
  kRawF64 = 0x06,      // "FRD1"
};

using Magic = std::array<char, 4>;
Magic MagicFor(Kind kind);

// 4 + 1 + 1 + 4 * rank
std::size_t HeaderBytes(std::size_t rank);

class ByteWriter {
 public:
  void PutU8(std::uint8_t v) { bytes_.push_back(v); }
  void PutU32(std::uint32_t v);
  void PutU64(std::uint64_t v);
  void PutF32(float v);
  void PutF64(double v);
  void PutBytes(std::span<const std::uint8_t> bytes);
  void PutString(const std::string& s);  // u32 length + bytes
  void PutHeader(Kind kind, const Shape& shape);

  std::size_t size() const { return bytes_.size(); }
  std::vector<std::uint8_t> Take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

// Bounds-checked reader; any overrun throws FormatError.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t GetU8();
  std::uint32_t GetU32();
  std::uint64_t GetU64();
  float GetF32();
  double GetF64();
  std::span<const std::uint8_t> GetBytes(std::size_t n);
  std::string GetString();
  // Validates magic and kind byte, returns the shape.
  Shape GetHeader(Kind expected);

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }
  // Throws FormatError if unread bytes remain.
  void ExpectEnd() const;

 private:
  void Need(std::size_t n) const;

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// Reads the kind byte of a serialized payload after validating its magic.
Kind PeekKind(std::span<const std::uint8_t> bytes);

}  // namespace fedroad::wire

#endif  // FEDROAD_WIRE_H_
