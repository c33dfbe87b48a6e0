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


#include "fedroad/wire.h"

#include <bit>
#include <limits>

#include "fedroad/errors.h"

namespace fedroad::wire {

Magic MagicFor(Kind kind) {
  switch (kind) {
    case Kind::kRawF32:
      return {'F', 'R', 'T', '1'};
    case Kind::kQsgd:
      return {'F', 'R', 'Q', '1'};
    case Kind::kInt8:
      return {'F', 'R', 'I', '1'};
    case Kind::kPrivatized:
      return {'F', 'R', 'P', '1'};
    case Kind::kContainer:
      return {'F', 'R', 'C', '1'};
    case Kind::kRawF64:
      return {'F', 'R', 'D', '1'};
  }
  throw FormatError("unknown payload kind");
}

std::size_t HeaderBytes(std::size_t rank) { return 4 + 1 + 1 + 4 * rank; }

void ByteWriter::PutU32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::PutU64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::PutF32(float v) { PutU32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::PutF64(double v) { PutU64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::PutBytes(std::span<const std::uint8_t> bytes) {
  bytes_.insert(bytes_.end(), bytes.begin(), bytes.end());
}

void ByteWriter::PutString(const std::string& s) {
  PutU32(static_cast<std::uint32_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::PutHeader(Kind kind, const Shape& shape) {
  if (shape.size() > std::numeric_limits<std::uint8_t>::max()) {
    throw ShapeError("rank too large for wire header");
  }
  for (char c : MagicFor(kind)) bytes_.push_back(static_cast<std::uint8_t>(c));
  PutU8(static_cast<std::uint8_t>(kind));
  PutU8(static_cast<std::uint8_t>(shape.size()));
  for (std::size_t d : shape) {
    if (d > std::numeric_limits<std::uint32_t>::max()) {
      throw ShapeError("dimension too large for wire header");
    }
    PutU32(static_cast<std::uint32_t>(d));
  }
}

void ByteReader::Need(std::size_t n) const {
  if (n > remaining()) {
    throw FormatError("truncated payload: need " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_) + ", have " +
                      std::to_string(remaining()));
  }
}

std::uint8_t ByteReader::GetU8() {
  Need(1);
  return bytes_[pos_++];
}

std::uint32_t ByteReader::GetU32() {
  Need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::GetU64() {
  Need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

float ByteReader::GetF32() { return std::bit_cast<float>(GetU32()); }

double ByteReader::GetF64() { return std::bit_cast<double>(GetU64()); }

std::span<const std::uint8_t> ByteReader::GetBytes(std::size_t n) {
  Need(n);
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::GetString() {
  const std::uint32_t n = GetU32();
  auto raw = GetBytes(n);
  return std::string(raw.begin(), raw.end());
}

Shape ByteReader::GetHeader(Kind expected) {
  const Magic magic = MagicFor(expected);
  auto raw = GetBytes(4);
  for (int i = 0; i < 4; ++i) {
    if (raw[i] != static_cast<std::uint8_t>(magic[i])) {
      throw FormatError("bad magic, expected " + std::string(magic.begin(), magic.end()));
    }
  }
  if (GetU8() != static_cast<std::uint8_t>(expected)) {
    throw FormatError("kind byte does not match magic");
  }
  const std::uint8_t rank = GetU8();
  Shape shape(rank);
  for (auto& d : shape) d = GetU32();
  return shape;
}

void ByteReader::ExpectEnd() const {
  if (remaining() != 0) {
    throw FormatError(std::to_string(remaining()) + " trailing bytes in payload");
  }
}

Kind PeekKind(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5) throw FormatError("payload shorter than its header");
  const auto kind = static_cast<Kind>(bytes[4]);
  const Magic magic = MagicFor(kind);
  for (int i = 0; i < 4; ++i) {
    if (bytes[i] != static_cast<std::uint8_t>(magic[i])) {
      throw FormatError("magic does not match kind byte");
    }
  }
  return kind;
}

}  // namespace fedroad::wire
