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


#include "fedroad/compress.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "fedroad/errors.h"
#include "fedroad/numeric.h"
#include "fedroad/wire.h"

namespace fedroad {
namespace {

std::size_t LevelBits(std::uint32_t s) {
  return static_cast<std::size_t>(std::bit_width(s));
}

std::size_t PackedBytes(std::size_t n, std::uint32_t s) {
  return (n * (1 + LevelBits(s)) + 7) / 8;
}

// LSB-first bit packing.
class BitWriter {
 public:
  explicit BitWriter(std::size_t bytes) : out_(bytes, 0) {}
  void Put(std::uint64_t value, std::size_t bits) {
    for (std::size_t i = 0; i < bits; ++i, ++pos_) {
      if ((value >> i) & 1u) out_[pos_ / 8] |= static_cast<std::uint8_t>(1u << (pos_ % 8));
    }
  }
  const std::vector<std::uint8_t>& bytes() const { return out_; }

 private:
  std::vector<std::uint8_t> out_;
  std::size_t pos_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint64_t Get(std::size_t bits) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bits; ++i, ++pos_) {
      v |= static_cast<std::uint64_t>((in_[pos_ / 8] >> (pos_ % 8)) & 1u) << i;
    }
    return v;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

QsgdPayload QsgdQuantize(const Tensor& v, std::uint32_t s, RngStream& rng) {
  if (s < 1) throw DomainError("QsgdQuantize: level count s must be >= 1");
  if (!v.AllFinite()) throw DomainError("QsgdQuantize: non-finite input");
  const double norm = L2Norm(v.data());
  if (norm > std::numeric_limits<float>::max()) {
    throw DomainError("QsgdQuantize: norm exceeds float32 range");
  }
  QsgdPayload p;
  p.shape = v.shape();
  p.l2_norm = static_cast<float>(norm);
  p.levels_count = s;
  p.negative.assign(v.size(), 0);
  p.levels.assign(v.size(), 0);
  if (norm == 0.0) return p;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = static_cast<double>(s) * std::abs(v[i]) / norm;
    const double floor_r = std::floor(r);
    std::uint64_t level = static_cast<std::uint64_t>(floor_r);
    if (rng.NextDouble() < r - floor_r) ++level;
    p.levels[i] = static_cast<std::uint32_t>(std::min<std::uint64_t>(level, s));
    p.negative[i] = v[i] < 0.0 ? 1 : 0;
  }
  return p;
}

Tensor QsgdDequantize(const QsgdPayload& p) {
  const std::size_t n = ShapeSize(p.shape);
  if (p.levels_count < 1 || p.levels.size() != n || p.negative.size() != n) {
    throw FormatError("QsgdDequantize: inconsistent payload");
  }
  Tensor out(p.shape);
  const double norm = p.l2_norm;
  const double s = p.levels_count;
  for (std::size_t i = 0; i < n; ++i) {
    if (p.levels[i] > p.levels_count) {
      throw FormatError("QsgdDequantize: level " + std::to_string(p.levels[i]) +
                        " exceeds s = " + std::to_string(p.levels_count));
    }
    const double sign = p.negative[i] ? -1.0 : 1.0;
    out[i] = norm * sign * static_cast<double>(p.levels[i]) / s;
  }
  return out;
}

Int8Tensor Int8Quantize(const Tensor& t) {
  if (!t.AllFinite()) throw InputError("Int8Quantize: NaN or infinite input");
  Int8Tensor q;
  q.shape = t.shape();
  q.codes.assign(t.size(), 0);
  if (t.empty()) return q;
  const auto [lo_it, hi_it] = std::minmax_element(t.data().begin(), t.data().end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (lo == hi && static_cast<double>(static_cast<float>(lo)) == lo) {
    q.min = static_cast<float>(lo);
    q.scale = 0.0f;
    return q;
  }
  constexpr float kInf = std::numeric_limits<float>::infinity();
  float min_f = static_cast<float>(lo);
  if (static_cast<double>(min_f) > lo) min_f = std::nextafter(min_f, -kInf);
  float scale_f = static_cast<float>((hi - static_cast<double>(min_f)) / 255.0);
  while (static_cast<double>(min_f) + 255.0 * static_cast<double>(scale_f) < hi) {
    scale_f = std::nextafter(scale_f, kInf);
  }
  q.min = min_f;
  q.scale = scale_f;
  const double scale = scale_f;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double code = std::round((t[i] - static_cast<double>(min_f)) / scale);
    q.codes[i] = static_cast<std::uint8_t>(std::clamp(code, 0.0, 255.0));
  }
  return q;
}

Tensor Int8Dequantize(const Int8Tensor& q) {
  if (q.codes.size() != ShapeSize(q.shape)) {
    throw FormatError("Int8Dequantize: code count does not match shape");
  }
  Tensor out(q.shape);
  for (std::size_t i = 0; i < q.codes.size(); ++i) {
    out[i] = static_cast<double>(q.codes[i]) * static_cast<double>(q.scale) +
             static_cast<double>(q.min);
  }
  return out;
}

std::size_t PayloadBytes(const Tensor& raw) {
  return wire::HeaderBytes(raw.rank()) + 4 * raw.size();
}

std::size_t PayloadBytes(const QsgdPayload& p) {
  return wire::HeaderBytes(p.shape.size()) + 4 + 4 +
         PackedBytes(ShapeSize(p.shape), p.levels_count);
}

std::size_t PayloadBytes(const Int8Tensor& q) {
  return wire::HeaderBytes(q.shape.size()) + 4 + 4 + ShapeSize(q.shape);
}

std::size_t PayloadBytes(const Payload& p) {
  return std::visit([](const auto& x) { return PayloadBytes(x); }, p);
}

std::vector<std::uint8_t> Serialize(const Tensor& raw) {
  wire::ByteWriter w;
  w.PutHeader(wire::Kind::kRawF32, raw.shape());
  for (double v : raw.data()) w.PutF32(static_cast<float>(v));
  return w.Take();
}

std::vector<std::uint8_t> Serialize(const QsgdPayload& p) {
  const std::size_t n = ShapeSize(p.shape);
  if (p.levels.size() != n || p.negative.size() != n || p.levels_count < 1) {
    throw FormatError("Serialize: inconsistent QSGD payload");
  }
  wire::ByteWriter w;
  w.PutHeader(wire::Kind::kQsgd, p.shape);
  w.PutF32(p.l2_norm);
  w.PutU32(p.levels_count);
  const std::size_t bits = LevelBits(p.levels_count);
  BitWriter bw(PackedBytes(n, p.levels_count));
  for (std::size_t i = 0; i < n; ++i) {
    if (p.levels[i] > p.levels_count) throw FormatError("Serialize: level exceeds s");
    bw.Put(p.negative[i] ? 1 : 0, 1);
    bw.Put(p.levels[i], bits);
  }
  w.PutBytes(bw.bytes());
  return w.Take();
}

std::vector<std::uint8_t> Serialize(const Int8Tensor& q) {
  if (q.codes.size() != ShapeSize(q.shape)) {
    throw FormatError("Serialize: code count does not match shape");
  }
  wire::ByteWriter w;
  w.PutHeader(wire::Kind::kInt8, q.shape);
  w.PutF32(q.min);
  w.PutF32(q.scale);
  w.PutBytes(q.codes);
  return w.Take();
}

std::vector<std::uint8_t> Serialize(const Payload& p) {
  return std::visit([](const auto& x) { return Serialize(x); }, p);
}

Tensor DeserializeRaw(std::span<const std::uint8_t> bytes) {
  wire::ByteReader r(bytes);
  Shape shape = r.GetHeader(wire::Kind::kRawF32);
  std::vector<double> data(ShapeSize(shape));
  for (double& v : data) v = r.GetF32();
  r.ExpectEnd();
  return Tensor(std::move(shape), std::move(data));
}

QsgdPayload DeserializeQsgd(std::span<const std::uint8_t> bytes) {
  wire::ByteReader r(bytes);
  QsgdPayload p;
  p.shape = r.GetHeader(wire::Kind::kQsgd);
  p.l2_norm = r.GetF32();
  p.levels_count = r.GetU32();
  if (p.levels_count < 1) throw FormatError("QSGD payload with s = 0");
  const std::size_t n = ShapeSize(p.shape);
  const std::size_t bits = LevelBits(p.levels_count);
  BitReader br(r.GetBytes(PackedBytes(n, p.levels_count)));
  r.ExpectEnd();
  p.negative.resize(n);
  p.levels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    p.negative[i] = static_cast<std::uint8_t>(br.Get(1));
    const std::uint64_t level = br.Get(bits);
    if (level > p.levels_count) {
      throw FormatError("QSGD level " + std::to_string(level) + " exceeds s = " +
                        std::to_string(p.levels_count));
    }
    p.levels[i] = static_cast<std::uint32_t>(level);
  }
  return p;
}

Int8Tensor DeserializeInt8(std::span<const std::uint8_t> bytes) {
  wire::ByteReader r(bytes);
  Int8Tensor q;
  q.shape = r.GetHeader(wire::Kind::kInt8);
  q.min = r.GetF32();
  q.scale = r.GetF32();
  if (!(q.scale >= 0.0f)) throw FormatError("int8 payload with negative scale");
  auto codes = r.GetBytes(ShapeSize(q.shape));
  q.codes.assign(codes.begin(), codes.end());
  r.ExpectEnd();
  return q;
}

Payload DeserializePayload(std::span<const std::uint8_t> bytes) {
  switch (wire::PeekKind(bytes)) {
    case wire::Kind::kRawF32:
      return DeserializeRaw(bytes);
    case wire::Kind::kQsgd:
      return DeserializeQsgd(bytes);
    case wire::Kind::kInt8:
      return DeserializeInt8(bytes);
    default:
      throw FormatError("not a model payload");
  }
}

Tensor Decode(const Payload& p) {
  struct Visitor {
    Tensor operator()(const Tensor& t) const { return t; }
    Tensor operator()(const QsgdPayload& q) const { return QsgdDequantize(q); }
    Tensor operator()(const Int8Tensor& q) const { return Int8Dequantize(q); }
  };
  return std::visit(Visitor{}, p);
}

}  // namespace fedroad
