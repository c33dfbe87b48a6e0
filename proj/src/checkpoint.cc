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


#include "fedroad/checkpoint.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "fedroad/errors.h"
#include "fedroad/wire.h"

namespace fedroad {

std::vector<std::uint8_t> SerializeContainer(std::span<const NamedBlob> entries) {
  wire::ByteWriter out;
  out.PutHeader(wire::Kind::kContainer, Shape{entries.size()});
  for (const NamedBlob& e : entries) {
    out.PutString(e.name);
    out.PutU64(e.bytes.size());
  }
  for (const NamedBlob& e : entries) out.PutBytes(e.bytes);
  return out.Take();
}

std::vector<NamedBlob> DeserializeContainer(std::span<const std::uint8_t> bytes) {
  wire::ByteReader r(bytes);
  const Shape shape = r.GetHeader(wire::Kind::kContainer);
  if (shape.size() != 1) throw FormatError("container header must have rank 1");
  std::vector<NamedBlob> entries(shape[0]);
  std::vector<std::uint64_t> lengths(shape[0]);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].name = r.GetString();
    lengths[i] = r.GetU64();
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (lengths[i] > r.remaining()) {
      throw FormatError("container entry '" + entries[i].name + "' truncated");
    }
    const auto body = r.GetBytes(static_cast<std::size_t>(lengths[i]));
    entries[i].bytes.assign(body.begin(), body.end());
  }
  r.ExpectEnd();
  return entries;
}

std::vector<std::uint8_t> SerializeCheckpoint(const ModelParams& params) {
  std::vector<NamedBlob> entries;
  entries.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params.tensor(i);
    wire::ByteWriter w;
    w.PutHeader(wire::Kind::kRawF64, t.shape());
    for (double v : t.data()) w.PutF64(v);
    entries.push_back({params.name(i), w.Take()});
  }
  return SerializeContainer(entries);
}

ModelParams DeserializeCheckpoint(std::span<const std::uint8_t> bytes) {
  ModelParams params;
  for (const NamedBlob& e : DeserializeContainer(bytes)) {
    wire::ByteReader r(e.bytes);
    Tensor t(r.GetHeader(wire::Kind::kRawF64));
    for (double& v : t.data()) v = r.GetF64();
    r.ExpectEnd();
    params.Add(e.name, std::move(t));
  }
  return params;
}

void SaveCheckpoint(const std::string& path, const ModelParams& params) {
  WriteFileAtomic(path, SerializeCheckpoint(params));
}

ModelParams LoadCheckpoint(const std::string& path) {
  return DeserializeCheckpoint(ReadFileBytes(path));
}

std::vector<std::uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw FileError("read failed: " + path);
  return bytes;
}

void WriteFileAtomic(const std::string& path, std::span<const std::uint8_t> bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError("cannot create " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw FileError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw FileError("cannot rename " + tmp + " to " + path + ": " + ec.message());
  }
}

void WriteFileAtomic(const std::string& path, const std::string& text) {
  WriteFileAtomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                  text.size()));
}

}  // namespace fedroad
