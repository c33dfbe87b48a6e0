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


#ifndef FEDROAD_CHECKPOINT_H_
#define FEDROAD_CHECKPOINT_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedroad/params.h"

namespace fedroad {

// Container layout:
//
//   header "FRC1", rank 1, dims = [entry count]
//   table of contents: per entry, name (u32 length + bytes), u64 byte length
//   payloads: the entry bytes, in table order
struct NamedBlob {
  std::string name;
  std::vector<std::uint8_t> bytes;

  friend bool operator==(const NamedBlob&, const NamedBlob&) = default;
};
std::vector<std::uint8_t> SerializeContainer(std::span<const NamedBlob> entries);
// Throws FormatError on corrupt or truncated input.
std::vector<NamedBlob> DeserializeContainer(std::span<const std::uint8_t> bytes);

// A checkpoint is a container with one "FRD1" raw f64 tensor per parameter,
// named after it. Values keep full double precision, so a round trip is exact.
std::vector<std::uint8_t> SerializeCheckpoint(const ModelParams& params);
// Throws FormatError on corrupt or truncated input.
ModelParams DeserializeCheckpoint(std::span<const std::uint8_t> bytes);

void SaveCheckpoint(const std::string& path, const ModelParams& params);
// Throws FileError when the file cannot be read.
ModelParams LoadCheckpoint(const std::string& path);

// Whole-file helpers. WriteFileAtomic writes a sibling temporary file and
// renames it over `path`. Both throw FileError on I/O failure.
std::vector<std::uint8_t> ReadFileBytes(const std::string& path);
void WriteFileAtomic(const std::string& path, std::span<const std::uint8_t> bytes);
void WriteFileAtomic(const std::string& path, const std::string& text);

}  // namespace fedroad

#endif  // FEDROAD_CHECKPOINT_H_
