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


#ifndef FEDROAD_RECORD_H_
#define FEDROAD_RECORD_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "fedroad/tensor.h"

namespace fedroad {

enum class Modality : std::uint8_t { kText = 1, kImage = 2 };

using TokenIds = std::vector<std::uint32_t>;

// One multimodal sample. At least one modality is present.
struct Record {
  std::optional<Tensor> image;
  std::optional<TokenIds> tokens;
  std::size_t label = 0;

  bool has_image() const { return image.has_value(); }
  bool has_text() const { return tokens.has_value(); }
};

}  // namespace fedroad

#endif  // FEDROAD_RECORD_H_
