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


#ifndef FEDROAD_DATA_H_
#define FEDROAD_DATA_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedroad/record.h"
#include "fedroad/rng.h"

namespace fedroad::data {

// Reads an IDX image file (magic 0x00000803, u8 pixels) and its label file
// (magic 0x00000801). Images come back as rows x cols tensors scaled by 1/255.
// Throws FileError when a file cannot be opened and FormatError on a bad magic,
// truncation, trailing bytes or an image/label count mismatch.
std::vector<Record> LoadIdx(const std::string& images_path,
                            const std::string& labels_path);

std::vector<Record> ParseIdx(std::span<const std::uint8_t> images,
                             std::span<const std::uint8_t> labels);

struct SynthConfig {
  std::size_t classes = 5;
  std::size_t per_class = 100;
  std::size_t image_dim = 32 * 32;
  std::size_t vocab = 64;
  std::size_t text_len = 8;
  double noise_sigma = 0.1;
  // Probability that a token comes from the class topic block rather than the
  // whole vocabulary.
  double topic_prob = 0.8;
  std::uint64_t seed = 0;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

// Per class: a Uniform(0,1) image prototype plus N(0, sigma^2) pixel noise, and
// text_len tokens drawn from the class topic block (vocab split into `classes`
// contiguous blocks) with probability topic_prob, otherwise uniformly. Records
// are shuffled. Prototypes depend only on (seed, classes, image_dim), so a
// held-out set drawn with another `sample_stream` shares them. Throws
// InputError for fewer than two classes or a vocabulary smaller than the class
// count.
std::vector<Record> SynthMultimodal(const SynthConfig& cfg,
                                    std::uint64_t sample_stream = 0);

// The class prototypes SynthMultimodal uses, one per class.
std::vector<std::vector<double>> SynthPrototypes(const SynthConfig& cfg);

struct PartitionPlan {
  std::vector<std::vector<std::size_t>> clients;  // record indices per client
  std::string scheme;
  std::string parameters;

  std::size_t num_clients() const { return clients.size(); }
  std::size_t TotalAssigned() const;
};

// Stable-sorts records by label, cuts them into num_shards equal shards,
// shuffles the shard order with `rng` and deals shards_per_client[i] shards to
// client i. Throws InputError when num_shards does not divide the record count
// or the requested shards exceed num_shards.
PartitionPlan ShardPartition(std::span<const std::size_t> labels,
                             std::size_t num_shards,
                             std::span<const std::size_t> shards_per_client,
                             RngStream& rng);

// Rescales shard counts to a new total by the largest-remainder method (ties
// go to the lower index). The result sums to exactly `total`.
std::vector<std::size_t> ScaleShardCounts(std::span<const std::size_t> counts,
                                          std::size_t total);

// Each of the K clients picks classes_per_client distinct classes uniformly.
// Records of a class are shuffled and split evenly among the clients that
// picked it; the remainder of the division is dropped. Throws InputError
// unless 1 <= classes_per_client <= num_classes.
PartitionPlan ClassRestrictedPartition(std::span<const std::size_t> labels,
                                       std::size_t num_classes,
                                       std::size_t classes_per_client,
                                       std::size_t num_clients, RngStream& rng);

// Mean number of distinct classes held per client.
double MeanClassesPerClient(const PartitionPlan& plan,
                            std::span<const std::size_t> labels);

std::vector<std::size_t> Labels(std::span<const Record> records);

// Throws InputError on a duplicated or out-of-range index.
void ValidatePlan(const PartitionPlan& plan, std::size_t num_records);

}  // namespace fedroad::data

#endif  // FEDROAD_DATA_H_
