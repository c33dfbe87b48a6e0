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


#include "fedroad/data.h"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>

#include "fedroad/errors.h"

namespace fedroad::data {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t ReadBigEndian(std::span<const std::uint8_t> bytes, std::size_t at,
                            const char* what) {
  if (bytes.size() < at + 4) {
    throw FormatError(std::string(what) + ": truncated IDX header");
  }
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

}  // namespace

std::vector<Record> LoadIdx(const std::string& images_path,
                            const std::string& labels_path) {
  const auto images = ReadFile(images_path);
  const auto labels = ReadFile(labels_path);
  return ParseIdx(images, labels);
}

std::vector<Record> ParseIdx(std::span<const std::uint8_t> images,
                             std::span<const std::uint8_t> labels) {
  if (ReadBigEndian(images, 0, "images") != kImageMagic) {
    throw FormatError("images: bad IDX magic");
  }
  if (ReadBigEndian(labels, 0, "labels") != kLabelMagic) {
    throw FormatError("labels: bad IDX magic");
  }
  const std::size_t n = ReadBigEndian(images, 4, "images");
  const std::size_t rows = ReadBigEndian(images, 8, "images");
  const std::size_t cols = ReadBigEndian(images, 12, "images");
  const std::size_t n_labels = ReadBigEndian(labels, 4, "labels");
  if (n != n_labels) {
    throw FormatError("IDX count mismatch: " + std::to_string(n) + " images, " +
                      std::to_string(n_labels) + " labels");
  }
  const std::size_t pixels = rows * cols;
  if (images.size() != 16 + n * pixels) {
    throw FormatError("images: expected " + std::to_string(16 + n * pixels) +
                      " bytes, found " + std::to_string(images.size()));
  }
  if (labels.size() != 8 + n) {
    throw FormatError("labels: expected " + std::to_string(8 + n) +
                      " bytes, found " + std::to_string(labels.size()));
  }
  std::vector<Record> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor img({rows, cols});
    const std::uint8_t* src = images.data() + 16 + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p) img[p] = src[p] / 255.0;
    out[i].image = std::move(img);
    out[i].label = labels[8 + i];
  }
  return out;
}

std::vector<std::vector<double>> SynthPrototypes(const SynthConfig& cfg) {
  RngStream rng(cfg.seed, 0x50524F54);  // "PROT"
  std::vector<std::vector<double>> protos(cfg.classes,
                                          std::vector<double>(cfg.image_dim));
  for (auto& p : protos) {
    for (double& v : p) v = rng.NextDouble();
  }
  return protos;
}

std::vector<Record> SynthMultimodal(const SynthConfig& cfg,
                                    std::uint64_t sample_stream) {
  if (cfg.classes < 2) throw InputError("synthetic data needs at least 2 classes");
  if (cfg.vocab < cfg.classes) {
    throw InputError("synthetic vocabulary must be at least the class count");
  }
  if (cfg.text_len == 0) throw InputError("synthetic text_len must be positive");
  const auto protos = SynthPrototypes(cfg);
  const std::size_t block = cfg.vocab / cfg.classes;
  RngStream rng(cfg.seed, 0x53414D50 + sample_stream);  // "SAMP"

  std::vector<Record> out;
  out.reserve(cfg.classes * cfg.per_class);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    for (std::size_t i = 0; i < cfg.per_class; ++i) {
      Record r;
      r.label = c;
      Tensor img({cfg.image_dim});
      for (std::size_t p = 0; p < cfg.image_dim; ++p) {
        img[p] = protos[c][p] + cfg.noise_sigma * rng.Normal();
      }
      r.image = std::move(img);
      TokenIds tokens(cfg.text_len);
      for (auto& t : tokens) {
        t = static_cast<std::uint32_t>(
            rng.Bernoulli(cfg.topic_prob) ? c * block + rng.UniformInt(block)
                                          : rng.UniformInt(cfg.vocab));
      }
      r.tokens = std::move(tokens);
      out.push_back(std::move(r));
    }
  }
  rng.Shuffle(std::span(out));
  return out;
}

std::size_t PartitionPlan::TotalAssigned() const {
  std::size_t n = 0;
  for (const auto& c : clients) n += c.size();
  return n;
}

PartitionPlan ShardPartition(std::span<const std::size_t> labels,
                             std::size_t num_shards,
                             std::span<const std::size_t> shards_per_client,
                             RngStream& rng) {
  if (num_shards == 0 || labels.size() % num_shards != 0) {
    throw InputError(std::to_string(num_shards) + " shards do not divide " +
                     std::to_string(labels.size()) + " records");
  }
  const std::size_t requested =
      std::accumulate(shards_per_client.begin(), shards_per_client.end(), std::size_t{0});
  if (requested > num_shards) {
    throw InputError("clients request " + std::to_string(requested) +
                     " shards but only " + std::to_string(num_shards) + " exist");
  }
  std::vector<std::size_t> sorted(labels.size());
  std::iota(sorted.begin(), sorted.end(), std::size_t{0});
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
  std::vector<std::size_t> shard_order(num_shards);
  std::iota(shard_order.begin(), shard_order.end(), std::size_t{0});
  rng.Shuffle(std::span(shard_order));

  const std::size_t shard_size = labels.size() / num_shards;
  PartitionPlan plan;
  plan.scheme = "shard";
  std::size_t next = 0;
  for (std::size_t count : shards_per_client) {
    std::vector<std::size_t> idx;
    idx.reserve(count * shard_size);
    for (std::size_t s = 0; s < count; ++s, ++next) {
      const std::size_t begin = shard_order[next] * shard_size;
      idx.insert(idx.end(), sorted.begin() + begin, sorted.begin() + begin + shard_size);
    }
    plan.clients.push_back(std::move(idx));
    if (!plan.parameters.empty()) plan.parameters += ",";
    plan.parameters += std::to_string(count);
  }
  plan.parameters = "num_shards=" + std::to_string(num_shards) +
                    ";shards_per_client=[" + plan.parameters + "]";
  return plan;
}

std::vector<std::size_t> ScaleShardCounts(std::span<const std::size_t> counts,
                                          std::size_t total) {
  const std::size_t sum = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (sum == 0) throw InputError("cannot rescale all-zero shard counts");
  std::vector<std::size_t> out(counts.size());
  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (rem, index)
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const std::size_t scaled = counts[i] * total;
    out[i] = scaled / sum;
    assigned += out[i];
    remainders.push_back({scaled % sum, i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) {
    ++out[remainders[k].second];
  }
  return out;
}

PartitionPlan ClassRestrictedPartition(std::span<const std::size_t> labels,
                                       std::size_t num_classes,
                                       std::size_t classes_per_client,
                                       std::size_t num_clients, RngStream& rng) {
  if (classes_per_client < 1 || classes_per_client > num_classes) {
    throw InputError("classes_per_client must lie in [1, " +
                     std::to_string(num_classes) + "], got " +
                     std::to_string(classes_per_client));
  }
  std::vector<std::vector<std::size_t>> claims(num_classes);  // class -> clients
  for (std::size_t k = 0; k < num_clients; ++k) {
    std::vector<std::size_t> classes(num_classes);
    std::iota(classes.begin(), classes.end(), std::size_t{0});
    for (std::size_t j = 0; j < classes_per_client; ++j) {
      const std::size_t pick = j + rng.UniformInt(num_classes - j);
      std::swap(classes[j], classes[pick]);
      claims[classes[j]].push_back(k);
    }
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw InputError("label " + std::to_string(labels[i]) + " >= class count");
    }
    by_class[labels[i]].push_back(i);
  }
  PartitionPlan plan;
  plan.scheme = "class_restricted";
  plan.parameters = "classes_per_client=" + std::to_string(classes_per_client) +
                    ";clients=" + std::to_string(num_clients);
  plan.clients.resize(num_clients);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto& owners = claims[c];
    if (owners.empty()) continue;
    rng.Shuffle(std::span(by_class[c]));
    const std::size_t share = by_class[c].size() / owners.size();
    for (std::size_t o = 0; o < owners.size(); ++o) {
      auto begin = by_class[c].begin() + o * share;
      auto& dst = plan.clients[owners[o]];
      dst.insert(dst.end(), begin, begin + share);
    }
  }
  for (auto& c : plan.clients) std::sort(c.begin(), c.end());
  return plan;
}

double MeanClassesPerClient(const PartitionPlan& plan,
                            std::span<const std::size_t> labels) {
  if (plan.clients.empty()) return 0.0;
  double total = 0.0;
  for (const auto& idx : plan.clients) {
    std::vector<std::size_t> seen;
    for (std::size_t i : idx) seen.push_back(labels[i]);
    std::sort(seen.begin(), seen.end());
    total += static_cast<double>(std::unique(seen.begin(), seen.end()) - seen.begin());
  }
  return total / static_cast<double>(plan.clients.size());
}

std::vector<std::size_t> Labels(std::span<const Record> records) {
  std::vector<std::size_t> out;
  out.reserve(records.size());
  for (const Record& r : records) out.push_back(r.label);
  return out;
}

void ValidatePlan(const PartitionPlan& plan, std::size_t num_records) {
  std::vector<bool> used(num_records, false);
  for (std::size_t k = 0; k < plan.clients.size(); ++k) {
    for (std::size_t i : plan.clients[k]) {
      if (i >= num_records) {
        throw InputError("client " + std::to_string(k) + " holds index " +
                         std::to_string(i) + " outside the dataset");
      }
      if (used[i]) {
        throw InputError("record " + std::to_string(i) + " assigned twice");
      }
      used[i] = true;
    }
  }
}

}  // namespace fedroad::data
