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


#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <vector>

#include "fedroad/data.h"
#include "fedroad/errors.h"
#include "fedroad/rng.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace fedroad::data {
namespace {

using ::testing::ElementsAre;

void PutBigEndian(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(v >> 24);
  out.push_back((v >> 16) & 0xFF);
  out.push_back((v >> 8) & 0xFF);
  out.push_back(v & 0xFF);
}

// Ten 28x28 images; image i has every pixel equal to 25*i except pixel 0,
// which is 255. Labels are 9 - i.
struct Fixture {
  std::vector<std::uint8_t> images, labels;
};

Fixture TenImageFixture() {
  Fixture f;
  PutBigEndian(f.images, 0x00000803);
  PutBigEndian(f.images, 10);
  PutBigEndian(f.images, 28);
  PutBigEndian(f.images, 28);
  for (int i = 0; i < 10; ++i) {
    f.images.push_back(255);
    for (int p = 1; p < 28 * 28; ++p) f.images.push_back(static_cast<std::uint8_t>(25 * i));
  }
  PutBigEndian(f.labels, 0x00000801);
  PutBigEndian(f.labels, 10);
  for (int i = 0; i < 10; ++i) f.labels.push_back(static_cast<std::uint8_t>(9 - i));
  return f;
}

TEST(IdxTest, ParsesHandBuiltFixture) {
  const Fixture f = TenImageFixture();
  const auto records = ParseIdx(f.images, f.labels);
  ASSERT_EQ(records.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    ASSERT_TRUE(records[i].has_image());
    EXPECT_FALSE(records[i].has_text());
    EXPECT_THAT(records[i].image->shape(), ElementsAre(28, 28));
    EXPECT_EQ(records[i].label, 9 - i);
    EXPECT_EQ((*records[i].image)[0], 1.0);
    EXPECT_DOUBLE_EQ((*records[i].image)[1], 25.0 * i / 255.0);
  }
}

TEST(IdxTest, LoadsFromFiles) {
  const Fixture f = TenImageFixture();
  const auto dir = std::filesystem::temp_directory_path() / "fedroad_idx_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "img", std::ios::binary)
      .write(reinterpret_cast<const char*>(f.images.data()), f.images.size());
  std::ofstream(dir / "lbl", std::ios::binary)
      .write(reinterpret_cast<const char*>(f.labels.data()), f.labels.size());
  EXPECT_EQ(LoadIdx((dir / "img").string(), (dir / "lbl").string()).size(), 10u);
  EXPECT_THROW(LoadIdx((dir / "missing").string(), (dir / "lbl").string()), FileError);
  std::filesystem::remove_all(dir);
}

TEST(IdxTest, RejectsCorruptInput) {
  Fixture f = TenImageFixture();
  auto truncated = f.images;
  truncated.pop_back();
  EXPECT_THROW(ParseIdx(truncated, f.labels), FormatError);
  EXPECT_THROW(ParseIdx(std::vector<std::uint8_t>(7, 0), f.labels), FormatError);
  auto bad_magic = f.images;
  bad_magic[3] = 0x01;
  EXPECT_THROW(ParseIdx(bad_magic, f.labels), FormatError);
  auto short_labels = f.labels;
  short_labels[7] = 9;
  short_labels.pop_back();
  EXPECT_THROW(ParseIdx(f.images, short_labels), FormatError);
}

TEST(IdxTest, BundledDigitSubset) {
  const std::string root = FEDROAD_DATA_DIR "/digits/";
  const auto train = LoadIdx(root + "train-images-idx3-ubyte", root + "train-labels-idx1-ubyte");
  const auto test = LoadIdx(root + "t10k-images-idx3-ubyte", root + "t10k-labels-idx1-ubyte");
  EXPECT_EQ(train.size(), 3000u);
  EXPECT_EQ(test.size(), 1000u);
  std::vector<int> counts(10);
  for (const auto& r : train) ++counts.at(r.label);
  EXPECT_THAT(counts, ::testing::Each(300));
}

TEST(SynthTest, DeterministicPerSeed) {
  SynthConfig cfg;
  cfg.per_class = 10;
  const auto a = SynthMultimodal(cfg);
  const auto b = SynthMultimodal(cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_EQ(*a[i].image, *b[i].image);
    EXPECT_EQ(*a[i].tokens, *b[i].tokens);
  }
  cfg.seed = 1;
  EXPECT_NE(*SynthMultimodal(cfg)[0].image, *a[0].image);
}

TEST(SynthTest, ZeroNoiseImagesIdenticalWithinClass) {
  SynthConfig cfg;
  cfg.per_class = 6;
  cfg.noise_sigma = 0.0;
  const auto records = SynthMultimodal(cfg);
  const auto protos = SynthPrototypes(cfg);
  for (const auto& r : records) {
    EXPECT_EQ(r.image->values(), protos[r.label]);
    for (auto t : *r.tokens) EXPECT_LT(t, cfg.vocab);
  }
}

TEST(SynthTest, NearestPrototypeClassifierIsNearPerfect) {
  SynthConfig cfg;
  cfg.per_class = 200;
  cfg.noise_sigma = 0.1;
  const auto records = SynthMultimodal(cfg);
  const auto protos = SynthPrototypes(cfg);
  std::size_t correct = 0;
  for (const auto& r : records) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t c = 0; c < protos.size(); ++c) {
      double d = 0;
      for (std::size_t p = 0; p < cfg.image_dim; ++p) {
        d += ((*r.image)[p] - protos[c][p]) * ((*r.image)[p] - protos[c][p]);
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    correct += best == r.label;
  }
  EXPECT_GE(static_cast<double>(correct) / records.size(), 0.99);
}

TEST(SynthTest, RejectsSingleClass) {
  SynthConfig cfg;
  cfg.classes = 1;
  EXPECT_THROW(SynthMultimodal(cfg), InputError);
}

std::vector<std::size_t> BalancedLabels(std::size_t classes, std::size_t per_class) {
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < classes * per_class; ++i) labels.push_back(i % classes);
  return labels;
}

TEST(ShardPartitionTest, ScaledDownScheme) {
  const auto labels = BalancedLabels(10, 300);
  RngStream rng(1, 0);
  const std::vector<std::size_t> spc = {20, 20, 20};
  const PartitionPlan plan = ShardPartition(labels, 60, spc, rng);
  ASSERT_EQ(plan.num_clients(), 3u);
  for (const auto& c : plan.clients) EXPECT_EQ(c.size(), 1000u);
  EXPECT_NO_THROW(ValidatePlan(plan, labels.size()));
  EXPECT_EQ(plan.TotalAssigned(), labels.size());
}

TEST(ShardPartitionTest, SingleShardIsOneLabel) {
  const auto labels = BalancedLabels(10, 300);
  RngStream rng(2, 0);
  const std::vector<std::size_t> spc = {1, 5};
  const PartitionPlan plan = ShardPartition(labels, 60, spc, rng);
  ASSERT_EQ(plan.clients[0].size(), 50u);
  std::set<std::size_t> seen;
  for (auto i : plan.clients[0]) seen.insert(labels[i]);
  EXPECT_EQ(seen.size(), 1u);
}

TEST(ShardPartitionTest, RejectsInfeasibleCounts) {
  const auto labels = BalancedLabels(10, 300);
  RngStream rng(3, 0);
  const std::vector<std::size_t> too_many = {40, 40};
  EXPECT_THROW(ShardPartition(labels, 60, too_many, rng), InputError);
  const std::vector<std::size_t> ok = {1};
  EXPECT_THROW(ShardPartition(labels, 7, ok, rng), InputError);
}

TEST(ShardPartitionTest, TableThreeProportions) {
  const std::vector<std::size_t> table3 = {195, 642, 363};
  EXPECT_THAT(ScaleShardCounts(table3, 1200), ElementsAre(195, 642, 363));
  const auto scaled = ScaleShardCounts(table3, 60);
  EXPECT_THAT(scaled, ElementsAre(10, 32, 18));
  const auto labels = BalancedLabels(10, 1200);
  RngStream rng(4, 0);
  const PartitionPlan plan = ShardPartition(labels, 1200, table3, rng);
  EXPECT_EQ(plan.clients[0].size(), 195u * 10);
  EXPECT_EQ(plan.clients[1].size(), 642u * 10);
  EXPECT_EQ(plan.clients[2].size(), 363u * 10);
  EXPECT_NO_THROW(ValidatePlan(plan, labels.size()));
}

TEST(ClassRestrictedTest, AllClassesIsIidLike) {
  const auto labels = BalancedLabels(5, 60);
  RngStream rng(5, 0);
  const PartitionPlan plan = ClassRestrictedPartition(labels, 5, 5, 3, rng);
  for (const auto& c : plan.clients) EXPECT_EQ(c.size(), 100u);
  EXPECT_DOUBLE_EQ(MeanClassesPerClient(plan, labels), 5.0);
  EXPECT_NO_THROW(ValidatePlan(plan, labels.size()));
}

TEST(ClassRestrictedTest, OneClassPerClient) {
  const auto labels = BalancedLabels(5, 60);
  RngStream rng(6, 0);
  const PartitionPlan plan = ClassRestrictedPartition(labels, 5, 1, 5, rng);
  EXPECT_DOUBLE_EQ(MeanClassesPerClient(plan, labels), 1.0);
  EXPECT_NO_THROW(ValidatePlan(plan, labels.size()));
}

TEST(ClassRestrictedTest, FourOfFiveClassesThreeClients) {
  const auto labels = BalancedLabels(5, 61);
  RngStream rng(7, 0);
  const PartitionPlan plan = ClassRestrictedPartition(labels, 5, 4, 3, rng);
  EXPECT_DOUBLE_EQ(MeanClassesPerClient(plan, labels), 4.0);
  EXPECT_NO_THROW(ValidatePlan(plan, labels.size()));
  EXPECT_LE(plan.TotalAssigned(), labels.size());
  EXPECT_THROW(ClassRestrictedPartition(labels, 5, 6, 3, rng), InputError);
  EXPECT_THROW(ClassRestrictedPartition(labels, 5, 0, 3, rng), InputError);
}

TEST(ClassRestrictedTest, SkewDecreasesWithFewerClasses) {
  const auto labels = BalancedLabels(10, 50);
  double previous = 1e9;
  for (std::size_t cpc = 10; cpc >= 1; --cpc) {
    RngStream rng(8, cpc);
    const double mean = MeanClassesPerClient(
        ClassRestrictedPartition(labels, 10, cpc, 6, rng), labels);
    EXPECT_LT(mean, previous);
    previous = mean;
  }
}

TEST(ValidatePlanTest, CatchesDuplicatesAndRange) {
  PartitionPlan plan;
  plan.clients = {{0, 1}, {1}};
  EXPECT_THROW(ValidatePlan(plan, 3), InputError);
  plan.clients = {{0, 5}};
  EXPECT_THROW(ValidatePlan(plan, 3), InputError);
}

}  // namespace
}  // namespace fedroad::data
