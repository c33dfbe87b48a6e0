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


#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "fedroad/checkpoint.h"
#include "fedroad/errors.h"
#include "fedroad/experiment.h"
#include "fedroad/mldp.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "json.hpp"

namespace fedroad::cli {
namespace {

namespace fs = std::filesystem;
using ::testing::DoubleNear;
using ::testing::HasSubstr;
using ::testing::StartsWith;

std::string Slurp(const std::string& path) {
  const auto bytes = ReadFileBytes(path);
  return {bytes.begin(), bytes.end()};
}

std::string FreshDir(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / ("fedroad_cli_" + name);
  fs::remove_all(dir);
  return dir.string();
}

// Small synthetic run that finishes in well under a second.
ExperimentConfig TinyConfig(const std::string& out) {
  ExperimentConfig cfg = ParseConfig(R"({
    "run_id": "tiny",
    "seed": 3,
    "federation": {"rounds": 2, "local_epochs": 1, "new_data_threshold": 0},
    "dataset": {"kind": "synthetic", "test_per_class": 10,
                "synthetic": {"classes": 3, "per_class": 20, "image_dim": 16, "vocab": 12}},
    "model": {"hidden": 8},
    "partition": {"scheme": "iid"}
  })");
  cfg.output.dir = out;
  return cfg;
}

std::string KeyOf(const std::string& json) {
  try {
    ParseConfig(json);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<accepted>";
}

TEST(CheckpointTest, RoundTripIsExact) {
  ModelParams p;
  p.Add("a.w", Tensor({2, 3}, {0.1, -2.5, 1e-300, 3.0, 1.0 / 3.0, -0.0}));
  p.Add("a.b", Tensor::Vector({7.25}));
  EXPECT_EQ(DeserializeCheckpoint(SerializeCheckpoint(p)), p);
}

TEST(CheckpointTest, RejectsCorruptInput) {
  ModelParams p;
  p.Add("w", Tensor::Vector({1.0, 2.0}));
  auto bytes = SerializeCheckpoint(p);
  bytes.pop_back();
  EXPECT_THROW(DeserializeCheckpoint(bytes), FormatError);
  bytes = SerializeCheckpoint(p);
  bytes[0] = 'X';
  EXPECT_THROW(DeserializeCheckpoint(bytes), FormatError);
  bytes = SerializeCheckpoint(p);
  bytes.push_back(0);
  EXPECT_THROW(DeserializeCheckpoint(bytes), FormatError);
}

TEST(CheckpointTest, MissingFileIsFileError) {
  EXPECT_THROW(LoadCheckpoint(FreshDir("missing") + "/nope.ckpt"), FileError);
}

TEST(CheckpointTest, ContainerStartsWithMagic) {
  const std::vector<NamedBlob> entries = {{"x", {1, 2, 3}}, {"y", {}}};
  const auto bytes = SerializeContainer(entries);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FRC1");
  EXPECT_EQ(DeserializeContainer(bytes), entries);
}

TEST(ParseConfigTest, MinimalFileTakesDefaults) {
  const ExperimentConfig cfg =
      ParseConfig(R"({"federation": {"strategy": "fedavg"}, "dataset": {"kind": "idx"}})");
  EXPECT_EQ(cfg.federation.clients, 3u);
  EXPECT_EQ(cfg.federation.local_epochs, 10u);
  EXPECT_EQ(cfg.federation.rounds, 50u);
  EXPECT_EQ(cfg.federation.gamma0, 0.1);
  EXPECT_EQ(cfg.federation.new_data_threshold, 100u);
  EXPECT_EQ(cfg.federation.lr_schedule, fedsim::LrSchedule::kConstant);
}

TEST(ParseConfigTest, ErrorsNameTheKeyPath) {
  EXPECT_EQ(KeyOf(R"({"federation": {"strategy": "mfedX"}})"), "federation.strategy");
  EXPECT_EQ(KeyOf(R"({"federation": {"rounds": "ten"}})"), "federation.rounds");
  EXPECT_EQ(KeyOf(R"({"federation": {"rounds": -1}})"), "federation.rounds");
  EXPECT_EQ(KeyOf(R"({"federation": {"rounds": 0}})"), "federation.rounds");
  EXPECT_EQ(KeyOf(R"({"dataset": {"synthetic": {"colour": 1}}})"), "dataset.synthetic.colour");
  EXPECT_EQ(KeyOf(R"({"extra": true})"), "extra");
  EXPECT_EQ(KeyOf(R"({"mldp": {"epsilon": 0}})"), "mldp.epsilon");
  EXPECT_EQ(KeyOf(R"({"model": {"kind": "multimodal"}})"), "model.kind");
  EXPECT_EQ(KeyOf("{not json"), "<root>");
}

TEST(ParseConfigTest, SerializeRoundTrip) {
  const ExperimentConfig a = ParseConfig(R"({
    "run_id": "rt", "seed": 17,
    "federation": {"strategy": "fedpaq", "target_accuracy": 0.85, "qsgd_s": 15},
    "dataset": {"kind": "synthetic", "synthetic": {"noise_sigma": 0.25}},
    "model": {"kind": "multimodal", "embed": 6},
    "partition": {"scheme": "class_restricted", "classes_per_client": 3},
    "pretrain": {"enabled": true, "alpha": 0.3},
    "output": {"dir": "out/rt"}
  })");
  const ExperimentConfig b = ParseConfig(ConfigToJson(a));
  EXPECT_EQ(a, b);
  EXPECT_EQ(ConfigToJson(a), ConfigToJson(b));
  EXPECT_EQ(b.dataset.synthetic.seed, 17u);
}

TEST(ClassifyTest, PerfectFitScoresOne) {
  const std::vector<std::size_t> y = {0, 1, 2, 2, 1};
  const ClassificationReport r = Classify(y, y);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
}

TEST(ClassifyTest, MacroAveragesByHand) {
  const std::vector<std::size_t> pred = {0, 0, 1, 1};
  const std::vector<std::size_t> truth = {0, 1, 1, 1};
  const ClassificationReport r = Classify(pred, truth);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.precision, (0.5 + 1.0) / 2);
  EXPECT_DOUBLE_EQ(r.recall, (1.0 + 2.0 / 3.0) / 2);
  EXPECT_NEAR(r.f1, 2 * r.precision * r.recall / (r.precision + r.recall), 1e-9);
}

TEST(MetricsCsvTest, HeaderIsFixed) {
  fedsim::RoundMetrics m;
  m.lr = 0.05;
  m.test_accuracy = 0.5;
  m.wall_ms = 12.5;
  const std::string csv = MetricsCsv("r", fedsim::Strategy::kMfed, {m}, false);
  EXPECT_THAT(csv, StartsWith("run_id,strategy,round,lr,test_accuracy,test_loss,uplink_bytes,"
                              "downlink_bytes,cumulative_bytes,wall_ms\n"));
  EXPECT_THAT(csv, HasSubstr("r,mfed,0,0.05,0.5,0,0,0,0,0\n"));
  EXPECT_THAT(MetricsCsv("r", fedsim::Strategy::kMfed, {m}, true), HasSubstr(",12.500\n"));
}

TEST(CmdRunTest, WritesOutputsAndRefusesNonEmptyDir) {
  const ExperimentConfig cfg = TinyConfig(FreshDir("run"));
  const auto result = CmdRun(cfg, false);
  EXPECT_EQ(result.rounds.size(), 2u);
  for (const char* f : {"metrics.csv", "model.ckpt", "config.resolved.json"}) {
    EXPECT_TRUE(fs::exists(fs::path(cfg.output.dir) / f)) << f;
  }
  EXPECT_EQ(LoadConfig(cfg.output.dir + "/config.resolved.json"), cfg);
  EXPECT_THROW(CmdRun(cfg, false), FileError);
  EXPECT_NO_THROW(CmdRun(cfg, true));
}

TEST(CmdRunTest, MetricsAreByteIdenticalAcrossRuns) {
  const ExperimentConfig a = TinyConfig(FreshDir("det_a"));
  const ExperimentConfig b = TinyConfig(FreshDir("det_b"));
  CmdRun(a, false);
  CmdRun(b, false);
  EXPECT_EQ(Slurp(a.output.dir + "/metrics.csv"), Slurp(b.output.dir + "/metrics.csv"));
  EXPECT_EQ(Slurp(a.output.dir + "/model.ckpt"), Slurp(b.output.dir + "/model.ckpt"));
}

TEST(CmdRunTest, MfedMovesFewerBytesThanFedAvg) {
  ExperimentConfig cfg = TinyConfig(FreshDir("mfed"));
  const auto mfed = CmdRun(cfg, false);
  cfg.federation.strategy = fedsim::Strategy::kFedAvg;
  cfg.federation.lr_schedule.reset();
  cfg.federation.aggregation.reset();
  cfg.federation.participation_fraction.reset();
  cfg.output.dir = FreshDir("fedavg");
  const auto fedavg = CmdRun(cfg, false);
  EXPECT_LT(mfed.rounds.back().cumulative_bytes, fedavg.rounds.back().cumulative_bytes);
}

TEST(CmdEvalTest, RepeatableAndConsistentWithRun) {
  const ExperimentConfig cfg = TinyConfig(FreshDir("eval"));
  const auto result = CmdRun(cfg, false);
  const std::string ckpt = cfg.output.dir + "/model.ckpt";
  const ClassificationReport a = CmdEval(cfg, ckpt);
  const ClassificationReport b = CmdEval(cfg, ckpt);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.f1, b.f1);
  EXPECT_EQ(a.accuracy, result.rounds.back().test_accuracy);
  EXPECT_THROW(CmdEval(cfg, cfg.output.dir + "/absent.ckpt"), FileError);
}

TEST(CmdEvalTest, PrivatizedRunEvaluatesOnCleanFeatures) {
  ExperimentConfig cfg = TinyConfig(FreshDir("eval_mldp"));
  cfg.mldp.enabled = true;
  cfg.mldp.mechanism.image_rows = 2;
  cfg.mldp.mechanism.image_cols = 2;
  const auto result = CmdRun(cfg, false);
  EXPECT_EQ(CmdEval(cfg, cfg.output.dir + "/model.ckpt").accuracy,
            result.rounds.back().test_accuracy);
}

TEST(CmdPrivatizeTest, BudgetReportAndReproducibility) {
  ExperimentConfig cfg = TinyConfig(FreshDir("priv_a"));
  cfg.mldp.mechanism.epsilon = 0.5;
  cfg.mldp.mechanism.image_rows = 2;
  cfg.mldp.mechanism.image_cols = 2;
  const PrivatizeSummary s = CmdPrivatize(cfg, false);
  EXPECT_EQ(s.records, 60u);
  EXPECT_EQ(s.entries, 120u);

  const auto report = nlohmann::json::parse(Slurp(cfg.output.dir + "/budget.json"));
  for (const char* m : {"text", "image"}) {
    const double dims = report["modalities"][m]["dims"].get<double>();
    EXPECT_DOUBLE_EQ(report["modalities"][m]["laplace_scale"].get<double>(), 2.0 * dims / 0.5);
  }

  const auto entries = DeserializeContainer(ReadFileBytes(cfg.output.dir + "/privatized.frc"));
  std::set<std::string> records;
  for (const auto& e : entries) {
    records.insert(e.name.substr(0, e.name.rfind('.')));
    EXPECT_NO_THROW(mldp::DeserializePrivatized(e.bytes));
  }
  EXPECT_EQ(records.size(), 60u);

  ExperimentConfig again = cfg;
  again.output.dir = FreshDir("priv_b");
  CmdPrivatize(again, false);
  EXPECT_EQ(Slurp(cfg.output.dir + "/privatized.frc"),
            Slurp(again.output.dir + "/privatized.frc"));
}

TEST(CmdPartitionTest, WritesEveryClient) {
  ExperimentConfig cfg = TinyConfig(FreshDir("partition"));
  cfg.partition.scheme = "shards";
  cfg.partition.num_shards = 6;
  const data::PartitionPlan plan = CmdPartition(cfg, false);
  EXPECT_EQ(plan.num_clients(), 3u);
  EXPECT_EQ(plan.TotalAssigned(), 60u);
  const auto j = nlohmann::json::parse(Slurp(cfg.output.dir + "/partition.json"));
  EXPECT_EQ(j["clients"].size(), 3u);
  EXPECT_EQ(j["assigned"].get<std::size_t>(), 60u);
}

TEST(CmdPretrainTest, WritesEncodersAndTrace) {
  ExperimentConfig cfg = TinyConfig(FreshDir("pretrain"));
  cfg.pretrain.options.epochs = 2;
  CmdPretrain(cfg, false);
  EXPECT_NO_THROW(LoadCheckpoint(cfg.output.dir + "/encoders.ckpt"));
  EXPECT_THAT(Slurp(cfg.output.dir + "/pretrain_loss.csv"), StartsWith("epoch,loss\n0,"));
}

TEST(CmdPretrainTest, FrozenEncodersEndUpInModelCheckpoint) {
  ExperimentConfig cfg = TinyConfig(FreshDir("frozen"));
  cfg.model.kind = "multimodal";
  cfg.model.embed = 4;
  cfg.model.encoder_hidden = 8;
  cfg.model.fusion_hidden = 8;
  cfg.pretrain.enabled = true;
  cfg.pretrain.options.epochs = 2;
  const auto result = CmdRun(cfg, false);
  const ModelParams saved = LoadCheckpoint(cfg.output.dir + "/model.ckpt");
  EXPECT_GT(saved.size(), result.final_params.size());
  EXPECT_EQ(CmdEval(cfg, cfg.output.dir + "/model.ckpt").accuracy,
            result.rounds.back().test_accuracy);
}

}  // namespace
}  // namespace fedroad::cli
