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


#ifndef FEDROAD_EXPERIMENT_H_
#define FEDROAD_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedroad/data.h"
#include "fedroad/fedsim.h"
#include "fedroad/mldp.h"
#include "fedroad/models.h"
#include "fedroad/tasks.h"

// Experiment configuration and the commands behind the fedroad tool. Every
// command reads one ExperimentConfig and writes into output.dir.
namespace fedroad::cli {

struct DatasetConfig {
  std::string kind = "idx";  // idx | synthetic
  std::string train_images = "data/digits/train-images-idx3-ubyte";
  std::string train_labels = "data/digits/train-labels-idx1-ubyte";
  std::string test_images = "data/digits/t10k-images-idx3-ubyte";
  std::string test_labels = "data/digits/t10k-labels-idx1-ubyte";
  // Synthetic generator; the top-level seed replaces synthetic.seed.
  data::SynthConfig synthetic;
  std::size_t test_per_class = 100;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct ModelConfig {
  std::string kind = "mlp";  // mlp | multimodal
  // mlp: hidden width, 0 for softmax regression.
  std::size_t hidden = 64;
  // multimodal encoder and fusion widths.
  std::size_t encoder_hidden = 32;
  std::size_t embed = 16;
  std::size_t fusion_hidden = 32;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct PartitionConfig {
  std::string scheme = "shards";  // shards | class_restricted | iid
  std::size_t num_shards = 60;
  // Shards per client. Empty deals num_shards / clients to everyone; a list
  // whose sum differs from num_shards is rescaled by largest remainder.
  std::vector<std::size_t> shards_per_client;
  std::size_t classes_per_client = 2;

  friend bool operator==(const PartitionConfig&, const PartitionConfig&) = default;
};

struct MldpSettings {
  bool enabled = false;
  // projection_seed is replaced by the top-level seed.
  mldp::MldpConfig mechanism;
  // Divide each privatized modality by its noise scale (Laplace std + 1).
  bool standardize = true;

  friend bool operator==(const MldpSettings&, const MldpSettings&) = default;
};

struct PretrainSettings {
  bool enabled = false;
  models::TripletConfig triplet;
  models::PretrainOptions options;
  // Keep pretrained encoders fixed and federate only the fusion block.
  bool freeze = true;

  friend bool operator==(const PretrainSettings&, const PretrainSettings&) = default;
};

struct OutputConfig {
  std::string dir = "runs/default";
  bool record_wall_time = false;

  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct ExperimentConfig {
  std::string run_id = "run";
  std::uint64_t seed = 0;
  // federation.seed mirrors the top-level seed.
  fedsim::FederationConfig federation;
  DatasetConfig dataset;
  ModelConfig model;
  PartitionConfig partition;
  MldpSettings mldp;
  PretrainSettings pretrain;
  OutputConfig output;

  // Copies the top-level seed into the places that consume it.
  void ApplySeed(std::uint64_t s);
  // Throws ConfigError with the dotted key of the first violation.
  void Validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Parses JSON text. Unknown keys, type mismatches and constraint violations
// throw ConfigError naming the key path. Missing keys take defaults, and the
// strategy-dependent federation fields are filled from the strategy profile.
ExperimentConfig ParseConfig(const std::string& json_text);
ExperimentConfig LoadConfig(const std::string& path);
// Every field, pretty-printed; ParseConfig(ConfigToJson(c)) == c.
std::string ConfigToJson(const ExperimentConfig& cfg);

// Dataset, task and partition built from a config.
struct PreparedExperiment {
  std::unique_ptr<fedsim::FederatedTask> task;
  data::PartitionPlan plan;
  std::vector<std::size_t> train_labels;
  std::vector<double> pretrain_loss;  // empty unless pretraining ran
  // Encoders held outside the federated parameters (frozen pretraining).
  std::optional<models::EncoderParams> frozen_encoders;
};
PreparedExperiment Prepare(const ExperimentConfig& cfg);

// Header: run_id,strategy,round,lr,test_accuracy,test_loss,uplink_bytes,
// downlink_bytes,cumulative_bytes,wall_ms. wall_ms is 0 unless recorded.
std::string MetricsCsv(const std::string& run_id, fedsim::Strategy strategy,
                       const std::vector<fedsim::RoundMetrics>& rounds,
                       bool record_wall_time);

// Macro averages over the classes present in labels or predictions. F1 is the
// harmonic mean of the macro precision and recall.
struct ClassificationReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};
ClassificationReport Classify(std::span<const std::size_t> predicted,
                              std::span<const std::size_t> labels);

// Creates output.dir. Throws FileError when it exists with content and
// `force` is false.
void PrepareOutputDir(const std::string& dir, bool force);

// run: metrics.csv, model.ckpt, config.resolved.json.
fedsim::ExperimentResult CmdRun(const ExperimentConfig& cfg, bool force);
// privatize: privatized.frc (one FRP1 entry per record modality, named
// "record.<i>.<text|image>") and budget.json.
struct PrivatizeSummary {
  std::size_t records = 0;
  std::size_t entries = 0;
};
PrivatizeSummary CmdPrivatize(const ExperimentConfig& cfg, bool force);
// pretrain: encoders.ckpt, pretrain_loss.csv, geometry.json.
models::EmbeddingGeometry CmdPretrain(const ExperimentConfig& cfg, bool force);
// eval: scores a model checkpoint on the configured test set. No files.
ClassificationReport CmdEval(const ExperimentConfig& cfg, const std::string& checkpoint);
// partition: partition.json with per-client indices and class counts.
data::PartitionPlan CmdPartition(const ExperimentConfig& cfg, bool force);

}  // namespace fedroad::cli

#endif  // FEDROAD_EXPERIMENT_H_
