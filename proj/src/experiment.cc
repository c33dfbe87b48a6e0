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


#include "fedroad/experiment.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <utility>

#include "fedroad/checkpoint.h"
#include "fedroad/errors.h"
#include "fedroad/rng.h"
#include "fmt/format.h"
#include "json.hpp"
#include "spdlog/spdlog.h"

namespace fedroad::cli {
namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Streams of the top-level seed. The simulator itself uses 0, 1 and 100 + i.
constexpr std::uint64_t kPartitionStream = 9;
constexpr std::uint64_t kPretrainStream = 10;
constexpr std::uint64_t kPrivatizeStream = 11;

// Reads one JSON object, remembering which keys were consumed so the rest can
// be rejected by path.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j_->is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  Section Child(const std::string& key) {
    const Json* v = Find(key);
    static const Json kEmpty = Json::object();
    return Section(v ? *v : kEmpty, Key(key));
  }

  void Get(const std::string& key, std::size_t& out) {
    if (const Json* v = Find(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() &&
                                      v->get<std::int64_t>() < 0)) {
        throw ConfigError(Key(key), "expected a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }
  void Get(const std::string& key, std::uint32_t& out) {
    std::size_t wide = out;
    Get(key, wide);
    if (wide > 0xffffffffu) throw ConfigError(Key(key), "out of range");
    out = static_cast<std::uint32_t>(wide);
  }
  void Get(const std::string& key, double& out) {
    if (const Json* v = Find(key)) {
      if (!v->is_number()) throw ConfigError(Key(key), "expected a number");
      out = v->get<double>();
    }
  }
  void Get(const std::string& key, std::optional<double>& out) {
    if (const Json* v = Find(key)) {
      if (v->is_null()) {
        out.reset();
        return;
      }
      if (!v->is_number()) throw ConfigError(Key(key), "expected a number or null");
      out = v->get<double>();
    }
  }
  void Get(const std::string& key, bool& out) {
    if (const Json* v = Find(key)) {
      if (!v->is_boolean()) throw ConfigError(Key(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void Get(const std::string& key, std::string& out) {
    if (const Json* v = Find(key)) {
      if (!v->is_string()) throw ConfigError(Key(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void Get(const std::string& key, std::vector<std::size_t>& out) {
    if (const Json* v = Find(key)) {
      if (!v->is_array()) throw ConfigError(Key(key), "expected an array of integers");
      out.clear();
      for (const Json& e : *v) {
        if (!e.is_number_unsigned()) {
          throw ConfigError(Key(key), "expected an array of non-negative integers");
        }
        out.push_back(e.get<std::size_t>());
      }
    }
  }
  // Reads a string and maps it through `parse`, which reports the key itself.
  template <typename T, typename Parse>
  void GetEnum(const std::string& key, T& out, Parse parse) {
    if (const Json* v = Find(key)) {
      if (!v->is_string()) throw ConfigError(Key(key), "expected a string");
      out = parse(v->get<std::string>(), Key(key));
    }
  }

  // Throws for the first key that no getter asked for.
  void Finish() const {
    for (const auto& [key, value] : j_->items()) {
      if (!seen_.contains(key)) throw ConfigError(Key(key), "unknown key");
    }
  }

 private:
  const Json* Find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }
  std::string Key(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const Json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

void ReadFederation(Section s, fedsim::FederationConfig& f) {
  s.Get("clients", f.clients);
  s.Get("rounds", f.rounds);
  s.Get("local_epochs", f.local_epochs);
  s.Get("local_batch", f.local_batch);
  s.Get("gamma0", f.gamma0);
  s.Get("delta", f.delta);
  s.Get("zeta", f.zeta);
  s.GetEnum("strategy", f.strategy, [](const std::string& v, const std::string& k) {
    return fedsim::ParseStrategy(v, k);
  });
  std::optional<fedsim::LrSchedule> schedule = f.lr_schedule;
  s.GetEnum("lr_schedule", schedule, [](const std::string& v, const std::string& k) {
    return std::optional(fedsim::ParseLrSchedule(v, k));
  });
  f.lr_schedule = schedule;
  std::optional<fedsim::Aggregation> aggregation = f.aggregation;
  s.GetEnum("aggregation", aggregation, [](const std::string& v, const std::string& k) {
    return std::optional(fedsim::ParseAggregation(v, k));
  });
  f.aggregation = aggregation;
  s.Get("participation_fraction", f.participation_fraction);
  s.Get("new_data_threshold", f.new_data_threshold);
  s.Get("arrival_per_round", f.arrival_per_round);
  s.Get("qsgd_s", f.qsgd_s);
  s.Get("target_accuracy", f.target_accuracy);
  s.Finish();
}

void ReadDataset(Section s, DatasetConfig& d) {
  s.Get("kind", d.kind);
  s.Get("train_images", d.train_images);
  s.Get("train_labels", d.train_labels);
  s.Get("test_images", d.test_images);
  s.Get("test_labels", d.test_labels);
  s.Get("test_per_class", d.test_per_class);
  Section syn = s.Child("synthetic");
  syn.Get("classes", d.synthetic.classes);
  syn.Get("per_class", d.synthetic.per_class);
  syn.Get("image_dim", d.synthetic.image_dim);
  syn.Get("vocab", d.synthetic.vocab);
  syn.Get("text_len", d.synthetic.text_len);
  syn.Get("noise_sigma", d.synthetic.noise_sigma);
  syn.Get("topic_prob", d.synthetic.topic_prob);
  syn.Finish();
  s.Finish();
}

void ReadModel(Section s, ModelConfig& m) {
  s.Get("kind", m.kind);
  s.Get("hidden", m.hidden);
  s.Get("encoder_hidden", m.encoder_hidden);
  s.Get("embed", m.embed);
  s.Get("fusion_hidden", m.fusion_hidden);
  s.Finish();
}

void ReadPartition(Section s, PartitionConfig& p) {
  s.Get("scheme", p.scheme);
  s.Get("num_shards", p.num_shards);
  s.Get("shards_per_client", p.shards_per_client);
  s.Get("classes_per_client", p.classes_per_client);
  s.Finish();
}

void ReadMldp(Section s, MldpSettings& m) {
  s.Get("enabled", m.enabled);
  s.Get("epsilon", m.mechanism.epsilon);
  s.Get("image_rows", m.mechanism.image_rows);
  s.Get("image_cols", m.mechanism.image_cols);
  s.Get("text_dims", m.mechanism.text_dims);
  s.Get("text_skip_threshold", m.mechanism.text_skip_threshold);
  s.Get("sensitivity", m.mechanism.sensitivity);
  s.Get("standardize", m.standardize);
  s.Finish();
}

void ReadPretrain(Section s, PretrainSettings& p) {
  s.Get("enabled", p.enabled);
  s.Get("alpha", p.triplet.alpha);
  s.Get("margin", p.triplet.margin);
  s.Get("floor", p.triplet.floor);
  s.Get("epochs", p.options.epochs);
  s.Get("lr", p.options.lr);
  s.Get("batch", p.options.batch);
  s.Get("freeze", p.freeze);
  s.Finish();
}

void Require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

// ------------------------------------------------------------------ datasets

struct Splits {
  std::vector<Record> train;
  std::vector<Record> test;
  std::size_t classes = 0;
  std::size_t vocab = 0;
};

Splits LoadSplits(const ExperimentConfig& cfg) {
  Splits s;
  if (cfg.dataset.kind == "idx") {
    s.train = data::LoadIdx(cfg.dataset.train_images, cfg.dataset.train_labels);
    s.test = data::LoadIdx(cfg.dataset.test_images, cfg.dataset.test_labels);
    for (const auto* set : {&s.train, &s.test}) {
      for (const Record& r : *set) s.classes = std::max(s.classes, r.label + 1);
    }
    s.classes = std::max<std::size_t>(s.classes, 2);
  } else {
    data::SynthConfig test_cfg = cfg.dataset.synthetic;
    test_cfg.per_class = cfg.dataset.test_per_class;
    s.train = data::SynthMultimodal(cfg.dataset.synthetic, 0);
    s.test = data::SynthMultimodal(test_cfg, 1);
    s.classes = cfg.dataset.synthetic.classes;
  }
  s.vocab = cfg.dataset.synthetic.vocab;
  return s;
}

data::PartitionPlan MakePartition(const ExperimentConfig& cfg,
                                  std::span<const std::size_t> labels,
                                  std::size_t classes) {
  const PartitionConfig& p = cfg.partition;
  const std::size_t k = cfg.federation.clients;
  RngStream rng(cfg.seed, kPartitionStream);
  if (p.scheme == "shards") {
    std::vector<std::size_t> counts = p.shards_per_client;
    if (counts.empty()) counts.assign(k, 1);
    if (std::accumulate(counts.begin(), counts.end(), std::size_t{0}) != p.num_shards) {
      counts = data::ScaleShardCounts(counts, p.num_shards);
    }
    return data::ShardPartition(labels, p.num_shards, counts, rng);
  }
  if (p.scheme == "class_restricted") {
    return data::ClassRestrictedPartition(labels, classes, p.classes_per_client, k, rng);
  }
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.Shuffle(std::span(order));
  data::PartitionPlan plan;
  plan.scheme = "iid";
  plan.clients.resize(k);
  for (std::size_t i = 0; i < order.size(); ++i) plan.clients[i % k].push_back(order[i]);
  for (auto& c : plan.clients) std::sort(c.begin(), c.end());
  return plan;
}

// Laplace standard deviation plus one: keeps standardized features O(1) at
// every epsilon.
double NoiseScale(const mldp::PrivacyBudget& b) {
  return b.laplace_scale() * std::sqrt(2.0) + 1.0;
}

// Privatized (noisy) or clean projected features, modalities concatenated
// text first.
fedsim::DenseDataset MldpFeatures(std::span<const Record> records, const MldpSettings& m,
                                  std::size_t vocab, bool noisy, RngStream& rng) {
  std::vector<double> flat;
  std::vector<std::size_t> labels;
  std::size_t width = 0;
  for (const Record& r : records) {
    const std::size_t before = flat.size();
    auto append = [&](const Tensor& feature, double scale) {
      for (double v : feature.data()) flat.push_back(m.standardize ? v / scale : v);
    };
    if (noisy) {
      for (const auto& p : mldp::PrivatizeRecord(r, m.mechanism, vocab, rng)) {
        append(p.feature(), NoiseScale(p.budget()));
      }
    } else {
      auto clean = [&](const Tensor& projected) {
        append(projected, NoiseScale(mldp::PrivacyBudget(m.mechanism.epsilon, projected.size(),
                                                         m.mechanism.sensitivity)));
      };
      if (r.has_text()) clean(mldp::ProjectText(mldp::TextFeatures(*r.tokens, vocab), m.mechanism));
      if (r.has_image()) clean(mldp::ProjectImage(*r.image, m.mechanism));
    }
    const std::size_t w = flat.size() - before;
    if (!labels.empty() && w != width) throw InputError("records mix modality sets");
    width = w;
    labels.push_back(r.label);
  }
  return {Tensor({labels.size(), width}, std::move(flat)), std::move(labels)};
}

models::ModelDims Dims(const ExperimentConfig& cfg, std::size_t classes) {
  models::ModelDims d;
  d.vocab = cfg.dataset.synthetic.vocab;
  d.hidden = cfg.model.encoder_hidden;
  d.embed = cfg.model.embed;
  d.image_dim = cfg.dataset.synthetic.image_dim;
  d.fusion_hidden = cfg.model.fusion_hidden;
  d.classes = classes;
  return d;
}

models::PretrainResult RunPretrain(const ExperimentConfig& cfg, std::span<const Record> train,
                                   std::size_t classes) {
  RngStream rng(cfg.seed, kPretrainStream);
  const auto init = models::EncoderParams::Init(Dims(cfg, classes), rng);
  return models::Pretrain(train, init, cfg.pretrain.triplet, cfg.pretrain.options, rng);
}

// eval_only skips privatization noise and pretraining: the checkpoint supplies
// every parameter.
PreparedExperiment PrepareImpl(const ExperimentConfig& cfg, bool eval_only) {
  cfg.Validate();
  Splits s = LoadSplits(cfg);
  PreparedExperiment out;
  out.train_labels = data::Labels(s.train);
  if (!eval_only) out.plan = MakePartition(cfg, out.train_labels, s.classes);

  if (cfg.model.kind == "mlp") {
    fedsim::DenseDataset train;
    fedsim::DenseDataset test;
    if (cfg.mldp.enabled) {
      RngStream rng(cfg.seed, kPrivatizeStream);
      train = MldpFeatures(s.train, cfg.mldp, s.vocab, !eval_only, rng);
      test = MldpFeatures(s.test, cfg.mldp, s.vocab, false, rng);
    } else {
      train = fedsim::DenseFromImages(s.train);
      test = fedsim::DenseFromImages(s.test);
    }
    out.task = std::make_unique<fedsim::DenseClassificationTask>(
        std::move(train), std::move(test), cfg.model.hidden, s.classes);
    return out;
  }

  const models::ModelDims dims = Dims(cfg, s.classes);
  std::optional<models::EncoderParams> encoders;
  bool freeze = false;
  if (cfg.pretrain.enabled && !eval_only) {
    models::PretrainResult pre = RunPretrain(cfg, s.train, s.classes);
    out.pretrain_loss = std::move(pre.epoch_loss);
    encoders = std::move(pre.encoders);
    freeze = cfg.pretrain.freeze;
    if (freeze) out.frozen_encoders = encoders;
  }
  out.task = std::make_unique<fedsim::MultimodalTask>(std::move(s.train), std::move(s.test),
                                                      dims, std::move(encoders), freeze);
  return out;
}

std::string Num(double v) { return fmt::format("{}", v); }

void WriteJson(const std::string& path, const OrderedJson& j) {
  WriteFileAtomic(path, j.dump(2) + "\n");
}

std::string OutPath(const ExperimentConfig& cfg, const char* file) {
  return (std::filesystem::path(cfg.output.dir) / file).string();
}

}  // namespace

// ------------------------------------------------------------------- config

void ExperimentConfig::ApplySeed(std::uint64_t s) {
  seed = s;
  federation.seed = s;
  dataset.synthetic.seed = s;
  mldp.mechanism.projection_seed = s;
}

void ExperimentConfig::Validate() const {
  Require(!run_id.empty() && run_id.find_first_of(",\"\n\r") == std::string::npos, "run_id",
          "must be non-empty without commas, quotes or newlines");
  Require(federation.seed == seed && dataset.synthetic.seed == seed &&
              mldp.mechanism.projection_seed == seed,
          "seed", "derived seeds out of sync; call ApplySeed");
  federation.Validate();

  Require(dataset.kind == "idx" || dataset.kind == "synthetic", "dataset.kind",
          "expected idx or synthetic");
  if (dataset.kind == "synthetic") {
    const data::SynthConfig& sc = dataset.synthetic;
    Require(sc.classes >= 2, "dataset.synthetic.classes", "must be >= 2");
    Require(sc.per_class >= 1, "dataset.synthetic.per_class", "must be >= 1");
    Require(sc.image_dim >= 1, "dataset.synthetic.image_dim", "must be >= 1");
    Require(sc.vocab >= sc.classes, "dataset.synthetic.vocab", "must be >= classes");
    Require(sc.text_len >= 1, "dataset.synthetic.text_len", "must be >= 1");
    Require(sc.noise_sigma >= 0.0, "dataset.synthetic.noise_sigma", "must be >= 0");
    Require(sc.topic_prob >= 0.0 && sc.topic_prob <= 1.0, "dataset.synthetic.topic_prob",
            "must lie in [0, 1]");
    Require(dataset.test_per_class >= 1, "dataset.test_per_class", "must be >= 1");
  }

  Require(model.kind == "mlp" || model.kind == "multimodal", "model.kind",
          "expected mlp or multimodal");
  if (model.kind == "multimodal") {
    Require(dataset.kind == "synthetic", "model.kind",
            "multimodal needs the synthetic dataset (text and image)");
    Require(model.encoder_hidden >= 1, "model.encoder_hidden", "must be >= 1");
    Require(model.embed >= 1, "model.embed", "must be >= 1");
    Require(model.fusion_hidden >= 1, "model.fusion_hidden", "must be >= 1");
  }

  const PartitionConfig& p = partition;
  Require(p.scheme == "shards" || p.scheme == "class_restricted" || p.scheme == "iid",
          "partition.scheme", "expected shards, class_restricted or iid");
  if (p.scheme == "shards") {
    Require(p.num_shards >= 1, "partition.num_shards", "must be >= 1");
    Require(p.shards_per_client.empty() || p.shards_per_client.size() == federation.clients,
            "partition.shards_per_client", "needs one entry per client");
  }
  if (p.scheme == "class_restricted") {
    Require(p.classes_per_client >= 1, "partition.classes_per_client", "must be >= 1");
  }

  const mldp::MldpConfig& mc = mldp.mechanism;
  Require(mc.epsilon > 0.0 && std::isfinite(mc.epsilon), "mldp.epsilon", "must be positive");
  Require(mc.sensitivity > 0.0, "mldp.sensitivity", "must be positive");
  Require(mc.image_rows >= 1, "mldp.image_rows", "must be >= 1");
  Require(mc.image_cols >= 1, "mldp.image_cols", "must be >= 1");
  Require(mc.text_dims >= 1, "mldp.text_dims", "must be >= 1");
  Require(!mldp.enabled || model.kind == "mlp", "mldp.enabled",
          "privatized features train the mlp model");

  Require(!pretrain.enabled || model.kind == "multimodal", "pretrain.enabled",
          "pretraining needs model.kind multimodal");
  Require(pretrain.triplet.margin >= 0.0, "pretrain.margin", "must be >= 0");
  Require(pretrain.triplet.floor <= pretrain.triplet.margin, "pretrain.floor",
          "must not exceed pretrain.margin");
  Require(pretrain.options.batch >= 2, "pretrain.batch", "must be >= 2");
  Require(pretrain.options.lr >= 0.0, "pretrain.lr", "must be >= 0");

  Require(!output.dir.empty(), "output.dir", "must be non-empty");
}

ExperimentConfig ParseConfig(const std::string& json_text) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Section s(root, "");
  s.Get("run_id", cfg.run_id);
  std::size_t seed = 0;
  s.Get("seed", seed);
  ReadFederation(s.Child("federation"), cfg.federation);
  ReadDataset(s.Child("dataset"), cfg.dataset);
  ReadModel(s.Child("model"), cfg.model);
  ReadPartition(s.Child("partition"), cfg.partition);
  ReadMldp(s.Child("mldp"), cfg.mldp);
  ReadPretrain(s.Child("pretrain"), cfg.pretrain);
  Section out = s.Child("output");
  out.Get("dir", cfg.output.dir);
  out.Get("record_wall_time", cfg.output.record_wall_time);
  out.Finish();
  s.Finish();

  cfg.ApplySeed(seed);
  const fedsim::StrategyProfile profile = fedsim::ResolveProfile(cfg.federation);
  cfg.federation.lr_schedule = profile.schedule;
  cfg.federation.aggregation = profile.aggregation;
  cfg.federation.participation_fraction = profile.participation;
  cfg.Validate();
  return cfg;
}

ExperimentConfig LoadConfig(const std::string& path) {
  const auto bytes = ReadFileBytes(path);
  return ParseConfig(std::string(bytes.begin(), bytes.end()));
}

std::string ConfigToJson(const ExperimentConfig& cfg) {
  const fedsim::FederationConfig& f = cfg.federation;
  const fedsim::StrategyProfile profile = fedsim::ResolveProfile(f);
  OrderedJson j;
  j["run_id"] = cfg.run_id;
  j["seed"] = cfg.seed;
  j["federation"] = {
      {"clients", f.clients},
      {"rounds", f.rounds},
      {"local_epochs", f.local_epochs},
      {"local_batch", f.local_batch},
      {"gamma0", f.gamma0},
      {"delta", f.delta},
      {"zeta", f.zeta},
      {"strategy", fedsim::ToString(f.strategy)},
      {"lr_schedule", fedsim::ToString(profile.schedule)},
      {"aggregation", fedsim::ToString(profile.aggregation)},
      {"participation_fraction", profile.participation},
      {"new_data_threshold", f.new_data_threshold},
      {"arrival_per_round", f.arrival_per_round},
      {"qsgd_s", f.qsgd_s},
      {"target_accuracy", f.target_accuracy ? OrderedJson(*f.target_accuracy) : OrderedJson()},
  };
  const data::SynthConfig& sc = cfg.dataset.synthetic;
  j["dataset"] = {
      {"kind", cfg.dataset.kind},
      {"train_images", cfg.dataset.train_images},
      {"train_labels", cfg.dataset.train_labels},
      {"test_images", cfg.dataset.test_images},
      {"test_labels", cfg.dataset.test_labels},
      {"test_per_class", cfg.dataset.test_per_class},
      {"synthetic",
       {{"classes", sc.classes},
        {"per_class", sc.per_class},
        {"image_dim", sc.image_dim},
        {"vocab", sc.vocab},
        {"text_len", sc.text_len},
        {"noise_sigma", sc.noise_sigma},
        {"topic_prob", sc.topic_prob}}},
  };
  j["model"] = {
      {"kind", cfg.model.kind},
      {"hidden", cfg.model.hidden},
      {"encoder_hidden", cfg.model.encoder_hidden},
      {"embed", cfg.model.embed},
      {"fusion_hidden", cfg.model.fusion_hidden},
  };
  j["partition"] = {
      {"scheme", cfg.partition.scheme},
      {"num_shards", cfg.partition.num_shards},
      {"shards_per_client", cfg.partition.shards_per_client},
      {"classes_per_client", cfg.partition.classes_per_client},
  };
  const mldp::MldpConfig& mc = cfg.mldp.mechanism;
  j["mldp"] = {
      {"enabled", cfg.mldp.enabled},
      {"epsilon", mc.epsilon},
      {"image_rows", mc.image_rows},
      {"image_cols", mc.image_cols},
      {"text_dims", mc.text_dims},
      {"text_skip_threshold", mc.text_skip_threshold},
      {"sensitivity", mc.sensitivity},
      {"standardize", cfg.mldp.standardize},
  };
  j["pretrain"] = {
      {"enabled", cfg.pretrain.enabled},
      {"alpha", cfg.pretrain.triplet.alpha},
      {"margin", cfg.pretrain.triplet.margin},
      {"floor", cfg.pretrain.triplet.floor},
      {"epochs", cfg.pretrain.options.epochs},
      {"lr", cfg.pretrain.options.lr},
      {"batch", cfg.pretrain.options.batch},
      {"freeze", cfg.pretrain.freeze},
  };
  j["output"] = {
      {"dir", cfg.output.dir},
      {"record_wall_time", cfg.output.record_wall_time},
  };
  return j.dump(2) + "\n";
}

// ----------------------------------------------------------------- commands

PreparedExperiment Prepare(const ExperimentConfig& cfg) { return PrepareImpl(cfg, false); }

std::string MetricsCsv(const std::string& run_id, fedsim::Strategy strategy,
                       const std::vector<fedsim::RoundMetrics>& rounds,
                       bool record_wall_time) {
  std::string out =
      "run_id,strategy,round,lr,test_accuracy,test_loss,uplink_bytes,downlink_bytes,"
      "cumulative_bytes,wall_ms\n";
  for (const auto& m : rounds) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", run_id, fedsim::ToString(strategy),
                       m.round, Num(m.lr), Num(m.test_accuracy), Num(m.test_loss),
                       m.uplink_bytes, m.downlink_bytes, m.cumulative_bytes,
                       record_wall_time ? fmt::format("{:.3f}", m.wall_ms) : "0");
  }
  return out;
}

ClassificationReport Classify(std::span<const std::size_t> predicted,
                              std::span<const std::size_t> labels) {
  if (predicted.size() != labels.size()) {
    throw InputError("prediction and label counts differ");
  }
  ClassificationReport r;
  if (labels.empty()) return r;
  std::set<std::size_t> classes(labels.begin(), labels.end());
  classes.insert(predicted.begin(), predicted.end());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i];
  r.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  for (std::size_t c : classes) {
    std::size_t tp = 0, pred_c = 0, true_c = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      pred_c += predicted[i] == c;
      true_c += labels[i] == c;
      tp += predicted[i] == c && labels[i] == c;
    }
    r.precision += pred_c ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    r.recall += true_c ? static_cast<double>(tp) / static_cast<double>(true_c) : 0.0;
  }
  r.precision /= static_cast<double>(classes.size());
  r.recall /= static_cast<double>(classes.size());
  const double sum = r.precision + r.recall;
  r.f1 = sum > 0.0 ? 2.0 * r.precision * r.recall / sum : 0.0;
  return r;
}

void PrepareOutputDir(const std::string& dir, bool force) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec)) throw FileError(dir + " exists and is not a directory");
    if (!fs::is_empty(dir, ec) && !force) {
      throw FileError("output directory " + dir + " is not empty (pass --force to overwrite)");
    }
    return;
  }
  fs::create_directories(dir, ec);
  if (ec) throw FileError("cannot create " + dir + ": " + ec.message());
}

fedsim::ExperimentResult CmdRun(const ExperimentConfig& cfg, bool force) {
  cfg.Validate();
  PrepareOutputDir(cfg.output.dir, force);
  PreparedExperiment prep = Prepare(cfg);
  spdlog::info("run {}: {} on {} training records, {} clients ({})", cfg.run_id,
               fedsim::ToString(cfg.federation.strategy), prep.train_labels.size(),
               prep.plan.num_clients(), prep.plan.scheme);
  fedsim::ExperimentResult result =
      fedsim::RunExperiment(cfg.federation, *prep.task, prep.plan.clients);
  for (const auto& m : result.rounds) {
    spdlog::info("round {:>3}  lr {:.6g}  acc {:.4f}  loss {:.4f}  bytes {}{}", m.round, m.lr,
                 m.test_accuracy, m.test_loss, m.cumulative_bytes, m.skipped ? "  (skipped)" : "");
  }

  ModelParams model;
  if (prep.frozen_encoders) prep.frozen_encoders->AppendTo(model);
  for (std::size_t i = 0; i < result.final_params.size(); ++i) {
    model.Add(result.final_params.name(i), result.final_params.tensor(i));
  }
  WriteFileAtomic(OutPath(cfg, "metrics.csv"),
                  MetricsCsv(cfg.run_id, cfg.federation.strategy, result.rounds,
                             cfg.output.record_wall_time));
  SaveCheckpoint(OutPath(cfg, "model.ckpt"), model);
  WriteFileAtomic(OutPath(cfg, "config.resolved.json"), ConfigToJson(cfg));
  return result;
}

PrivatizeSummary CmdPrivatize(const ExperimentConfig& cfg, bool force) {
  cfg.Validate();
  PrepareOutputDir(cfg.output.dir, force);
  const Splits s = LoadSplits(cfg);
  RngStream rng(cfg.seed, kPrivatizeStream);
  std::vector<NamedBlob> entries;
  OrderedJson modalities = OrderedJson::object();
  for (std::size_t i = 0; i < s.train.size(); ++i) {
    for (const auto& p : mldp::PrivatizeRecord(s.train[i], cfg.mldp.mechanism, s.vocab, rng)) {
      const char* name = p.modality() == Modality::kText ? "text" : "image";
      entries.push_back({fmt::format("record.{}.{}", i, name), mldp::Serialize(p)});
      const mldp::PrivacyBudget& b = p.budget();
      modalities[name] = {{"dims", b.output_dims()},
                          {"projected", p.projected()},
                          {"per_dim_epsilon", b.per_dim_epsilon()},
                          {"laplace_scale", b.laplace_scale()}};
    }
  }
  WriteFileAtomic(OutPath(cfg, "privatized.frc"), SerializeContainer(entries));
  OrderedJson report;
  report["epsilon"] = cfg.mldp.mechanism.epsilon;
  report["sensitivity"] = cfg.mldp.mechanism.sensitivity;
  report["records"] = s.train.size();
  report["entries"] = entries.size();
  report["modalities"] = modalities;
  WriteJson(OutPath(cfg, "budget.json"), report);
  WriteFileAtomic(OutPath(cfg, "config.resolved.json"), ConfigToJson(cfg));
  spdlog::info("privatized {} records into {} entries", s.train.size(), entries.size());
  return {s.train.size(), entries.size()};
}

models::EmbeddingGeometry CmdPretrain(const ExperimentConfig& cfg, bool force) {
  cfg.Validate();
  if (cfg.dataset.kind != "synthetic") {
    throw ConfigError("dataset.kind", "pretraining needs text and image records (synthetic)");
  }
  PrepareOutputDir(cfg.output.dir, force);
  const Splits s = LoadSplits(cfg);
  const models::PretrainResult pre = RunPretrain(cfg, s.train, s.classes);
  const models::EmbeddingGeometry g = models::MeasureGeometry(s.test, pre.encoders);
  ModelParams enc;
  pre.encoders.AppendTo(enc);
  SaveCheckpoint(OutPath(cfg, "encoders.ckpt"), enc);
  std::string trace = "epoch,loss\n";
  for (std::size_t e = 0; e < pre.epoch_loss.size(); ++e) {
    trace += fmt::format("{},{}\n", e, Num(pre.epoch_loss[e]));
  }
  WriteFileAtomic(OutPath(cfg, "pretrain_loss.csv"), trace);
  OrderedJson geo;
  geo["mean_intra_distance"] = g.mean_intra_distance;
  geo["mean_inter_distance"] = g.mean_inter_distance;
  geo["cross_modal_retrieval"] = g.cross_modal_retrieval;
  WriteJson(OutPath(cfg, "geometry.json"), geo);
  WriteFileAtomic(OutPath(cfg, "config.resolved.json"), ConfigToJson(cfg));
  spdlog::info("pretrain: intra {:.4f} inter {:.4f} retrieval {:.4f}", g.mean_intra_distance,
               g.mean_inter_distance, g.cross_modal_retrieval);
  return g;
}

ClassificationReport CmdEval(const ExperimentConfig& cfg, const std::string& checkpoint) {
  const ModelParams params = LoadCheckpoint(checkpoint);
  const PreparedExperiment prep = PrepareImpl(cfg, true);
  return Classify(prep.task->PredictTest(params), prep.task->TestLabels());
}

data::PartitionPlan CmdPartition(const ExperimentConfig& cfg, bool force) {
  cfg.Validate();
  PrepareOutputDir(cfg.output.dir, force);
  const Splits s = LoadSplits(cfg);
  const std::vector<std::size_t> labels = data::Labels(s.train);
  data::PartitionPlan plan = MakePartition(cfg, labels, s.classes);
  OrderedJson j;
  j["scheme"] = plan.scheme;
  j["parameters"] = plan.parameters;
  j["records"] = labels.size();
  j["assigned"] = plan.TotalAssigned();
  j["mean_classes_per_client"] = data::MeanClassesPerClient(plan, labels);
  OrderedJson clients = OrderedJson::array();
  for (std::size_t i = 0; i < plan.num_clients(); ++i) {
    std::vector<std::size_t> counts(s.classes);
    for (std::size_t idx : plan.clients[i]) ++counts[labels[idx]];
    clients.push_back({{"client", i},
                       {"size", plan.clients[i].size()},
                       {"class_counts", counts},
                       {"indices", plan.clients[i]}});
  }
  j["clients"] = clients;
  WriteJson(OutPath(cfg, "partition.json"), j);
  WriteFileAtomic(OutPath(cfg, "config.resolved.json"), ConfigToJson(cfg));
  return plan;
}

}  // namespace fedroad::cli
