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


#ifndef FEDROAD_FEDSIM_H_
#define FEDROAD_FEDSIM_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedroad/compress.h"
#include "fedroad/params.h"
#include "fedroad/rng.h"
#include "fedroad/tasks.h"

// Synchronous federated-learning simulator. Every model exchange is serialized
// into real payload bytes, metered, and decoded on the receiving side.
namespace fedroad::fedsim {

enum class Strategy { kMfed, kMfedQ, kMfedLrd, kFedAvg, kFedPaq, kLrDecay };
enum class LrSchedule { kAdaLr, kHarmonic, kConstant };
enum class Aggregation { kDeltaUniform, kWeighted };
enum class Compression { kRaw, kQsgd, kInt8 };

// Names as they appear in configs and metrics ("mfed", "adalr", ...). The
// parsers throw ConfigError naming `key`.
std::string_view ToString(Strategy s);
std::string_view ToString(LrSchedule s);
std::string_view ToString(Aggregation a);
Strategy ParseStrategy(std::string_view name, const std::string& key = "strategy");
LrSchedule ParseLrSchedule(std::string_view name, const std::string& key = "lr_schedule");
Aggregation ParseAggregation(std::string_view name,
                             const std::string& key = "aggregation");
const std::vector<Strategy>& AllStrategies();

struct FederationConfig {
  std::size_t clients = 3;        // K
  std::size_t rounds = 50;        // R
  std::size_t local_epochs = 10;  // E
  std::size_t local_batch = 16;
  double gamma0 = 0.1;
  double delta = 0.5;
  std::size_t zeta = 1;
  Strategy strategy = Strategy::kMfed;
  // Unset fields take the strategy's defaults (see ResolveProfile).
  std::optional<LrSchedule> lr_schedule;
  std::optional<Aggregation> aggregation;
  std::optional<double> participation_fraction;
  std::size_t new_data_threshold = 100;
  // Fresh samples per client per round; 0 means the whole local dataset
  // counts as new every round.
  std::size_t arrival_per_round = 0;
  std::uint32_t qsgd_s = kDefaultQsgdLevels;
  // Stop after the first round whose test accuracy reaches this value.
  std::optional<double> target_accuracy;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void Validate() const;

  friend bool operator==(const FederationConfig&, const FederationConfig&) = default;
};

// What a strategy sends and how the cloud combines it.
struct StrategyProfile {
  Compression downlink;
  Compression uplink;
  bool uplink_is_delta;  // false: clients send their full weights
  Aggregation aggregation;
  LrSchedule schedule;
  double participation;
};
StrategyProfile ResolveProfile(const FederationConfig& cfg);

// adalr: gamma0 * delta^floor(round / zeta); harmonic: gamma0 / (round + 1);
// constant: gamma0. Rounds are 0-based.
double DecayedLr(LrSchedule schedule, double gamma0, double delta, std::size_t zeta,
                 std::size_t round);
double DecayedLr(const FederationConfig& cfg, std::size_t round);

// Strictly greater: a client participates once its new data surpasses the
// threshold.
inline bool ThresholdGate(std::size_t new_samples, std::size_t threshold) {
  return new_samples > threshold;
}

// One serialized payload per parameter tensor, in parameter order.
struct Message {
  std::vector<std::vector<std::uint8_t>> payloads;
  std::size_t bytes() const;
};

// The rng is consumed only for QSGD.
Message EncodeMessage(const ModelParams& params, Compression compression,
                      std::uint32_t qsgd_s, RngStream& rng);
// Decodes into the layout of `like`; throws ProtocolError on a layout mismatch
// and FormatError on corrupt payloads.
ModelParams DecodeMessage(const Message& message, const ModelParams& like);

struct LocalUpdate {
  std::size_t client;
  Message payload;
  std::size_t samples;  // D_i
};

// Replaces the local model with `start`, runs `epochs` passes of shuffled
// mini-batch gradient descent over `indices` and returns the trained weights.
ModelParams LocalTrain(const FederatedTask& task, const ModelParams& start,
                       std::span<const std::size_t> indices, std::size_t epochs,
                       double lr, std::size_t batch, RngStream& rng);

// prev + (1/n) * sum of the decoded deltas.
ModelParams AggregateDeltaUniform(const ModelParams& prev,
                                  std::span<const ModelParams> deltas);
// sum_i (D_i / D) * weights_i. Throws InputError when sum D_i is zero.
ModelParams AggregateWeighted(std::span<const ModelParams> weights,
                              std::span<const std::size_t> samples);

struct RoundMetrics {
  std::size_t round = 0;
  double lr = 0.0;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;
  std::uint64_t cumulative_bytes = 0;
  std::size_t participants = 0;
  bool skipped = false;
  double wall_ms = 0.0;  // elapsed time of the round, the only nondeterministic field
};

struct ExperimentResult {
  std::vector<RoundMetrics> rounds;
  ModelParams final_params;
  EvalResult initial;
};

// Full simulation: R rounds (or fewer with target_accuracy), clients trained
// in parallel with one RngStream each and combined in client order.
// `partition[i]` lists the training indices of client i; its size must equal
// cfg.clients.
ExperimentResult RunExperiment(const FederationConfig& cfg, const FederatedTask& task,
                               const std::vector<std::vector<std::size_t>>& partition);

// 1-based number of rounds until test accuracy first reaches `target`, or
// rounds.size() + 1 when it never does.
std::size_t RoundsToTarget(const std::vector<RoundMetrics>& rounds, double target);
// cumulative_bytes after `count` rounds (clamped to the run length).
std::uint64_t CumulativeBytesAfter(const std::vector<RoundMetrics>& rounds,
                                   std::size_t count);

}  // namespace fedroad::fedsim

#endif  // FEDROAD_FEDSIM_H_
