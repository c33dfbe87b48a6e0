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


#include "fedroad/fedsim.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>

#include "fedroad/errors.h"

namespace fedroad::fedsim {
namespace {

template <typename E>
struct NamedValue {
  std::string_view name;
  E value;
};

constexpr NamedValue<Strategy> kStrategies[] = {
    {"mfed", Strategy::kMfed},       {"mfed_q", Strategy::kMfedQ},
    {"mfed_lrd", Strategy::kMfedLrd}, {"fedavg", Strategy::kFedAvg},
    {"fedpaq", Strategy::kFedPaq},   {"lrdecay", Strategy::kLrDecay},
};
constexpr NamedValue<LrSchedule> kSchedules[] = {
    {"adalr", LrSchedule::kAdaLr},
    {"harmonic", LrSchedule::kHarmonic},
    {"constant", LrSchedule::kConstant},
};
constexpr NamedValue<Aggregation> kAggregations[] = {
    {"delta_uniform", Aggregation::kDeltaUniform},
    {"weighted", Aggregation::kWeighted},
};

template <typename E, std::size_t N>
std::string_view NameOf(const NamedValue<E> (&table)[N], E value) {
  for (const auto& e : table) {
    if (e.value == value) return e.name;
  }
  return "?";
}

template <typename E, std::size_t N>
E Parse(const NamedValue<E> (&table)[N], std::string_view name, const std::string& key) {
  std::string options;
  for (const auto& e : table) {
    if (e.name == name) return e.value;
    options += (options.empty() ? "" : ", ") + std::string(e.name);
  }
  throw ConfigError(key, "unknown value \"" + std::string(name) + "\" (expected one of " +
                             options + ")");
}

}  // namespace

std::string_view ToString(Strategy s) { return NameOf(kStrategies, s); }
std::string_view ToString(LrSchedule s) { return NameOf(kSchedules, s); }
std::string_view ToString(Aggregation a) { return NameOf(kAggregations, a); }

Strategy ParseStrategy(std::string_view name, const std::string& key) {
  return Parse(kStrategies, name, key);
}
LrSchedule ParseLrSchedule(std::string_view name, const std::string& key) {
  return Parse(kSchedules, name, key);
}
Aggregation ParseAggregation(std::string_view name, const std::string& key) {
  return Parse(kAggregations, name, key);
}

const std::vector<Strategy>& AllStrategies() {
  static const std::vector<Strategy> all = {Strategy::kMfed,   Strategy::kMfedQ,
                                            Strategy::kMfedLrd, Strategy::kFedAvg,
                                            Strategy::kFedPaq, Strategy::kLrDecay};
  return all;
}

void FederationConfig::Validate() const {
  if (clients < 1) throw ConfigError("federation.clients", "must be >= 1");
  if (rounds < 1) throw ConfigError("federation.rounds", "must be >= 1");
  if (local_epochs < 1) throw ConfigError("federation.local_epochs", "must be >= 1");
  if (local_batch < 1) throw ConfigError("federation.local_batch", "must be >= 1");
  if (!(gamma0 >= 0.0) || !std::isfinite(gamma0)) {
    throw ConfigError("federation.gamma0", "must be finite and non-negative");
  }
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw ConfigError("federation.delta", "must lie in (0, 1]");
  }
  if (zeta < 1) throw ConfigError("federation.zeta", "must be >= 1");
  if (participation_fraction &&
      !(*participation_fraction > 0.0 && *participation_fraction <= 1.0)) {
    throw ConfigError("federation.participation_fraction", "must lie in (0, 1]");
  }
  if (qsgd_s < 1) throw ConfigError("federation.qsgd_s", "must be >= 1");
  if (target_accuracy && !(*target_accuracy > 0.0 && *target_accuracy <= 1.0)) {
    throw ConfigError("federation.target_accuracy", "must lie in (0, 1]");
  }
}

StrategyProfile ResolveProfile(const FederationConfig& cfg) {
  StrategyProfile p{};
  switch (cfg.strategy) {
    case Strategy::kMfed:
      p = {Compression::kInt8, Compression::kQsgd, true, Aggregation::kDeltaUniform,
           LrSchedule::kAdaLr, 1.0};
      break;
    case Strategy::kMfedQ:
      p = {Compression::kRaw, Compression::kRaw, true, Aggregation::kDeltaUniform,
           LrSchedule::kAdaLr, 1.0};
      break;
    case Strategy::kMfedLrd:
      p = {Compression::kInt8, Compression::kQsgd, true, Aggregation::kDeltaUniform,
           LrSchedule::kConstant, 1.0};
      break;
    case Strategy::kFedAvg:
      p = {Compression::kRaw, Compression::kRaw, false, Aggregation::kWeighted,
           LrSchedule::kConstant, 1.0};
      break;
    case Strategy::kFedPaq:
      p = {Compression::kRaw, Compression::kQsgd, true, Aggregation::kDeltaUniform,
           LrSchedule::kConstant, 0.5};
      break;
    case Strategy::kLrDecay:
      p = {Compression::kRaw, Compression::kRaw, false, Aggregation::kWeighted,
           LrSchedule::kAdaLr, 1.0};
      break;
  }
  if (cfg.lr_schedule) p.schedule = *cfg.lr_schedule;
  if (cfg.aggregation) p.aggregation = *cfg.aggregation;
  if (cfg.participation_fraction) p.participation = *cfg.participation_fraction;
  return p;
}

double DecayedLr(LrSchedule schedule, double gamma0, double delta, std::size_t zeta,
                 std::size_t round) {
  switch (schedule) {
    case LrSchedule::kAdaLr:
      return gamma0 * std::pow(delta, static_cast<double>(round / zeta));
    case LrSchedule::kHarmonic:
      return gamma0 / static_cast<double>(round + 1);
    case LrSchedule::kConstant:
      break;
  }
  return gamma0;
}

double DecayedLr(const FederationConfig& cfg, std::size_t round) {
  return DecayedLr(ResolveProfile(cfg).schedule, cfg.gamma0, cfg.delta, cfg.zeta, round);
}

std::size_t Message::bytes() const {
  std::size_t n = 0;
  for (const auto& p : payloads) n += p.size();
  return n;
}

Message EncodeMessage(const ModelParams& params, Compression compression,
                      std::uint32_t qsgd_s, RngStream& rng) {
  Message m;
  m.payloads.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params.tensor(i);
    switch (compression) {
      case Compression::kRaw:
        m.payloads.push_back(Serialize(t));
        break;
      case Compression::kQsgd:
        m.payloads.push_back(Serialize(QsgdQuantize(t, qsgd_s, rng)));
        break;
      case Compression::kInt8:
        m.payloads.push_back(Serialize(Int8Quantize(t)));
        break;
    }
  }
  return m;
}

ModelParams DecodeMessage(const Message& message, const ModelParams& like) {
  if (message.payloads.size() != like.size()) {
    throw ProtocolError("message carries " + std::to_string(message.payloads.size()) +
                        " tensors, model has " + std::to_string(like.size()));
  }
  ModelParams out = like;
  for (std::size_t i = 0; i < like.size(); ++i) {
    Tensor t = Decode(DeserializePayload(message.payloads[i]));
    if (t.shape() != like.tensor(i).shape()) {
      throw ProtocolError("tensor " + like.name(i) + " arrived with shape " +
                          ShapeToString(t.shape()));
    }
    out.tensor(i) = std::move(t);
  }
  return out;
}

ModelParams LocalTrain(const FederatedTask& task, const ModelParams& start,
                       std::span<const std::size_t> indices, std::size_t epochs,
                       double lr, std::size_t batch, RngStream& rng) {
  ModelParams params = start;
  if (epochs == 0 || lr == 0.0 || indices.empty()) return params;
  if (batch == 0) throw InputError("local batch size must be positive");
  std::vector<std::size_t> order(indices.begin(), indices.end());
  ModelParams grad = params.ZerosLike();
  for (std::size_t e = 0; e < epochs; ++e) {
    rng.Shuffle(std::span(order));
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      task.LossAndGrad(params, std::span(order).subspan(begin, end - begin), grad);
      params.Axpy(-lr, grad);
    }
  }
  return params;
}

ModelParams AggregateDeltaUniform(const ModelParams& prev,
                                  std::span<const ModelParams> deltas) {
  if (deltas.empty()) throw InputError("aggregation needs at least one update");
  ModelParams sum = prev.ZerosLike();
  for (const ModelParams& d : deltas) sum += d;
  ModelParams out = prev;
  out.Axpy(1.0 / static_cast<double>(deltas.size()), sum);
  return out;
}

ModelParams AggregateWeighted(std::span<const ModelParams> weights,
                              std::span<const std::size_t> samples) {
  if (weights.empty() || weights.size() != samples.size()) {
    throw InputError("weighted aggregation needs one sample count per update");
  }
  std::size_t total = 0;
  for (std::size_t d : samples) total += d;
  if (total == 0) throw InputError("weighted aggregation over zero samples");
  ModelParams out = weights[0].ZerosLike();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.Axpy(static_cast<double>(samples[i]) / static_cast<double>(total), weights[i]);
  }
  return out;
}

ExperimentResult RunExperiment(const FederationConfig& cfg, const FederatedTask& task,
                               const std::vector<std::vector<std::size_t>>& partition) {
  cfg.Validate();
  if (partition.size() != cfg.clients) {
    throw InputError("partition has " + std::to_string(partition.size()) +
                     " clients, config expects " + std::to_string(cfg.clients));
  }
  const StrategyProfile profile = ResolveProfile(cfg);
  const std::size_t k = cfg.clients;

  RngStream init_rng(cfg.seed, 0);
  RngStream cloud_rng(cfg.seed, 1);
  std::vector<RngStream> client_rng;
  client_rng.reserve(k);
  for (std::size_t i = 0; i < k; ++i) client_rng.emplace_back(cfg.seed, 100 + i);

  ExperimentResult result;
  ModelParams global = task.InitParams(init_rng);
  result.initial = task.Evaluate(global);
  EvalResult last = result.initial;

  std::vector<std::size_t> new_samples(k);
  for (std::size_t i = 0; i < k; ++i) new_samples[i] = partition[i].size();

  std::uint64_t cumulative = 0;
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    const auto round_start = std::chrono::steady_clock::now();
    RoundMetrics m;
    m.round = round;
    m.lr = DecayedLr(profile.schedule, cfg.gamma0, cfg.delta, cfg.zeta, round);
    if (cfg.arrival_per_round > 0 && round > 0) {
      for (auto& n : new_samples) n += cfg.arrival_per_round;
    }

    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < k; ++i) {
      if (!partition[i].empty() && ThresholdGate(new_samples[i], cfg.new_data_threshold)) {
        chosen.push_back(i);
      }
    }
    if (profile.participation < 1.0 && !chosen.empty()) {
      const auto take = std::max<std::size_t>(
          1, static_cast<std::size_t>(
                 std::ceil(profile.participation * static_cast<double>(chosen.size()))));
      cloud_rng.Shuffle(std::span(chosen));
      chosen.resize(std::min(take, chosen.size()));
      std::sort(chosen.begin(), chosen.end());
    }

    if (chosen.empty()) {
      m.skipped = true;
      m.test_accuracy = last.accuracy;
      m.test_loss = last.loss;
      m.cumulative_bytes = cumulative;
      result.rounds.push_back(m);
      continue;
    }

    const Message down = EncodeMessage(global, profile.downlink, cfg.qsgd_s, cloud_rng);
    const ModelParams received = DecodeMessage(down, global);
    m.downlink_bytes = static_cast<std::uint64_t>(down.bytes()) * chosen.size();

    std::vector<Message> uplink(chosen.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t c = 0; c < chosen.size(); ++c) {
      try {
        const std::size_t i = chosen[c];
        ModelParams trained = LocalTrain(task, received, partition[i], cfg.local_epochs,
                                         m.lr, cfg.local_batch, client_rng[i]);
        if (profile.uplink_is_delta) trained -= received;
        uplink[c] = EncodeMessage(trained, profile.uplink, cfg.qsgd_s, client_rng[i]);
      } catch (...) {
#pragma omp critical(fedsim_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<ModelParams> decoded;
    std::vector<std::size_t> samples;
    for (std::size_t c = 0; c < chosen.size(); ++c) {
      m.uplink_bytes += uplink[c].bytes();
      decoded.push_back(DecodeMessage(uplink[c], global));
      samples.push_back(partition[chosen[c]].size());
    }
    if (profile.uplink_is_delta) {
      global = profile.aggregation == Aggregation::kDeltaUniform
                   ? AggregateDeltaUniform(global, decoded)
                   : global + AggregateWeighted(decoded, samples);
    } else {
      if (profile.aggregation == Aggregation::kWeighted) {
        global = AggregateWeighted(decoded, samples);
      } else {
        const std::vector<std::size_t> ones(decoded.size(), 1);
        global = AggregateWeighted(decoded, ones);
      }
    }
    if (cfg.arrival_per_round > 0) {
      for (std::size_t i : chosen) new_samples[i] = 0;
    }

    last = task.Evaluate(global);
    m.participants = chosen.size();
    m.test_accuracy = last.accuracy;
    m.test_loss = last.loss;
    cumulative += m.uplink_bytes + m.downlink_bytes;
    m.cumulative_bytes = cumulative;
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                          round_start)
                    .count();
    result.rounds.push_back(m);
    if (cfg.target_accuracy && last.accuracy >= *cfg.target_accuracy) break;
  }
  result.final_params = std::move(global);
  return result;
}

std::size_t RoundsToTarget(const std::vector<RoundMetrics>& rounds, double target) {
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    if (rounds[i].test_accuracy >= target) return i + 1;
  }
  return rounds.size() + 1;
}

std::uint64_t CumulativeBytesAfter(const std::vector<RoundMetrics>& rounds,
                                   std::size_t count) {
  if (rounds.empty() || count == 0) return 0;
  return rounds[std::min(count, rounds.size()) - 1].cumulative_bytes;
}

}  // namespace fedroad::fedsim
