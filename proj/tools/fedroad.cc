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


// fedroad: command-line front end for the federated simulator.
//
//   fedroad run       --config cfg.json [--out DIR] [--seed N] [--force]
//   fedroad privatize --config cfg.json [--out DIR] [--seed N] [--force]
//   fedroad pretrain  --config cfg.json [--out DIR] [--seed N] [--force]
//   fedroad eval      --config cfg.json --checkpoint model.ckpt
//   fedroad partition --config cfg.json [--out DIR] [--seed N] [--force]
//
// FEDROAD_LOG sets the log level (trace, debug, info, warn, error, off).

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fedroad/errors.h"
#include "fedroad/experiment.h"
#include "fmt/format.h"
#include "spdlog/sinks/stdout_color_sinks.h"
#include "spdlog/spdlog.h"

namespace {

using fedroad::cli::ExperimentConfig;

void SetUpLogging() {
  auto logger = spdlog::stderr_color_mt("fedroad");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  const char* env = std::getenv("FEDROAD_LOG");
  const std::string level = env ? env : "info";
  const auto parsed = spdlog::level::from_str(level);
  if (parsed == spdlog::level::off && level != "off") {
    spdlog::warn("FEDROAD_LOG={} is not a log level, using info", level);
    spdlog::set_level(spdlog::level::info);
  } else {
    spdlog::set_level(parsed);
  }
}

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

void AddCommon(CLI::App* cmd, CommonFlags& flags, bool writes_output) {
  cmd->add_option("--config", flags.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "Override the top-level seed");
  if (writes_output) {
    cmd->add_option("--out", flags.out, "Output directory (overrides output.dir)");
    cmd->add_flag("--force", flags.force, "Write into a non-empty output directory");
  }
}

ExperimentConfig Resolve(const CommonFlags& flags) {
  ExperimentConfig cfg =
      flags.config.empty() ? fedroad::cli::ParseConfig("{}") : fedroad::cli::LoadConfig(flags.config);
  if (!flags.out.empty()) cfg.output.dir = flags.out;
  if (flags.seed) cfg.ApplySeed(*flags.seed);
  cfg.Validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with compressed updates and local privacy"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string checkpoint;

  auto* run = app.add_subcommand("run", "Run a federated experiment");
  auto* privatize = app.add_subcommand("privatize", "Privatize the training records");
  auto* pretrain = app.add_subcommand("pretrain", "Pretrain encoders with the triplet loss");
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on the test set");
  auto* partition = app.add_subcommand("partition", "Write the client partition");
  for (auto* cmd : {run, privatize, pretrain, partition}) AddCommon(cmd, flags, true);
  AddCommon(eval, flags, false);
  eval->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();

  CLI11_PARSE(app, argc, argv);
  SetUpLogging();

  try {
    const ExperimentConfig cfg = Resolve(flags);
    if (*run) {
      const auto result = fedroad::cli::CmdRun(cfg, flags.force);
      const auto& last = result.rounds.back();
      fmt::print("{}: {} rounds, final accuracy {:.4f}, {} bytes -> {}\n", cfg.run_id,
                 result.rounds.size(), last.test_accuracy, last.cumulative_bytes,
                 cfg.output.dir);
    } else if (*privatize) {
      const auto s = fedroad::cli::CmdPrivatize(cfg, flags.force);
      fmt::print("privatized {} records ({} entries) -> {}\n", s.records, s.entries,
                 cfg.output.dir);
    } else if (*pretrain) {
      const auto g = fedroad::cli::CmdPretrain(cfg, flags.force);
      fmt::print("intra {:.4f}  inter {:.4f}  retrieval {:.4f}\n", g.mean_intra_distance,
                 g.mean_inter_distance, g.cross_modal_retrieval);
    } else if (*eval) {
      const auto r = fedroad::cli::CmdEval(cfg, checkpoint);
      fmt::print("accuracy {:.6f}\nprecision {:.6f}\nrecall {:.6f}\nf1 {:.6f}\n", r.accuracy,
                 r.precision, r.recall, r.f1);
    } else if (*partition) {
      const auto plan = fedroad::cli::CmdPartition(cfg, flags.force);
      fmt::print("{} clients, {} records assigned ({}) -> {}\n", plan.num_clients(),
                 plan.TotalAssigned(), plan.scheme, cfg.output.dir);
    }
  } catch (const fedroad::ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return 2;
  } catch (const fedroad::FileError& e) {
    spdlog::error("file error: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
