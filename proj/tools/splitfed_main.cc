// Copyright 2026 The Splitfed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// splitfed command line: train, evaluate, dp-sweep, audit-mi, overhead,
// cluster, synth.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "splitfed/commands.h"
#include "splitfed/config.h"
#include "splitfed/errors.h"

namespace {

using namespace splitfed;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonFlags {
  std::string config_path;
  std::string preset = "paper";
  std::string out;
  long long seed = -1;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  std::string checkpoint;
  std::string scope = "own";
};

void AddCommon(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "Config file (key: type = value)");
  cmd->add_option("--preset", f.preset, "Base profile")
      ->check(CLI::IsMember({"paper", "desk"}));
  cmd->add_option("--out", f.out, "Output directory (overrides run.out)");
  cmd->add_option("--seed", f.seed, "Run seed (overrides run.seed)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--threads", f.threads, "Concurrent GS pipelines")
      ->check(CLI::PositiveNumber);
}

RunConfig BuildConfig(const CommonFlags& f) {
  RunConfig config = PresetByName(f.preset);
  if (!f.config_path.empty()) ApplyConfigFile(f.config_path, config);
  if (!f.out.empty()) config.out_dir = f.out;
  if (f.seed >= 0) config.seed = static_cast<std::uint64_t>(f.seed);
  return config;
}

std::string CheckpointPath(const CommonFlags& f, const RunConfig& config) {
  if (!f.checkpoint.empty()) return f.checkpoint;
  return (std::filesystem::path(config.out_dir) / "model.ckpt").string();
}

void PrintOverhead(const OverheadReport& report) {
  for (const auto& [name, value] : OverheadRows(report)) {
    std::printf("%-36s %.6g\n", name.c_str(), value);
  }
}

int Run(int argc, char** argv) {
  CLI::App app{"Split learning for privacy-preserving load forecasting"};
  app.require_subcommand(1);
  CommonFlags f;
  std::function<void()> action;

  auto* train = app.add_subcommand("train", "Train a federation and checkpoint it");
  AddCommon(train, f);
  train->callback([&] {
    action = [&] {
      const auto out = TrainCommand(BuildConfig(f), f.threads);
      std::printf("epochs %zu  test mse %.6f  test r2 %.4f\n",
                  out.history.epochs.size(), out.test.mse, out.test.r2);
    };
  });

  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint");
  AddCommon(evaluate, f);
  evaluate->add_option("--checkpoint", f.checkpoint, "Default <out>/model.ckpt");
  evaluate->add_option("--scope", f.scope, "own | cross | unseen")
      ->check(CLI::IsMember({"own", "cross", "unseen"}));
  evaluate->callback([&] {
    action = [&] {
      const RunConfig config = BuildConfig(f);
      const auto rows = EvaluateCommand(config, CheckpointPath(f, config),
                                        ParseEvalScope(f.scope), f.threads);
      std::printf("%zu rows -> %s\n", rows.size(), config.out_dir.c_str());
    };
  });

  auto* sweep = app.add_subcommand("dp-sweep", "Train and audit across DP budgets");
  AddCommon(sweep, f);
  sweep->callback([&] {
    action = [&] {
      for (const SweepRow& r : DpSweepCommand(BuildConfig(f), f.threads)) {
        std::printf("eps %-6g delta %-8g replica %zu  test mse %.6f  mi %.4f\n",
                    r.epsilon, r.delta, r.replica, r.test.mse, r.mi);
      }
    };
  });

  auto* audit = app.add_subcommand("audit-mi", "MINE audit of shared activations");
  AddCommon(audit, f);
  audit->add_option("--checkpoint", f.checkpoint, "Default <out>/model.ckpt");
  audit->callback([&] {
    action = [&] {
      const RunConfig config = BuildConfig(f);
      for (const MiAuditRow& r : AuditMiCommand(config, CheckpointPath(f, config))) {
        std::printf("%-7s %.4f\n", MiTargetName(r.target).c_str(), r.estimate);
      }
    };
  });

  auto* overhead = app.add_subcommand("overhead", "Client/provider cost shares");
  AddCommon(overhead, f);
  overhead->callback([&] {
    action = [&] { PrintOverhead(OverheadCommand(BuildConfig(f))); };
  });

  auto* cluster = app.add_subcommand("cluster", "Group clients into neighborhoods");
  AddCommon(cluster, f);
  cluster->callback([&] {
    action = [&] {
      for (const Neighborhood& n : ClusterCommand(BuildConfig(f))) {
        std::printf("gs %zu: %zu clients\n", n.gs_index, n.members.size());
      }
    };
  });

  auto* synth = app.add_subcommand("synth", "Write a synthetic load CSV");
  AddCommon(synth, f);
  synth->callback([&] { action = [&] { SynthCommand(BuildConfig(f)); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    action();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const VersionError& e) {
    std::fprintf(stderr, "version error: %s\n", e.what());
    return kExitData;
  } catch (const LookupError& e) {
    std::fprintf(stderr, "lookup error: %s\n", e.what());
    return kExitData;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) { return Run(argc, argv); }
