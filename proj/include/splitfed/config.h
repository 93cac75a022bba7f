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


#ifndef SPLITFED_CONFIG_H_
#define SPLITFED_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "splitfed/data.h"
#include "splitfed/fedformer.h"
#include "splitfed/mine.h"
#include "splitfed/overhead.h"
#include "splitfed/protocol.h"

namespace splitfed {

enum class DataSource { kSynth, kCsv };

// Everything a run needs. Built-in defaults are the paper-scale profile;
// the desk preset shrinks model and data to laptop size.
struct RunConfig {
  DataSource source = DataSource::kCsv;
  std::string csv_path;
  SynthSpec synth;
  std::size_t num_gs = 3;
  std::size_t holdout_clients = 0;  // per GS, taken from the highest indices
  std::size_t stride = 1;

  ModelConfig model;
  Strategy strategy = Strategy::kSplitGlobal;
  TrainPlan plan;  // plan.dp carries the privacy budget

  // Audit target client: position `mi_client` in the pool of GS `mi_gs`.
  std::size_t mi_gs = 0;
  std::size_t mi_client = 0;
  double mi_laplace_scale = 2.0;  // 0 uses plan.dp instead
  std::size_t mi_projection_dim = 32;
  MineOptions mine;

  // Infinite epsilon means DP off for that row.
  std::vector<double> sweep_epsilons{0.5, 1.0, 2.5, 5.0, 7.5, 10.0};
  std::vector<double> sweep_deltas{0.0};
  std::size_t sweep_seeds = 1;

  OverheadParams overhead;

  std::string out_dir = "out";
  std::uint64_t seed = 1;

  // Throws ConfigError naming the key.
  void Validate() const;
};

RunConfig PaperPreset();
RunConfig DeskPreset();
// "paper" | "desk"; anything else is a ConfigError.
RunConfig PresetByName(const std::string& name);

// Applies a config file over `config`. The format is
//
//   # comment
//   [train]
//   lr: float = 2e-4
//   strategy: string = split-personal
//   [sweep]
//   epsilons: float[] = [0.5, 1, inf]
//
// Types are int, float, bool, string and float[]. Unknown keys, a type that
// differs from the key's type, and unparsable values raise ConfigError
// with "path:line: section.key".
void ApplyConfigText(const std::string& text, const std::string& origin,
                     RunConfig& config);
void ApplyConfigFile(const std::string& path, RunConfig& config);

// Canonical "section.key: type = value" lines in a fixed order, without
// run.out. Feeding the text back through ApplyConfigText reproduces the
// config apart from the output directory.
std::string DumpConfig(const RunConfig& config);

// 64-bit FNV-1a of DumpConfig(config).
std::uint64_t ConfigHash(const RunConfig& config);

// Seeds the run actually uses, derived from config.seed.
struct RunSeeds {
  std::uint64_t synth = 0;
  std::uint64_t model = 0;
  std::uint64_t train = 0;
  std::uint64_t mine = 0;
};
RunSeeds DeriveRunSeeds(std::uint64_t seed);

// Copy of `config` with the derived seeds written into synth, model, plan
// and mine.
RunConfig Resolve(const RunConfig& config);

}  // namespace splitfed

#endif  // SPLITFED_CONFIG_H_
