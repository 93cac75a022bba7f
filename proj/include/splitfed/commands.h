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


#ifndef SPLITFED_COMMANDS_H_
#define SPLITFED_COMMANDS_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "splitfed/config.h"
#include "splitfed/data.h"
#include "splitfed/mine.h"
#include "splitfed/overhead.h"
#include "splitfed/protocol.h"

namespace splitfed {

// Normalized series, their neighborhoods, and the per-GS pools split into
// training clients and held-out (unseen) clients.
struct Dataset {
  std::vector<LoadSeries> series;
  std::vector<Neighborhood> neighborhoods;
  FederatedData train;
  FederatedData unseen;
};

// `config` must already be resolved (see Resolve).
Dataset LoadDataset(const RunConfig& config);

// Writes "<out>/manifest_<command>.txt": command, config hash, seeds and the
// resolved config. Header lines are '#' comments, so the file is a valid
// config. `extra` lines go between the seeds and the config.
void WriteManifest(const RunConfig& config, const std::string& command,
                   const std::vector<std::string>& extra = {});

struct TrainOutcome {
  TrainingHistory history;
  Metrics test;  // pooled over all training clients
};

// history.csv, comm_bytes.csv, model.ckpt, manifest_train.txt.
TrainOutcome TrainCommand(const RunConfig& config, std::size_t threads);

enum class EvalScope { kOwn, kCross, kUnseen };
EvalScope ParseEvalScope(const std::string& name);  // own | cross | unseen
std::string EvalScopeName(EvalScope scope);

// GS columns hold an index, or "all" for rows pooled over every GS.
struct EvalRow {
  std::string model_gs;
  std::string data_gs;
  std::string client;  // client id, or "all" for pooled rows
  std::string set;     // train | val | test
  std::size_t windows = 0;
  Metrics metrics;
};

// metrics_<scope>.csv; the cross scope also writes cross_mse.csv, a k x k
// matrix with model GS rows and data GS columns. A checkpoint built for a
// different model or GS count raises VersionError.
std::vector<EvalRow> EvaluateCommand(const RunConfig& config,
                                     const std::string& checkpoint,
                                     EvalScope scope, std::size_t threads);

struct SweepRow {
  double epsilon = 0.0;  // inf: DP off
  double delta = 0.0;
  std::size_t replica = 0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  Metrics test;
  double mi = 0.0;      // final MI estimate for the protected activations
  double mi_std = 0.0;  // std of the last trace point
};

// sweep.csv. Replica r > 0 reruns training and the audit under a seed
// derived from (seed, r) on the same data.
std::vector<SweepRow> DpSweepCommand(const RunConfig& config, std::size_t threads);

struct MiAuditRow {
  MiTarget target = MiTarget::kClean;
  MiTrace trace;
  double estimate = 0.0;
  bool diverged = false;
};

// Audits the audit client's training windows against the four targets
// through `params`.
std::vector<MiAuditRow> AuditMi(const RunConfig& config,
                                const SplitOneParams& params,
                                std::span<const TimeSeriesWindow> windows);

// mi_trace_<target>.csv and mi_summary.csv.
std::vector<MiAuditRow> AuditMiCommand(const RunConfig& config,
                                       const std::string& checkpoint);

// overhead.csv; returns the report for printing.
OverheadReport OverheadCommand(const RunConfig& config);

// clusters.csv: client index, client id, GS.
std::vector<Neighborhood> ClusterCommand(const RunConfig& config);

// synth.csv in the load CSV format.
void SynthCommand(const RunConfig& config);

}  // namespace splitfed

#endif  // SPLITFED_COMMANDS_H_
