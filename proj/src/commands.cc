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


#include "splitfed/commands.h"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>

#include "splitfed/checkpoint.h"
#include "splitfed/errors.h"
#include "splitfed/random.h"
#include "splitfed/wire.h"

namespace splitfed {
namespace {

constexpr std::size_t kPredictChunk = 256;

std::string OutPath(const RunConfig& config, const std::string& name) {
  std::filesystem::create_directories(config.out_dir);
  return (std::filesystem::path(config.out_dir) / name).string();
}

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

std::string Hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

// Identifies a checkpoint by content rather than location.
std::string CheckpointDigest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t h = 14695981039346656037ULL;
  for (char ch; in.get(ch);) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return Hex64(h);
}

// Appends targets and predictions of `windows` under the model of `gs`.
void PredictInto(const Federation& fed, std::span<const TimeSeriesWindow> windows,
                 std::size_t gs, std::vector<double>& y_true,
                 std::vector<double>& y_pred) {
  for (std::size_t lo = 0; lo < windows.size(); lo += kPredictChunk) {
    const auto chunk =
        windows.subspan(lo, std::min(kPredictChunk, windows.size() - lo));
    const ModelBatch batch = StackWindows(chunk, fed.config());
    const Tensor pred = fed.Predict(batch.input, gs);
    y_true.insert(y_true.end(), batch.target.data().begin(),
                  batch.target.data().end());
    y_pred.insert(y_pred.end(), pred.data().begin(), pred.data().end());
  }
}

// ComputeMetrics, with R^2 reported as NaN when the targets are constant.
Metrics SafeMetrics(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan};
  }
  try {
    return ComputeMetrics(y_true, y_pred);
  } catch (const NumericError&) {
    Metrics m;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      const double e = y_pred[i] - y_true[i];
      m.mae += std::abs(e);
      m.mse += e * e;
    }
    m.mae /= static_cast<double>(y_true.size());
    m.mse /= static_cast<double>(y_true.size());
    m.r2 = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
}

const std::vector<TimeSeriesWindow>& SetOf(const ClientData& c, const std::string& set) {
  if (set == "train") return c.train;
  if (set == "val") return c.val;
  return c.test;
}

Metrics PooledTestMetrics(const Federation& fed, const FederatedData& data) {
  std::vector<double> y_true, y_pred;
  for (std::size_t g = 0; g < data.clients.size(); ++g) {
    for (const ClientData& c : data.clients[g]) {
      PredictInto(fed, c.test, g, y_true, y_pred);
    }
  }
  return SafeMetrics(y_true, y_pred);
}

std::unique_ptr<Federation> RestoreChecked(const RunConfig& config,
                                           const std::string& path) {
  const Checkpoint ckpt = LoadCheckpoint(path, config.model);
  if (ckpt.split1.size() != config.num_gs) {
    throw VersionError("checkpoint " + path + " holds " +
                       std::to_string(ckpt.split1.size()) +
                       " grid stations, config has data.num_gs = " +
                       std::to_string(config.num_gs));
  }
  if (ckpt.strategy != config.strategy) {
    throw VersionError("checkpoint " + path + " was trained " +
                       StrategyName(ckpt.strategy) + ", config says " +
                       StrategyName(config.strategy));
  }
  return Restore(ckpt);
}

const ClientData& AuditClient(const RunConfig& config, const Dataset& data) {
  if (config.mi_gs >= data.train.clients.size() ||
      config.mi_client >= data.train.clients[config.mi_gs].size()) {
    throw ConfigError("mi.gs/mi.client: no training client " +
                      std::to_string(config.mi_client) + " at GS " +
                      std::to_string(config.mi_gs));
  }
  return data.train.clients[config.mi_gs][config.mi_client];
}

std::string MetricsCsv(const Metrics& m) {
  return FormatDouble(m.mae) + "," + FormatDouble(m.mse) + "," + FormatDouble(m.r2);
}

}  // namespace

Dataset LoadDataset(const RunConfig& config) {
  config.Validate();
  Dataset d;
  d.series = config.source == DataSource::kSynth ? GenerateSynthetic(config.synth)
                                                 : LoadSeriesCsv(config.csv_path);
  if (config.num_gs > d.series.size()) {
    throw ConfigError("data.num_gs = " + std::to_string(config.num_gs) +
                      " exceeds the " + std::to_string(d.series.size()) +
                      " loaded clients");
  }
  std::vector<std::vector<double>> profiles;
  for (LoadSeries& s : d.series) {
    Normalize(s);
    profiles.push_back(s.values);
  }
  d.neighborhoods = AgglomerativeCluster(profiles, config.num_gs);
  std::vector<Neighborhood> train_hoods, unseen_hoods;
  for (const Neighborhood& n : d.neighborhoods) {
    if (n.members.size() <= config.holdout_clients) {
      throw ConfigError("data.holdout_clients = " +
                        std::to_string(config.holdout_clients) + " leaves GS " +
                        std::to_string(n.gs_index) + " without training clients");
    }
    const auto cut = n.members.end() - static_cast<std::ptrdiff_t>(config.holdout_clients);
    train_hoods.push_back({n.gs_index, {n.members.begin(), cut}});
    unseen_hoods.push_back({n.gs_index, {cut, n.members.end()}});
  }
  d.train = MakeFederatedData(d.series, train_hoods, config.model, config.stride);
  d.unseen = MakeFederatedData(d.series, unseen_hoods, config.model, config.stride);
  return d;
}

void WriteManifest(const RunConfig& config, const std::string& command,
                   const std::vector<std::string>& extra) {
  const RunSeeds seeds = DeriveRunSeeds(config.seed);
  std::ofstream out = OpenOut(OutPath(config, "manifest_" + command + ".txt"));
  out << "# command: " << command << "\n"
      << "# config_hash: " << Hex64(ConfigHash(config)) << "\n"
      << "# seed: " << config.seed << "\n"
      << "# seed.synth: " << seeds.synth << "\n"
      << "# seed.model: " << seeds.model << "\n"
      << "# seed.train: " << seeds.train << "\n"
      << "# seed.mine: " << seeds.mine << "\n";
  for (const std::string& line : extra) out << "# " << line << "\n";
  out << "\n" << DumpConfig(config);
}

TrainOutcome TrainCommand(const RunConfig& config, std::size_t threads) {
  const RunConfig rc = Resolve(config);
  const Dataset data = LoadDataset(rc);
  Federation fed(rc.model, rc.strategy, rc.num_gs);
  TrainPlan plan = rc.plan;
  plan.threads = threads;

  TrainOutcome outcome;
  outcome.history = RunTraining(fed, data.train, plan, [](const EpochRecord& e) {
    std::fprintf(stderr, "epoch %zu  lr %g  train %.6f  val %.6f  test %.6f\n",
                 e.epoch + 1, e.lr, e.train_mse, e.val_mse, e.test_mse);
  });
  outcome.test = PooledTestMetrics(fed, data.train);

  std::ofstream hist = OpenOut(OutPath(config, "history.csv"));
  hist << "epoch,lr,batches,train_mse,val_mse,test_mse\n";
  for (const EpochRecord& e : outcome.history.epochs) {
    hist << e.epoch << "," << FormatDouble(e.lr) << "," << e.batches << ","
         << FormatDouble(e.train_mse) << "," << FormatDouble(e.val_mse) << ","
         << FormatDouble(e.test_mse) << "\n";
  }
  std::ofstream comm = OpenOut(OutPath(config, "comm_bytes.csv"));
  comm << "kind,bytes\n";
  for (const auto& [kind, bytes] : fed.transport().BytesByKind()) {
    comm << KindName(kind) << "," << bytes << "\n";
  }
  SaveCheckpoint(OutPath(config, "model.ckpt"), Capture(fed));
  WriteManifest(config, "train",
                {"epochs_run: " + std::to_string(outcome.history.epochs.size()),
                 std::string("early_stopped: ") +
                     (outcome.history.early_stopped ? "true" : "false"),
                 "test_mae: " + FormatDouble(outcome.test.mae),
                 "test_mse: " + FormatDouble(outcome.test.mse),
                 "test_r2: " + FormatDouble(outcome.test.r2)});
  return outcome;
}

EvalScope ParseEvalScope(const std::string& name) {
  if (name == "own") return EvalScope::kOwn;
  if (name == "cross") return EvalScope::kCross;
  if (name == "unseen") return EvalScope::kUnseen;
  throw ConfigError("unknown scope '" + name + "' (own | cross | unseen)");
}

std::string EvalScopeName(EvalScope scope) {
  switch (scope) {
    case EvalScope::kOwn: return "own";
    case EvalScope::kCross: return "cross";
    case EvalScope::kUnseen: return "unseen";
  }
  return "?";
}

std::vector<EvalRow> EvaluateCommand(const RunConfig& config,
                                     const std::string& checkpoint,
                                     EvalScope scope, std::size_t threads) {
  (void)threads;  // prediction is cheap next to training; kept serial
  const RunConfig rc = Resolve(config);
  const Dataset data = LoadDataset(rc);
  const auto fed = RestoreChecked(rc, checkpoint);
  const std::size_t k = rc.num_gs;
  std::vector<EvalRow> rows;

  auto client_rows = [&](const FederatedData& pools, const std::vector<std::string>& sets) {
    for (std::size_t g = 0; g < k; ++g) {
      for (const std::string& set : sets) {
        std::vector<double> gs_true, gs_pred;
        for (const ClientData& c : pools.clients[g]) {
          std::vector<double> y_true, y_pred;
          PredictInto(*fed, SetOf(c, set), g, y_true, y_pred);
          rows.push_back({std::to_string(g), std::to_string(g),
                          data.series[c.client].client_id, set,
                          SetOf(c, set).size(), SafeMetrics(y_true, y_pred)});
          gs_true.insert(gs_true.end(), y_true.begin(), y_true.end());
          gs_pred.insert(gs_pred.end(), y_pred.begin(), y_pred.end());
        }
        std::size_t n = 0;
        for (const ClientData& c : pools.clients[g]) n += SetOf(c, set).size();
        rows.push_back({std::to_string(g), std::to_string(g), "all", set, n,
                        SafeMetrics(gs_true, gs_pred)});
      }
    }
    for (const std::string& set : sets) {
      std::vector<double> y_true, y_pred;
      std::size_t n = 0;
      for (std::size_t g = 0; g < k; ++g) {
        for (const ClientData& c : pools.clients[g]) {
          PredictInto(*fed, SetOf(c, set), g, y_true, y_pred);
          n += SetOf(c, set).size();
        }
      }
      rows.push_back({"all", "all", "all", set, n, SafeMetrics(y_true, y_pred)});
    }
  };

  if (scope == EvalScope::kOwn) {
    client_rows(data.train, {"train", "val", "test"});
  } else if (scope == EvalScope::kUnseen) {
    std::size_t unseen = 0;
    for (const auto& pool : data.unseen.clients) unseen += pool.size();
    if (unseen == 0) {
      std::fprintf(stderr,
                   "warning: no held-out clients (data.holdout_clients = 0); "
                   "unseen report is empty\n");
    } else {
      client_rows(data.unseen, {"test"});
    }
  } else {
    for (std::size_t m = 0; m < k; ++m) {
      for (std::size_t g = 0; g < k; ++g) {
        std::vector<double> y_true, y_pred;
        std::size_t n = 0;
        for (const ClientData& c : data.train.clients[g]) {
          PredictInto(*fed, c.test, m, y_true, y_pred);
          n += c.test.size();
        }
        rows.push_back({std::to_string(m), std::to_string(g), "all", "test", n,
                        SafeMetrics(y_true, y_pred)});
      }
    }
    std::ofstream matrix = OpenOut(OutPath(config, "cross_mse.csv"));
    matrix << "model_gs";
    for (std::size_t g = 0; g < k; ++g) matrix << ",data_gs" << g;
    matrix << "\n";
    for (std::size_t m = 0; m < k; ++m) {
      matrix << m;
      for (std::size_t g = 0; g < k; ++g) {
        matrix << "," << FormatDouble(rows[m * k + g].metrics.mse);
      }
      matrix << "\n";
    }
  }

  const std::string name = EvalScopeName(scope);
  std::ofstream out = OpenOut(OutPath(config, "metrics_" + name + ".csv"));
  out << "model_gs,data_gs,client,set,windows,mae,mse,r2\n";
  for (const EvalRow& r : rows) {
    out << r.model_gs << "," << r.data_gs << "," << r.client << "," << r.set << ","
        << r.windows << "," << MetricsCsv(r.metrics) << "\n";
  }
  WriteManifest(config, "evaluate_" + name,
                {"checkpoint_fnv1a: " + CheckpointDigest(checkpoint)});
  return rows;
}

std::vector<SweepRow> DpSweepCommand(const RunConfig& config, std::size_t threads) {
  const RunConfig base = Resolve(config);
  const Dataset data = LoadDataset(base);
  std::vector<SweepRow> rows;
  for (double delta : config.sweep_deltas) {
    for (double epsilon : config.sweep_epsilons) {
      for (std::size_t r = 0; r < config.sweep_seeds; ++r) {
        RunConfig run = config;
        run.seed = r == 0 ? config.seed : DeriveSeed(config.seed, "replica", {r});
        run = Resolve(run);
        run.plan.threads = threads;
        run.plan.dp.enabled = std::isfinite(epsilon);
        if (run.plan.dp.enabled) {
          run.plan.dp.epsilon = epsilon;
          run.plan.dp.delta = delta;
        }
        std::fprintf(stderr, "sweep eps %g delta %g replica %zu\n", epsilon, delta, r);
        Federation fed(run.model, run.strategy, run.num_gs);
        const TrainingHistory hist = RunTraining(fed, data.train, run.plan);

        SweepRow row;
        row.epsilon = epsilon;
        row.delta = delta;
        row.replica = r;
        row.seed = run.seed;
        row.epochs = hist.epochs.size();
        row.train_mse = hist.epochs.back().train_mse;
        row.val_mse = hist.epochs.back().val_mse;
        row.test = PooledTestMetrics(fed, data.train);

        MiPipelineOptions mi;
        mi.target = run.plan.dp.enabled ? MiTarget::kNoised : MiTarget::kClean;
        mi.dp = run.plan.dp;
        mi.dp_batch = run.plan.batch_size;
        mi.projection_dim = run.mi_projection_dim;
        mi.mine = run.mine;
        const ClientData& client = AuditClient(run, data);
        const MineResult res =
            EstimateMiPipeline(fed.split1(run.mi_gs), run.model, client.train, mi);
        row.mi = FinalEstimate(res.trace);
        row.mi_std = res.trace.back().std;
        rows.push_back(row);
      }
    }
  }
  std::ofstream out = OpenOut(OutPath(config, "sweep.csv"));
  out << "epsilon,delta,mechanism,replica,seed,epochs,train_mse,val_mse,"
         "test_mae,test_mse,test_r2,mi,mi_std\n";
  for (const SweepRow& r : rows) {
    const char* mech = !std::isfinite(r.epsilon) ? "none"
                       : r.delta == 0.0         ? "laplace"
                                                : "gaussian";
    out << FormatDouble(r.epsilon) << "," << FormatDouble(r.delta) << "," << mech
        << "," << r.replica << "," << r.seed << "," << r.epochs << ","
        << FormatDouble(r.train_mse) << "," << FormatDouble(r.val_mse) << ","
        << MetricsCsv(r.test) << "," << FormatDouble(r.mi) << ","
        << FormatDouble(r.mi_std) << "\n";
  }
  WriteManifest(config, "dp_sweep");
  return rows;
}

std::vector<MiAuditRow> AuditMi(const RunConfig& config, const SplitOneParams& params,
                                std::span<const TimeSeriesWindow> windows) {
  const RunConfig rc = Resolve(config);
  std::vector<MiAuditRow> rows;
  for (MiTarget target :
       {MiTarget::kSelf, MiTarget::kClean, MiTarget::kNoised, MiTarget::kNoise}) {
    MiPipelineOptions mi;
    mi.target = target;
    if (rc.mi_laplace_scale > 0) {
      mi.laplace_scale = rc.mi_laplace_scale;
    } else if (target == MiTarget::kNoised && !rc.plan.dp.enabled) {
      throw ConfigError(
          "mi.laplace_scale: noised audit needs a Laplace scale > 0 or dp.enabled");
    }
    mi.dp = rc.plan.dp;
    mi.dp_batch = rc.plan.batch_size;
    mi.projection_dim = rc.mi_projection_dim;
    mi.mine = rc.mine;
    const MineResult res = EstimateMiPipeline(params, rc.model, windows, mi);
    rows.push_back({target, res.trace, FinalEstimate(res.trace), res.diverged});
  }
  return rows;
}

std::vector<MiAuditRow> AuditMiCommand(const RunConfig& config,
                                       const std::string& checkpoint) {
  const RunConfig rc = Resolve(config);
  const Dataset data = LoadDataset(rc);
  const auto fed = RestoreChecked(rc, checkpoint);
  const ClientData& client = AuditClient(rc, data);
  const auto rows = AuditMi(config, fed->split1(rc.mi_gs), client.train);

  std::ofstream summary = OpenOut(OutPath(config, "mi_summary.csv"));
  summary << "target,estimate,last_std,points,diverged\n";
  for (const MiAuditRow& r : rows) {
    const std::string name = MiTargetName(r.target);
    WriteMiTraceCsv(OutPath(config, "mi_trace_" + name + ".csv"), r.trace);
    summary << name << "," << FormatDouble(r.estimate) << ","
            << FormatDouble(r.trace.back().std) << "," << r.trace.size() << ","
            << (r.diverged ? "true" : "false") << "\n";
  }
  WriteManifest(config, "audit_mi",
                {"checkpoint_fnv1a: " + CheckpointDigest(checkpoint),
                 "audit_client: " + data.series[client.client].client_id});
  return rows;
}

OverheadReport OverheadCommand(const RunConfig& config) {
  const OverheadReport report = AnalyzeOverhead(config.overhead);
  std::ofstream out = OpenOut(OutPath(config, "overhead.csv"));
  out << "metric,value\n";
  for (const auto& [name, value] : OverheadRows(report)) {
    out << name << "," << FormatDouble(value) << "\n";
  }
  WriteManifest(config, "overhead");
  return report;
}

std::vector<Neighborhood> ClusterCommand(const RunConfig& config) {
  const RunConfig rc = Resolve(config);
  const Dataset data = LoadDataset(rc);
  std::ofstream out = OpenOut(OutPath(config, "clusters.csv"));
  out << "client,client_id,gs\n";
  std::vector<std::size_t> gs_of(data.series.size());
  for (const Neighborhood& n : data.neighborhoods) {
    for (std::size_t m : n.members) gs_of[m] = n.gs_index;
  }
  for (std::size_t i = 0; i < data.series.size(); ++i) {
    out << i << "," << data.series[i].client_id << "," << gs_of[i] << "\n";
  }
  WriteManifest(config, "cluster");
  return data.neighborhoods;
}

void SynthCommand(const RunConfig& config) {
  const RunConfig rc = Resolve(config);
  const auto series = GenerateSynthetic(rc.synth);
  WriteSeriesCsv(OutPath(config, "synth.csv"), series);
  WriteManifest(config, "synth");
}

}  // namespace splitfed
