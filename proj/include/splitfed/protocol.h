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

#ifndef SPLITFED_PROTOCOL_H_
#define SPLITFED_PROTOCOL_H_

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "splitfed/adam.h"
#include "splitfed/data.h"
#include "splitfed/fedformer.h"
#include "splitfed/privacy.h"
#include "splitfed/transport.h"

namespace splitfed {

enum class Strategy { kSplitGlobal, kSplitPersonal };
enum class ClientSelection { kFixed, kRandomPerEpoch };
enum class LrSchedule { kHalving, kConstant };

Strategy ParseStrategy(const std::string& name);  // "split-global" | "split-personal"
std::string StrategyName(Strategy strategy);
ClientSelection ParseClientSelection(const std::string& name);  // "fixed" | "random"
std::string ClientSelectionName(ClientSelection selection);
LrSchedule ParseLrSchedule(const std::string& name);  // "halving" | "constant"
std::string LrScheduleName(LrSchedule schedule);

struct TrainPlan {
  std::size_t epochs = 10;
  std::size_t clients_per_gs = 10;  // K
  ClientSelection selection = ClientSelection::kFixed;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  LrSchedule schedule = LrSchedule::kHalving;
  std::size_t patience = 3;
  PrivacyBudget dp;
  std::uint64_t seed = 1;
  std::size_t threads = 1;  // concurrent GS pipelines
  std::chrono::milliseconds timeout{30000};
  // Ship Split-1 weights on the first batch of each epoch only; clients
  // reuse their copy for the rest of the epoch.
  bool weights_per_epoch = false;

  // lr * 0.5^epoch (halving) or lr (constant); epochs count from 0.
  double LearningRate(std::size_t epoch) const;
  void Validate() const;
};

// Positions into a pool of `pool` clients, ascending. kFixed always takes
// the first K; kRandomPerEpoch draws K without replacement from a stream
// keyed by (seed, gs, epoch).
std::vector<std::size_t> SelectClients(std::size_t pool, std::size_t k,
                                       ClientSelection mode, std::uint64_t seed,
                                       std::size_t gs, std::size_t epoch);

// Elementwise mean over clients, summed in client order.
std::vector<std::vector<double>> AverageClientGradients(
    std::span<const std::vector<std::vector<double>>> per_client);

struct ClientData {
  std::uint32_t client = 0;  // global client index
  std::vector<TimeSeriesWindow> train;
  std::vector<TimeSeriesWindow> val;
  std::vector<TimeSeriesWindow> test;
};

// clients[g] is the training pool of grid station g.
struct FederatedData {
  std::vector<std::vector<ClientData>> clients;
};

// Windows of a normalized series split 7:1:2 in time order.
ClientData MakeClientData(const LoadSeries& series, std::uint32_t client,
                          const ModelConfig& config, std::size_t stride = 1);

// One pool per neighborhood; client indices are positions in `series`.
FederatedData MakeFederatedData(std::span<const LoadSeries> series,
                                std::span<const Neighborhood> neighborhoods,
                                const ModelConfig& config, std::size_t stride = 1);

struct ClientBatch {
  std::uint32_t client = 0;
  ModelBatch batch;
};

struct GsBatch {
  std::uint32_t gs = 0;
  std::vector<ClientBatch> clients;  // ascending client index
};

struct RoundSpec {
  std::uint32_t epoch = 0;
  std::uint32_t batch = 0;
  std::vector<GsBatch> groups;  // active grid stations
  double lr = 1e-4;
  PrivacyBudget dp;
  std::uint64_t seed = 1;  // roots the per-client DP noise streams
  std::size_t threads = 1;
  std::chrono::milliseconds timeout{30000};
  bool send_weights = true;
  std::set<PartyId> silent;  // fault injection: these parties never send
};

// Gradients each party applied in the round, for inspection.
struct RoundResult {
  // Per active GS (same order as RoundSpec::groups): client-averaged
  // Split-1 gradients in SplitOneParams::Parameters() order.
  std::vector<std::vector<std::vector<double>>> split1_grads;
  // Per Split-2 model that was updated (index into split2 models).
  std::map<std::size_t, std::vector<std::vector<double>>> split2_grads;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  std::size_t batches = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double test_mse = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  bool early_stopped = false;
};

// All model state of one deployment: Split-1 per GS, Split-2 once
// (SplitGlobal) or per GS (SplitPersonal), and their optimizer states.
// Every party starts from the initialization drawn from config.seed.
class Federation {
 public:
  Federation(const ModelConfig& config, Strategy strategy, std::size_t num_gs,
             std::unique_ptr<Transport> transport = nullptr);

  const ModelConfig& config() const { return config_; }
  Strategy strategy() const { return strategy_; }
  std::size_t num_gs() const { return split1_.size(); }

  SplitOneParams& split1(std::size_t gs);
  const SplitOneParams& split1(std::size_t gs) const;
  std::size_t split2_index(std::size_t gs) const;
  SplitTwoParams& split2_for(std::size_t gs);
  const SplitTwoParams& split2_for(std::size_t gs) const;
  std::vector<SplitTwoParams>& split2_models() { return split2_; }
  const std::vector<SplitTwoParams>& split2_models() const { return split2_; }
  // Replaces parameters (checkpoint restore); optimizer states restart.
  void SetParameters(std::vector<SplitOneParams> split1,
                     std::vector<SplitTwoParams> split2);

  const AdamState& split1_adam(std::size_t gs) const { return split1_adam_.at(gs); }
  const AdamState& split2_adam(std::size_t m) const { return split2_adam_.at(m); }

  Transport& transport() { return *transport_; }

  // A round that throws (timeout, non-finite loss) may leave frames in the
  // transport; discard the federation afterwards.
  //
  // One pass of the batch loop body: weights out, forward, DP, activations
  // up, Split-2, predictions back, client loss gradients, backward at SP,
  // activation gradients down, per-GS averaging, ADAM at GS and SP.
  RoundResult BatchRound(const RoundSpec& spec);

  // Noise-free forecast [B x O x Z] with the GS's Split-1 and its Split-2.
  Tensor Predict(const ModelInput& input, std::size_t gs) const;

 private:
  ModelConfig config_;
  Strategy strategy_;
  std::vector<SplitOneParams> split1_;
  std::vector<AdamState> split1_adam_;
  std::vector<SplitTwoParams> split2_;
  std::vector<AdamState> split2_adam_;
  std::unique_ptr<Transport> transport_;
  // Client-held Split-1 copies, used when weights are not re-sent.
  std::map<PartyId, SplitOneParams> client_weights_;
  std::mutex client_weights_mu_;
};

// Pooled MSE of noise-free forecasts over the given windows of every
// client in `data` (each client evaluated with its own GS's models).
enum class EvalSet { kTrain, kVal, kTest };
double PooledMse(const Federation& fed, const FederatedData& data, EvalSet set,
                 std::size_t threads = 1);

// Epoch loop with client selection, per-client shuffled batches, nB = min
// batch count over the selected clients, halving learning rate and early
// stopping on validation MSE (stop once it has not improved for
// max(patience, 1) consecutive epochs).
TrainingHistory RunTraining(
    Federation& fed, const FederatedData& data, const TrainPlan& plan,
    const std::function<void(const EpochRecord&)>& on_epoch = nullptr);

// Runs `fn(i)` for i in [0, n) on up to `threads` workers, indices handed
// out in increasing order. The first exception (lowest i) is rethrown
// after every worker finished.
void ParallelFor(std::size_t n, std::size_t threads,
                 const std::function<void(std::size_t)>& fn);

}  // namespace splitfed

#endif  // SPLITFED_PROTOCOL_H_
