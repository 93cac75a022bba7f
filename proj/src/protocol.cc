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

#include "splitfed/protocol.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <utility>

#include "splitfed/errors.h"
#include "splitfed/random.h"

namespace splitfed {
namespace {

constexpr std::size_t kEvalChunk = 256;

Tensor LeafCopy(const Tensor& t, bool requires_grad) {
  return Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()),
                requires_grad);
}

std::vector<double> GradOrZeros(const Tensor& t) {
  if (!t.has_grad()) return std::vector<double>(t.numel(), 0.0);
  return std::vector<double>(t.grad().begin(), t.grad().end());
}

Tensor ConcatRows(std::span<const Tensor> parts) {
  NoGradGuard no_grad;
  return Concat(parts, 0);
}

Tensor SliceRows(const Tensor& t, std::size_t start, std::size_t len) {
  NoGradGuard no_grad;
  return Slice(t, 0, start, len);
}

PartyMessage Message(MessageKind kind, const PartyId& from, const PartyId& to,
                     const RoundSpec& spec, std::vector<NamedTensor> tensors) {
  PartyMessage m;
  m.kind = kind;
  m.sender = from;
  m.receiver = to;
  m.epoch = spec.epoch;
  m.batch = spec.batch;
  m.tensors = std::move(tensors);
  return m;
}

// What the client's forward left behind for the backward pass at its GS:
// the weight copy it ran with and the three tensors it shipped.
struct ClientTrace {
  SplitOneParams* weights = nullptr;
  std::vector<Tensor> roots;
};

void ValidateRound(const RoundSpec& spec, std::size_t num_gs) {
  if (spec.groups.empty()) throw ConfigError("round has no active grid station");
  if (spec.threads == 0) throw ConfigError("threads must be at least 1");
  for (std::size_t i = 0; i < spec.groups.size(); ++i) {
    const GsBatch& g = spec.groups[i];
    if (g.gs >= num_gs) {
      throw LookupError("unknown grid station " + std::to_string(g.gs));
    }
    if (i > 0 && spec.groups[i - 1].gs >= g.gs) {
      throw ConfigError("round groups must be sorted by grid station index");
    }
    if (g.clients.empty()) {
      throw ConfigError("grid station " + std::to_string(g.gs) + " has no clients");
    }
    for (std::size_t c = 0; c < g.clients.size(); ++c) {
      if (c > 0 && g.clients[c - 1].client >= g.clients[c].client) {
        throw ConfigError("clients must be sorted by index");
      }
      if (g.clients[c].batch.target.rank() == 0 ||
          g.clients[c].batch.target.dim(0) == 0) {
        throw ConfigError("empty client batch");
      }
    }
  }
  spec.dp.Validate();
}

}  // namespace

Strategy ParseStrategy(const std::string& name) {
  if (name == "split-global") return Strategy::kSplitGlobal;
  if (name == "split-personal") return Strategy::kSplitPersonal;
  throw ConfigError("unknown strategy '" + name +
                    "' (expected split-global or split-personal)");
}

std::string StrategyName(Strategy strategy) {
  return strategy == Strategy::kSplitGlobal ? "split-global" : "split-personal";
}

ClientSelection ParseClientSelection(const std::string& name) {
  if (name == "fixed") return ClientSelection::kFixed;
  if (name == "random") return ClientSelection::kRandomPerEpoch;
  throw ConfigError("unknown client selection '" + name + "' (expected fixed or random)");
}

std::string ClientSelectionName(ClientSelection selection) {
  return selection == ClientSelection::kFixed ? "fixed" : "random";
}

LrSchedule ParseLrSchedule(const std::string& name) {
  if (name == "halving") return LrSchedule::kHalving;
  if (name == "constant") return LrSchedule::kConstant;
  throw ConfigError("unknown lr schedule '" + name + "' (expected halving or constant)");
}

std::string LrScheduleName(LrSchedule schedule) {
  return schedule == LrSchedule::kHalving ? "halving" : "constant";
}

double TrainPlan::LearningRate(std::size_t epoch) const {
  if (schedule == LrSchedule::kConstant) return lr;
  return lr * std::pow(0.5, static_cast<double>(epoch));
}

void TrainPlan::Validate() const {
  if (epochs == 0) throw ConfigError("train.epochs must be at least 1");
  if (clients_per_gs == 0) throw ConfigError("train.clients_per_gs must be at least 1");
  if (batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw ConfigError("train.lr must be a positive finite number");
  }
  if (threads == 0) throw ConfigError("train.threads must be at least 1");
  if (timeout.count() <= 0) throw ConfigError("train.timeout_ms must be positive");
  dp.Validate();
}

std::vector<std::size_t> SelectClients(std::size_t pool, std::size_t k,
                                       ClientSelection mode, std::uint64_t seed,
                                       std::size_t gs, std::size_t epoch) {
  if (k == 0) throw ConfigError("clients_per_gs must be at least 1");
  if (pool < k) {
    throw ConfigError("grid station " + std::to_string(gs) + " has " +
                      std::to_string(pool) + " clients, fewer than K = " +
                      std::to_string(k));
  }
  std::vector<std::size_t> chosen;
  if (mode == ClientSelection::kFixed || pool == k) {
    chosen.resize(k);
    for (std::size_t i = 0; i < k; ++i) chosen[i] = i;
    return chosen;
  }
  Rng rng(DeriveSeed(seed, "client-selection", {gs, epoch}));
  chosen = SampleWithoutReplacement(pool, k, rng);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<std::vector<double>> AverageClientGradients(
    std::span<const std::vector<std::vector<double>>> per_client) {
  if (per_client.empty()) throw ProtocolError("no client gradients to average");
  const auto& first = per_client.front();
  for (std::size_t c = 1; c < per_client.size(); ++c) {
    if (per_client[c].size() != first.size()) {
      throw ProtocolError("client " + std::to_string(c) + " sent " +
                          std::to_string(per_client[c].size()) +
                          " gradient tensors, expected " +
                          std::to_string(first.size()));
    }
    for (std::size_t t = 0; t < first.size(); ++t) {
      if (per_client[c][t].size() != first[t].size()) {
        throw ProtocolError("gradient tensor " + std::to_string(t) +
                            " of client " + std::to_string(c) +
                            " has a different size");
      }
    }
  }
  std::vector<std::vector<double>> mean = first;
  for (std::size_t c = 1; c < per_client.size(); ++c) {
    for (std::size_t t = 0; t < mean.size(); ++t) {
      for (std::size_t i = 0; i < mean[t].size(); ++i) mean[t][i] += per_client[c][t][i];
    }
  }
  const double inv = 1.0 / static_cast<double>(per_client.size());
  for (auto& g : mean) {
    for (double& v : g) v *= inv;
  }
  return mean;
}

ClientData MakeClientData(const LoadSeries& series, std::uint32_t client,
                          const ModelConfig& config, std::size_t stride) {
  WindowSplit split = SplitTrainValTest(MakeWindows(series, config, stride));
  ClientData data;
  data.client = client;
  data.train = std::move(split.train);
  data.val = std::move(split.val);
  data.test = std::move(split.test);
  return data;
}

FederatedData MakeFederatedData(std::span<const LoadSeries> series,
                                std::span<const Neighborhood> neighborhoods,
                                const ModelConfig& config, std::size_t stride) {
  FederatedData data;
  for (const Neighborhood& n : neighborhoods) {
    std::vector<ClientData> pool;
    for (std::size_t member : n.members) {
      if (member >= series.size()) {
        throw LookupError("neighborhood member " + std::to_string(member) +
                          " is not a loaded client");
      }
      pool.push_back(MakeClientData(series[member], static_cast<std::uint32_t>(member),
                                    config, stride));
    }
    data.clients.push_back(std::move(pool));
  }
  return data;
}

void ParallelFor(std::size_t n, std::size_t threads,
                 const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t count = std::min(std::max<std::size_t>(threads, 1), n);
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Federation::Federation(const ModelConfig& config, Strategy strategy,
                       std::size_t num_gs, std::unique_ptr<Transport> transport)
    : config_(config), strategy_(strategy), transport_(std::move(transport)) {
  config_.Validate();
  if (num_gs == 0) throw ConfigError("at least one grid station is required");
  if (!transport_) transport_ = std::make_unique<InProcessTransport>();
  const SplitOneParams p1 = InitSplitOne(config_);
  const SplitTwoParams p2 = InitSplitTwo(config_);
  for (std::size_t g = 0; g < num_gs; ++g) split1_.push_back(p1.Clone());
  const std::size_t n2 = strategy_ == Strategy::kSplitGlobal ? 1 : num_gs;
  for (std::size_t m = 0; m < n2; ++m) split2_.push_back(p2.Clone());
  for (auto& p : split1_) split1_adam_.emplace_back(p.Parameters());
  for (auto& p : split2_) split2_adam_.emplace_back(p.Parameters());
}

SplitOneParams& Federation::split1(std::size_t gs) {
  if (gs >= split1_.size()) throw LookupError("unknown grid station " + std::to_string(gs));
  return split1_[gs];
}

const SplitOneParams& Federation::split1(std::size_t gs) const {
  if (gs >= split1_.size()) throw LookupError("unknown grid station " + std::to_string(gs));
  return split1_[gs];
}

std::size_t Federation::split2_index(std::size_t gs) const {
  if (gs >= split1_.size()) throw LookupError("unknown grid station " + std::to_string(gs));
  return strategy_ == Strategy::kSplitGlobal ? 0 : gs;
}

SplitTwoParams& Federation::split2_for(std::size_t gs) {
  return split2_[split2_index(gs)];
}

const SplitTwoParams& Federation::split2_for(std::size_t gs) const {
  return split2_[split2_index(gs)];
}

void Federation::SetParameters(std::vector<SplitOneParams> split1,
                               std::vector<SplitTwoParams> split2) {
  const std::size_t n2 = strategy_ == Strategy::kSplitGlobal ? 1 : split1.size();
  if (split1.empty() || split2.size() != n2) {
    throw ConfigError("expected " + std::to_string(n2) + " Split-2 models for " +
                      std::to_string(split1.size()) + " grid stations under " +
                      StrategyName(strategy_));
  }
  split1_ = std::move(split1);
  split2_ = std::move(split2);
  split1_adam_.clear();
  split2_adam_.clear();
  for (auto& p : split1_) split1_adam_.emplace_back(p.Parameters());
  for (auto& p : split2_) split2_adam_.emplace_back(p.Parameters());
  std::lock_guard<std::mutex> lock(client_weights_mu_);
  client_weights_.clear();
}

RoundResult Federation::BatchRound(const RoundSpec& spec) {
  ValidateRound(spec, num_gs());
  Transport& net = *transport_;
  const PartyId sp = PartyId::ServiceProvider();
  const auto silent = [&](const PartyId& p) { return spec.silent.count(p) > 0; };

  RoundResult result;
  result.split1_grads.resize(spec.groups.size());

  // Grid station pipeline, with its clients simulated inline.
  auto gs_pipeline = [&](std::size_t gi) {
    const GsBatch& group = spec.groups[gi];
    const PartyId gs = PartyId::GridStation(group.gs);
    if (silent(gs)) return;
    const std::size_t k = group.clients.size();

    std::vector<PartyId> ids(k);
    std::vector<ClientTrace> traces(k);
    std::vector<bool> live(k, false);
    for (std::size_t c = 0; c < k; ++c) {
      ids[c] = PartyId::Client(group.gs, group.clients[c].client);
    }

    // Steps 1-2: weights down, forward and DP at each client, activations up.
    if (spec.send_weights) {
      const std::vector<NamedTensor> weights = ExportSplitOne(split1_[group.gs]);
      for (std::size_t c = 0; c < k; ++c) {
        net.Send(Message(MessageKind::kSplit1Weights, gs, ids[c], spec, weights));
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (silent(ids[c])) continue;
      SplitOneParams* weights = nullptr;
      if (spec.send_weights) {
        PartyMessage m = net.Receive(ids[c], gs, MessageKind::kSplit1Weights, spec.timeout);
        SplitOneParams imported = ImportSplitOne(m.tensors, config_);
        std::lock_guard<std::mutex> lock(client_weights_mu_);
        auto it = client_weights_.find(ids[c]);
        if (it == client_weights_.end()) {
          it = client_weights_.emplace(ids[c], std::move(imported)).first;
        } else {
          it->second = std::move(imported);
        }
        weights = &it->second;
      } else {
        std::lock_guard<std::mutex> lock(client_weights_mu_);
        auto it = client_weights_.find(ids[c]);
        if (it == client_weights_.end()) {
          throw ProtocolError(ids[c].ToString() + " holds no Split-1 weights");
        }
        weights = &it->second;
      }
      for (Tensor& t : weights->Parameters()) t.ZeroGrad();
      SplitOneActivations acts =
          Split1Forward(group.clients[c].batch.input, *weights, config_);
      if (spec.dp.enabled) {
        Rng rng(DeriveSeed(spec.seed, "dp",
                           {spec.epoch, spec.batch, group.gs, group.clients[c].client}));
        acts = ProtectActivations(acts, spec.dp, rng);
      }
      traces[c] = {weights, {acts.enc_out, acts.dec_seasonal, acts.dec_trend}};
      live[c] = true;
      net.Send(Message(MessageKind::kActivations, ids[c], gs, spec,
                       {{"enc_out", acts.enc_out},
                        {"dec_seasonal", acts.dec_seasonal},
                        {"dec_trend", acts.dec_trend}}));
    }

    // Step 3: concatenate along the batch axis in client order.
    std::vector<Tensor> enc, sea, tre;
    std::vector<std::size_t> rows(k), offset(k);
    std::size_t total = 0;
    for (std::size_t c = 0; c < k; ++c) {
      PartyMessage m = net.Receive(gs, ids[c], MessageKind::kActivations, spec.timeout);
      enc.push_back(m.Get("enc_out"));
      sea.push_back(m.Get("dec_seasonal"));
      tre.push_back(m.Get("dec_trend"));
      rows[c] = enc.back().dim(0);
      offset[c] = total;
      total += rows[c];
    }
    net.Send(Message(MessageKind::kActivations, gs, sp, spec,
                     {{"enc_out", ConcatRows(enc)},
                      {"dec_seasonal", ConcatRows(sea)},
                      {"dec_trend", ConcatRows(tre)}}));

    // Step 5: prediction slices back to their clients.
    PartyMessage pred = net.Receive(gs, sp, MessageKind::kPredictions, spec.timeout);
    const Tensor& all_pred = pred.Get("prediction");
    for (std::size_t c = 0; c < k; ++c) {
      net.Send(Message(MessageKind::kPredictions, gs, ids[c], spec,
                       {{"prediction", SliceRows(all_pred, offset[c], rows[c])}}));
    }

    // Step 6: each client differentiates its own MSE w.r.t. its predictions.
    for (std::size_t c = 0; c < k; ++c) {
      if (!live[c]) continue;
      PartyMessage m = net.Receive(ids[c], gs, MessageKind::kPredictions, spec.timeout);
      const Tensor& p = m.Get("prediction");
      const Tensor& y = group.clients[c].batch.target;
      if (p.shape() != y.shape()) {
        throw ProtocolError(ids[c].ToString() + " received predictions of shape " +
                            ShapeToString(p.shape()) + ", expected " +
                            ShapeToString(y.shape()));
      }
      const double n = static_cast<double>(y.numel());
      std::vector<double> g(y.numel());
      double loss = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = p.data()[i] - y.data()[i];
        loss += d * d;
        g[i] = 2.0 * d / n;
      }
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at " + ids[c].ToString() + " (epoch " +
                           std::to_string(spec.epoch) + ", batch " +
                           std::to_string(spec.batch) + ")");
      }
      net.Send(Message(MessageKind::kLossGradients, ids[c], gs, spec,
                       {{"loss_grad", Tensor(y.shape(), std::move(g))}}));
    }
    std::vector<Tensor> loss_grads;
    for (std::size_t c = 0; c < k; ++c) {
      PartyMessage m = net.Receive(gs, ids[c], MessageKind::kLossGradients, spec.timeout);
      loss_grads.push_back(m.Get("loss_grad"));
    }
    net.Send(Message(MessageKind::kLossGradients, gs, sp, spec,
                     {{"loss_grad", ConcatRows(loss_grads)}}));

    // Step 7: per-client backward through Split-1, then the client mean.
    PartyMessage back =
        net.Receive(gs, sp, MessageKind::kActivationGradients, spec.timeout);
    const Tensor& g_enc = back.Get("grad_enc_out");
    const Tensor& g_sea = back.Get("grad_dec_seasonal");
    const Tensor& g_tre = back.Get("grad_dec_trend");
    std::vector<std::vector<std::vector<double>>> per_client(k);
    for (std::size_t c = 0; c < k; ++c) {
      const Tensor seeds_t[] = {SliceRows(g_enc, offset[c], rows[c]),
                                SliceRows(g_sea, offset[c], rows[c]),
                                SliceRows(g_tre, offset[c], rows[c])};
      std::vector<std::vector<double>> seeds;
      for (const Tensor& s : seeds_t) seeds.emplace_back(s.data().begin(), s.data().end());
      Backward(traces[c].roots, seeds);
      for (const Tensor& t : traces[c].weights->Parameters()) {
        per_client[c].push_back(GradOrZeros(t));
      }
      traces[c].roots.clear();
    }
    std::vector<std::vector<double>> mean = AverageClientGradients(per_client);
    std::vector<Tensor> params = split1_[group.gs].Parameters();
    AdamStep(params, mean, split1_adam_[group.gs], spec.lr);
    result.split1_grads[gi] = std::move(mean);
  };

  std::exception_ptr gs_error;
  std::thread gs_workers([&] {
    try {
      ParallelFor(spec.groups.size(), spec.threads, gs_pipeline);
    } catch (...) {
      gs_error = std::current_exception();
    }
  });

  // Service provider: one grid station at a time, in index order.
  std::exception_ptr sp_error;
  try {
    std::map<std::size_t, std::size_t> clients_per_model;
    for (const GsBatch& g : spec.groups) {
      clients_per_model[split2_index(g.gs)] += g.clients.size();
    }
    for (const auto& [m, n] : clients_per_model) {
      for (Tensor& t : split2_[m].Parameters()) t.ZeroGrad();
    }
    for (const GsBatch& group : spec.groups) {
      const PartyId gs = PartyId::GridStation(group.gs);
      const SplitTwoParams& p2 = split2_[split2_index(group.gs)];
      PartyMessage m = net.Receive(sp, gs, MessageKind::kActivations, spec.timeout);
      SplitOneActivations acts{LeafCopy(m.Get("enc_out"), true),
                               LeafCopy(m.Get("dec_seasonal"), true),
                               LeafCopy(m.Get("dec_trend"), true)};
      Tensor pred = Split2Forward(acts, p2, config_);
      net.Send(Message(MessageKind::kPredictions, sp, gs, spec,
                       {{"prediction", pred.Detach()}}));
      PartyMessage lg = net.Receive(sp, gs, MessageKind::kLossGradients, spec.timeout);
      const Tensor& seed = lg.Get("loss_grad");
      if (seed.shape() != pred.shape()) {
        throw ProtocolError(gs.ToString() + " relayed loss gradients of shape " +
                            ShapeToString(seed.shape()) + ", expected " +
                            ShapeToString(pred.shape()));
      }
      const Tensor roots[] = {pred};
      const std::vector<double> seeds[] = {
          std::vector<double>(seed.data().begin(), seed.data().end())};
      Backward(roots, seeds);
      net.Send(Message(
          MessageKind::kActivationGradients, sp, gs, spec,
          {{"grad_enc_out", Tensor(acts.enc_out.shape(), GradOrZeros(acts.enc_out))},
           {"grad_dec_seasonal",
            Tensor(acts.dec_seasonal.shape(), GradOrZeros(acts.dec_seasonal))},
           {"grad_dec_trend",
            Tensor(acts.dec_trend.shape(), GradOrZeros(acts.dec_trend))}}));
    }
    // Sum of per-client loss gradients -> gradient of the client mean.
    for (const auto& [m, n] : clients_per_model) {
      std::vector<Tensor> params = split2_[m].Parameters();
      std::vector<std::vector<double>> grads;
      const double inv = 1.0 / static_cast<double>(n);
      for (const Tensor& t : params) {
        grads.push_back(GradOrZeros(t));
        for (double& v : grads.back()) v *= inv;
      }
      result.split2_grads[m] = std::move(grads);
    }
  } catch (...) {
    sp_error = std::current_exception();
  }
  gs_workers.join();
  // A failing grid station usually explains the SP timeout; report it first.
  if (gs_error) std::rethrow_exception(gs_error);
  if (sp_error) std::rethrow_exception(sp_error);

  // Step 8 at the SP, after every grid station finished its own update.
  for (auto& [m, grads] : result.split2_grads) {
    std::vector<Tensor> params = split2_[m].Parameters();
    AdamStep(params, grads, split2_adam_[m], spec.lr);
  }
  return result;
}

Tensor Federation::Predict(const ModelInput& input, std::size_t gs) const {
  if (gs >= num_gs()) throw LookupError("unknown grid station " + std::to_string(gs));
  NoGradGuard no_grad;
  const SplitOneActivations acts = Split1Forward(input, split1_[gs], config_);
  return Split2Forward(acts, split2_for(gs), config_);
}

double PooledMse(const Federation& fed, const FederatedData& data, EvalSet set,
                 std::size_t threads) {
  const ModelConfig& config = fed.config();
  std::vector<double> sse(data.clients.size(), 0.0);
  std::vector<std::size_t> count(data.clients.size(), 0);
  ParallelFor(data.clients.size(), threads, [&](std::size_t g) {
    for (const ClientData& client : data.clients[g]) {
      const std::vector<TimeSeriesWindow>& windows =
          set == EvalSet::kTrain ? client.train
          : set == EvalSet::kVal ? client.val
                                 : client.test;
      for (std::size_t start = 0; start < windows.size(); start += kEvalChunk) {
        const std::size_t len = std::min(kEvalChunk, windows.size() - start);
        const ModelBatch batch = StackWindows(
            std::span<const TimeSeriesWindow>(windows).subspan(start, len), config);
        const Tensor pred = fed.Predict(batch.input, g);
        for (std::size_t i = 0; i < pred.numel(); ++i) {
          const double d = pred.data()[i] - batch.target.data()[i];
          sse[g] += d * d;
        }
        count[g] += pred.numel();
      }
    }
  });
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t g = 0; g < sse.size(); ++g) {
    total += sse[g];
    n += count[g];
  }
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return total / static_cast<double>(n);
}

TrainingHistory RunTraining(Federation& fed, const FederatedData& data,
                            const TrainPlan& plan,
                            const std::function<void(const EpochRecord&)>& on_epoch) {
  plan.Validate();
  if (data.clients.empty()) throw ConfigError("no training data");
  if (data.clients.size() != fed.num_gs()) {
    throw ConfigError("data covers " + std::to_string(data.clients.size()) +
                      " grid stations, the federation has " +
                      std::to_string(fed.num_gs()));
  }
  const ModelConfig& config = fed.config();
  TrainingHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  const std::size_t limit = std::max<std::size_t>(plan.patience, 1);

  for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
    struct Selected {
      std::size_t gs;
      const ClientData* client;
      std::vector<std::size_t> order;
    };
    std::vector<std::vector<Selected>> chosen(fed.num_gs());
    std::size_t nb = std::numeric_limits<std::size_t>::max();
    for (std::size_t g = 0; g < fed.num_gs(); ++g) {
      const auto& pool = data.clients[g];
      for (std::size_t pos : SelectClients(pool.size(), plan.clients_per_gs,
                                           plan.selection, plan.seed, g, epoch)) {
        const ClientData& c = pool[pos];
        Rng rng(DeriveSeed(plan.seed, "batch-order", {g, c.client, epoch}));
        chosen[g].push_back({g, &c, Permutation(c.train.size(), rng)});
        nb = std::min(nb, c.train.size() / plan.batch_size);
      }
      std::sort(chosen[g].begin(), chosen[g].end(),
                [](const Selected& a, const Selected& b) {
                  return a.client->client < b.client->client;
                });
    }
    if (nb == 0) {
      throw ConfigError("a selected client has fewer than batch_size = " +
                        std::to_string(plan.batch_size) + " training windows");
    }

    const double lr = plan.LearningRate(epoch);
    for (std::size_t b = 0; b < nb; ++b) {
      RoundSpec spec;
      spec.epoch = static_cast<std::uint32_t>(epoch);
      spec.batch = static_cast<std::uint32_t>(b);
      spec.lr = lr;
      spec.dp = plan.dp;
      spec.seed = plan.seed;
      spec.threads = plan.threads;
      spec.timeout = plan.timeout;
      spec.send_weights = !plan.weights_per_epoch || b == 0;
      for (std::size_t g = 0; g < fed.num_gs(); ++g) {
        GsBatch group;
        group.gs = static_cast<std::uint32_t>(g);
        for (const Selected& s : chosen[g]) {
          const std::span<const std::size_t> idx(s.order.data() + b * plan.batch_size,
                                                 plan.batch_size);
          group.clients.push_back(
              {s.client->client, StackWindows(s.client->train, idx, config)});
        }
        spec.groups.push_back(std::move(group));
      }
      fed.BatchRound(spec);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    record.batches = nb;
    record.train_mse = PooledMse(fed, data, EvalSet::kTrain, plan.threads);
    record.val_mse = PooledMse(fed, data, EvalSet::kVal, plan.threads);
    record.test_mse = PooledMse(fed, data, EvalSet::kTest, plan.threads);
    if (!std::isfinite(record.train_mse)) {
      throw NumericError("training diverged in epoch " + std::to_string(epoch));
    }
    history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    if (record.val_mse < best_val) {
      best_val = record.val_mse;
      stale = 0;
    } else if (++stale >= limit) {
      history.early_stopped = epoch + 1 < plan.epochs;
      break;
    }
  }
  return history;
}

}  // namespace splitfed
