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
#include <chrono>
#include <cstring>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "splitfed/errors.h"
#include "test_util.h"

namespace splitfed {
namespace {

using namespace std::chrono_literals;
using testing::RandomTensor;

ModelConfig SmallConfig() {
  ModelConfig c;
  c.input_length = 16;
  c.horizon = 8;
  c.model_dim = 8;
  c.ff_dim = 16;
  c.modes = 3;
  c.decomp_kernel = 5;
  c.seed = 5;
  return c;
}

ModelBatch RandomBatch(const ModelConfig& c, std::size_t b, std::uint64_t seed) {
  ModelBatch batch;
  batch.input.x = RandomTensor({b, c.input_length, c.series_dim}, seed);
  batch.input.x_mark = RandomTensor({b, c.input_length, c.time_dim}, seed + 1, false, 0.5);
  batch.input.y_mark =
      RandomTensor({b, c.decoder_length(), c.time_dim}, seed + 2, false, 0.5);
  batch.target = RandomTensor({b, c.horizon, c.series_dim}, seed + 3);
  return batch;
}

ModelBatch ConcatBatches(const std::vector<ModelBatch>& parts) {
  auto cat = [&](auto field) {
    std::vector<Tensor> ts;
    for (const ModelBatch& p : parts) ts.push_back(field(p));
    return Concat(ts, 0);
  };
  ModelBatch out;
  out.input.x = cat([](const ModelBatch& p) { return p.input.x; });
  out.input.x_mark = cat([](const ModelBatch& p) { return p.input.x_mark; });
  out.input.y_mark = cat([](const ModelBatch& p) { return p.input.y_mark; });
  out.target = cat([](const ModelBatch& p) { return p.target; });
  return out;
}

RoundSpec OneGroup(std::vector<ModelBatch> batches, std::uint32_t gs = 0) {
  RoundSpec spec;
  spec.lr = 1e-3;
  spec.timeout = 5000ms;
  GsBatch group;
  group.gs = gs;
  for (std::size_t c = 0; c < batches.size(); ++c) {
    group.clients.push_back({static_cast<std::uint32_t>(c), std::move(batches[c])});
  }
  spec.groups.push_back(std::move(group));
  return spec;
}

std::vector<std::vector<double>> Grads(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  for (const Tensor& t : params) {
    out.emplace_back(t.grad().begin(), t.grad().end());
  }
  return out;
}

double WorstRelative(const std::vector<std::vector<double>>& a,
                     const std::vector<std::vector<double>>& b, double floor) {
  EXPECT_EQ(a.size(), b.size());
  double worst = 0.0;
  for (std::size_t t = 0; t < std::min(a.size(), b.size()); ++t) {
    EXPECT_EQ(a[t].size(), b[t].size());
    for (std::size_t i = 0; i < std::min(a[t].size(), b[t].size()); ++i) {
      worst = std::max(worst, RelativeError(a[t][i], b[t][i], floor));
    }
  }
  return worst;
}

std::vector<double> Flatten(const std::vector<Tensor>& params) {
  std::vector<double> out;
  for (const Tensor& t : params) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

std::vector<double> AllParameters(const Federation& fed) {
  std::vector<double> out;
  for (std::size_t g = 0; g < fed.num_gs(); ++g) {
    const auto v = Flatten(fed.split1(g).Parameters());
    out.insert(out.end(), v.begin(), v.end());
  }
  for (const SplitTwoParams& p : fed.split2_models()) {
    const auto v = Flatten(p.Parameters());
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

bool BitEqual(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Single-machine oracle: both halves on one tape over the concatenated
// batch, then one ADAM step on each half.
struct MonolithicStep {
  std::vector<std::vector<double>> g1, g2;
  std::vector<double> p1_after, p2_after;
};

MonolithicStep RunMonolithic(const ModelConfig& c, const ModelBatch& batch, double lr) {
  SplitOneParams p1 = InitSplitOne(c);
  SplitTwoParams p2 = InitSplitTwo(c);
  Backward(MeanSquaredError(MonolithicForward(batch.input, p1, p2, c), batch.target));
  MonolithicStep out;
  std::vector<Tensor> v1 = p1.Parameters(), v2 = p2.Parameters();
  out.g1 = Grads(v1);
  out.g2 = Grads(v2);
  AdamState s1(v1), s2(v2);
  AdamStep(v1, out.g1, s1, lr);
  AdamStep(v2, out.g2, s2, lr);
  out.p1_after = Flatten(v1);
  out.p2_after = Flatten(v2);
  return out;
}

TEST(SelectClientsTest, WholePoolWhenPoolEqualsK) {
  for (auto mode : {ClientSelection::kFixed, ClientSelection::kRandomPerEpoch}) {
    EXPECT_EQ(SelectClients(3, 3, mode, 1, 0, 4), (std::vector<std::size_t>{0, 1, 2}));
  }
}

TEST(SelectClientsTest, FixedIsStableAcrossEpochs) {
  EXPECT_EQ(SelectClients(10, 4, ClientSelection::kFixed, 1, 0, 0),
            SelectClients(10, 4, ClientSelection::kFixed, 1, 0, 7));
}

TEST(SelectClientsTest, RandomIsSeededSortedAndDistinct) {
  const auto a = SelectClients(20, 5, ClientSelection::kRandomPerEpoch, 9, 1, 2);
  EXPECT_EQ(a, SelectClients(20, 5, ClientSelection::kRandomPerEpoch, 9, 1, 2));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 5u);
  for (std::size_t v : a) EXPECT_LT(v, 20u);
  std::set<std::vector<std::size_t>> seen;
  for (std::uint64_t e = 0; e < 8; ++e) {
    seen.insert(SelectClients(20, 5, ClientSelection::kRandomPerEpoch, 9, 1, e));
  }
  EXPECT_GT(seen.size(), 1u);
}

TEST(SelectClientsTest, RandomDrawIsReproducibleFromTheSeedStream) {
  Rng rng(DeriveSeed(9, "client-selection", {1, 2}));
  std::vector<std::size_t> expected = SampleWithoutReplacement(20, 5, rng);
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(SelectClients(20, 5, ClientSelection::kRandomPerEpoch, 9, 1, 2), expected);
}

TEST(SelectClientsTest, PoolTooSmallIsConfigError) {
  EXPECT_THROW(SelectClients(2, 3, ClientSelection::kFixed, 1, 0, 0), ConfigError);
  EXPECT_THROW(SelectClients(2, 0, ClientSelection::kFixed, 1, 0, 0), ConfigError);
}

TEST(AverageClientGradientsTest, SingleClientIsIdentity) {
  const std::vector<std::vector<std::vector<double>>> one = {{{1.5, -2.0}, {3.0}}};
  EXPECT_EQ(AverageClientGradients(one), one[0]);
}

TEST(AverageClientGradientsTest, OppositeGradientsCancel) {
  const std::vector<std::vector<std::vector<double>>> two = {{{1.5, -2.0}}, {{-1.5, 2.0}}};
  EXPECT_EQ(AverageClientGradients(two), (std::vector<std::vector<double>>{{0.0, 0.0}}));
}

TEST(AverageClientGradientsTest, ThreeSetsHandComputed) {
  const std::vector<std::vector<std::vector<double>>> three = {
      {{1.0, 2.0}, {4.0}}, {{3.0, -2.0}, {5.0}}, {{2.0, 6.0}, {-3.0}}};
  const auto mean = AverageClientGradients(three);
  EXPECT_DOUBLE_EQ(mean[0][0], 2.0);
  EXPECT_DOUBLE_EQ(mean[0][1], 2.0);
  EXPECT_DOUBLE_EQ(mean[1][0], 2.0);
}

TEST(AverageClientGradientsTest, ShapeMismatchIsProtocolError) {
  const std::vector<std::vector<std::vector<double>>> bad = {{{1.0, 2.0}}, {{1.0}}};
  EXPECT_THROW(AverageClientGradients(bad), ProtocolError);
  const std::vector<std::vector<std::vector<double>>> bad_count = {{{1.0}}, {{1.0}, {2.0}}};
  EXPECT_THROW(AverageClientGradients(bad_count), ProtocolError);
  EXPECT_THROW(AverageClientGradients({}), ProtocolError);
}

TEST(TrainPlanTest, HalvingSchedule) {
  TrainPlan plan;
  plan.lr = 1e-4;
  EXPECT_DOUBLE_EQ(plan.LearningRate(0), 1e-4);
  EXPECT_DOUBLE_EQ(plan.LearningRate(3), 1.25e-5);
  plan.schedule = LrSchedule::kConstant;
  EXPECT_DOUBLE_EQ(plan.LearningRate(3), 1e-4);
}

TEST(TrainPlanTest, Validation) {
  TrainPlan plan;
  EXPECT_NO_THROW(plan.Validate());
  plan.clients_per_gs = 0;
  EXPECT_THROW(plan.Validate(), ConfigError);
  plan = TrainPlan{};
  plan.epochs = 0;
  EXPECT_THROW(plan.Validate(), ConfigError);
  plan = TrainPlan{};
  plan.batch_size = 0;
  EXPECT_THROW(plan.Validate(), ConfigError);
}

TEST(StrategyTest, NamesRoundTrip) {
  for (auto s : {Strategy::kSplitGlobal, Strategy::kSplitPersonal}) {
    EXPECT_EQ(ParseStrategy(StrategyName(s)), s);
  }
  EXPECT_THROW(ParseStrategy("central"), ConfigError);
}

TEST(FederationTest, StrategyFixesSplitTwoCount) {
  const ModelConfig c = SmallConfig();
  EXPECT_EQ(Federation(c, Strategy::kSplitGlobal, 3).split2_models().size(), 1u);
  EXPECT_EQ(Federation(c, Strategy::kSplitPersonal, 3).split2_models().size(), 3u);
}

TEST(BatchRoundTest, SingleClientMatchesMonolithicStep) {
  const ModelConfig c = SmallConfig();
  const ModelBatch batch = RandomBatch(c, 4, 100);
  Federation fed(c, Strategy::kSplitGlobal, 1);
  RoundSpec spec = OneGroup({batch});
  const RoundResult r = fed.BatchRound(spec);
  const MonolithicStep m = RunMonolithic(c, batch, spec.lr);
  EXPECT_LE(WorstRelative(r.split1_grads[0], m.g1, 1e-12), 1e-9);
  EXPECT_LE(WorstRelative(r.split2_grads.at(0), m.g2, 1e-12), 1e-9);
  EXPECT_LE(testing::MaxAbsDiff(Flatten(fed.split1(0).Parameters()), m.p1_after), 1e-9);
  EXPECT_LE(testing::MaxAbsDiff(Flatten(fed.split2_for(0).Parameters()), m.p2_after), 1e-9);
}

class DistributionTest : public ::testing::TestWithParam<std::size_t> {};

TEST_P(DistributionTest, KClientsMatchConcatenatedBatch) {
  const std::size_t k = GetParam();
  const ModelConfig c = SmallConfig();
  std::vector<ModelBatch> parts;
  for (std::size_t i = 0; i < k; ++i) parts.push_back(RandomBatch(c, 3, 200 + 10 * i));
  Federation fed(c, Strategy::kSplitGlobal, 1);
  RoundSpec spec = OneGroup(parts);
  const RoundResult r = fed.BatchRound(spec);
  const MonolithicStep m = RunMonolithic(c, ConcatBatches(parts), spec.lr);
  EXPECT_LE(WorstRelative(r.split2_grads.at(0), m.g2, 1e-10), 1e-6);
  EXPECT_LE(WorstRelative(r.split1_grads[0], m.g1, 1e-10), 1e-6);
}

INSTANTIATE_TEST_SUITE_P(K, DistributionTest, ::testing::Values(1, 2, 4));

TEST(BatchRoundTest, IdenticalClientsAverageToSingleClientGradient) {
  const ModelConfig c = SmallConfig();
  const ModelBatch batch = RandomBatch(c, 3, 300);
  Federation one(c, Strategy::kSplitGlobal, 1);
  Federation two(c, Strategy::kSplitGlobal, 1);
  const RoundResult a = one.BatchRound(OneGroup({batch}));
  const RoundResult b = two.BatchRound(OneGroup({batch, batch}));
  EXPECT_EQ(a.split1_grads[0], b.split1_grads[0]);
  EXPECT_LE(WorstRelative(a.split2_grads.at(0), b.split2_grads.at(0), 1e-10), 1e-6);
}

TEST(BatchRoundTest, ZeroModelZeroTargetsLeavesParametersButCountsTheStep) {
  const ModelConfig c = SmallConfig();
  Federation fed(c, Strategy::kSplitGlobal, 1);
  fed.SetParameters({InitSplitOne(c, true)}, {InitSplitTwo(c, true)});
  ModelBatch batch = RandomBatch(c, 2, 1);
  batch.target = Tensor::Zeros(batch.target.shape());
  const std::vector<double> before = AllParameters(fed);
  fed.BatchRound(OneGroup({batch}));
  EXPECT_TRUE(BitEqual(before, AllParameters(fed)));
  EXPECT_EQ(fed.split1_adam(0).step_count(), 1u);
  EXPECT_EQ(fed.split2_adam(0).step_count(), 1u);
}

RoundSpec TwoGroups(const ModelConfig& c, std::uint64_t seed) {
  RoundSpec spec;
  spec.lr = 1e-3;
  spec.timeout = 5000ms;
  for (std::uint32_t g = 0; g < 2; ++g) {
    GsBatch group;
    group.gs = g;
    for (std::uint32_t k = 0; k < 2; ++k) {
      group.clients.push_back({10 * g + k, RandomBatch(c, 3, seed + 100 * g + 10 * k)});
    }
    spec.groups.push_back(std::move(group));
  }
  return spec;
}

TEST(BatchRoundTest, SplitGlobalAcrossStationsMatchesJointObjective) {
  // Split-2 sees all four clients; the objective is their mean loss.
  const ModelConfig c = SmallConfig();
  Federation fed(c, Strategy::kSplitGlobal, 2);
  const RoundSpec spec = TwoGroups(c, 40);
  const RoundResult r = fed.BatchRound(spec);

  SplitOneParams p1 = InitSplitOne(c);
  SplitTwoParams p2 = InitSplitTwo(c);
  std::vector<Tensor> losses;
  for (const GsBatch& g : spec.groups) {
    for (const ClientBatch& cb : g.clients) {
      losses.push_back(MeanSquaredError(
          MonolithicForward(cb.batch.input, p1, p2, c), cb.batch.target));
    }
  }
  Backward(Scale(Sum(Concat(std::vector<Tensor>{Reshape(losses[0], {1}),
                                                Reshape(losses[1], {1}),
                                                Reshape(losses[2], {1}),
                                                Reshape(losses[3], {1})},
                            0)),
                 0.25));
  EXPECT_LE(WorstRelative(r.split2_grads.at(0), Grads(p2.Parameters()), 1e-10), 1e-6);
}

TEST(BatchRoundTest, SplitPersonalLeavesOtherStationsBitUnchanged) {
  const ModelConfig c = SmallConfig();
  Federation fed(c, Strategy::kSplitPersonal, 2);
  const std::vector<double> s2_other = Flatten(fed.split2_for(1).Parameters());
  const std::vector<double> s1_other = Flatten(fed.split1(1).Parameters());
  const std::vector<double> s2_own = Flatten(fed.split2_for(0).Parameters());
  RoundSpec spec = OneGroup({RandomBatch(c, 3, 1), RandomBatch(c, 3, 2)}, 0);
  const RoundResult r = fed.BatchRound(spec);
  EXPECT_EQ(r.split2_grads.size(), 1u);
  EXPECT_TRUE(r.split2_grads.count(0));
  EXPECT_TRUE(BitEqual(s2_other, Flatten(fed.split2_for(1).Parameters())));
  EXPECT_TRUE(BitEqual(s1_other, Flatten(fed.split1(1).Parameters())));
  EXPECT_FALSE(BitEqual(s2_own, Flatten(fed.split2_for(0).Parameters())));
  EXPECT_EQ(fed.split2_adam(1).step_count(), 0u);
}

void ExpectFailureNaming(Federation& fed, const RoundSpec& spec, const std::string& who) {
  try {
    fed.BatchRound(spec);
    FAIL() << "round should have aborted";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find(who), std::string::npos) << e.what();
  }
}

TEST(BatchRoundTest, SilentClientAbortsNamingIt) {
  const ModelConfig c = SmallConfig();
  Federation fed(c, Strategy::kSplitGlobal, 1);
  RoundSpec spec = OneGroup({RandomBatch(c, 2, 1), RandomBatch(c, 2, 2)});
  spec.timeout = 200ms;
  spec.silent.insert(PartyId::Client(0, 1));
  ExpectFailureNaming(fed, spec, "client(0,1)");
}

TEST(BatchRoundTest, SilentGridStationAbortsNamingIt) {
  const ModelConfig c = SmallConfig();
  Federation fed(c, Strategy::kSplitGlobal, 2);
  RoundSpec spec = TwoGroups(c, 3);
  spec.timeout = 200ms;
  spec.silent.insert(PartyId::GridStation(1));
  ExpectFailureNaming(fed, spec, "gs(1)");
}

TEST(BatchRoundTest, NonFiniteLossAborts) {
  const ModelConfig c = SmallConfig();
  Federation fed(c, Strategy::kSplitGlobal, 1);
  ModelBatch batch = RandomBatch(c, 2, 1);
  std::vector<double> y(batch.target.data().begin(), batch.target.data().end());
  y[0] = std::numeric_limits<double>::quiet_NaN();
  batch.target = Tensor(batch.target.shape(), y);
  RoundSpec spec = OneGroup({batch});
  spec.timeout = 200ms;
  EXPECT_THROW(fed.BatchRound(spec), NumericError);
}

TEST(BatchRoundTest, UnknownStationRejected) {
  const ModelConfig c = SmallConfig();
  Federation fed(c, Strategy::kSplitGlobal, 1);
  EXPECT_THROW(fed.BatchRound(OneGroup({RandomBatch(c, 2, 1)}, 3)), LookupError);
  EXPECT_THROW(fed.Predict(RandomBatch(c, 2, 1).input, 1), LookupError);
}

std::vector<double> RunRounds(std::size_t threads, bool dp,
                              std::unique_ptr<Transport> net = nullptr) {
  const ModelConfig c = SmallConfig();
  Federation fed(c, Strategy::kSplitGlobal, 3, std::move(net));
  for (std::uint32_t round = 0; round < 2; ++round) {
    RoundSpec spec;
    spec.batch = round;
    spec.lr = 1e-3;
    spec.threads = threads;
    spec.seed = 17;
    spec.dp.enabled = dp;
    spec.dp.epsilon = 2.0;
    for (std::uint32_t g = 0; g < 3; ++g) {
      GsBatch group;
      group.gs = g;
      for (std::uint32_t k = 0; k < 2; ++k) {
        group.clients.push_back({2 * g + k, RandomBatch(c, 3, 1000 * round + 10 * g + k)});
      }
      spec.groups.push_back(std::move(group));
    }
    fed.BatchRound(spec);
  }
  return AllParameters(fed);
}

TEST(DeterminismTest, OneAndManyThreadsAgreeBitwise) {
  for (bool dp : {false, true}) {
    const std::vector<double> serial = RunRounds(1, dp);
    EXPECT_TRUE(BitEqual(serial, RunRounds(3, dp))) << "dp " << dp;
    EXPECT_TRUE(BitEqual(serial, RunRounds(2, dp))) << "dp " << dp;
  }
}

TEST(DeterminismTest, SocketTransportAgreesBitwise) {
  EXPECT_TRUE(BitEqual(RunRounds(2, true),
                       RunRounds(2, true, std::make_unique<LoopbackSocketTransport>())));
}

TEST(DeterminismTest, DpNoiseChangesTheUpdate) {
  EXPECT_FALSE(BitEqual(RunRounds(1, false), RunRounds(1, true)));
}

TEST(BatchRoundTest, WeightsCanBeShippedOncePerEpoch) {
  const ModelConfig c = SmallConfig();
  Federation fed(c, Strategy::kSplitGlobal, 1);
  RoundSpec first = OneGroup({RandomBatch(c, 2, 1)});
  fed.BatchRound(first);
  const auto bytes = fed.transport().BytesByKind()[MessageKind::kSplit1Weights];
  EXPECT_GT(bytes, 0u);
  RoundSpec second = OneGroup({RandomBatch(c, 2, 2)});
  second.batch = 1;
  second.send_weights = false;
  fed.BatchRound(second);
  EXPECT_EQ(fed.transport().BytesByKind()[MessageKind::kSplit1Weights], bytes);

  Federation fresh(c, Strategy::kSplitGlobal, 1);
  RoundSpec no_copy = OneGroup({RandomBatch(c, 2, 2)});
  no_copy.send_weights = false;
  no_copy.timeout = 200ms;
  EXPECT_THROW(fresh.BatchRound(no_copy), ProtocolError);
}

// Windows of a deterministic series with a zero target.
ClientData ZeroClient(const ModelConfig& c, std::uint32_t id, std::size_t n) {
  ClientData d;
  d.client = id;
  TimeSeriesWindow w;
  w.x.assign(c.input_length * c.series_dim, 0.0);
  w.x_mark.assign(c.input_length * c.time_dim, 0.0);
  w.y_mark.assign(c.decoder_length() * c.time_dim, 0.0);
  w.target.assign(c.horizon * c.series_dim, 0.0);
  d.train.assign(n, w);
  d.val.assign(2, w);
  d.test.assign(2, w);
  return d;
}

class PatienceTest : public ::testing::TestWithParam<std::pair<std::size_t, std::size_t>> {};

TEST_P(PatienceTest, StopsAfterStaleEpochs) {
  // Zero model on zero data never improves after the first epoch.
  const auto [patience, expected_epochs] = GetParam();
  const ModelConfig c = SmallConfig();
  Federation fed(c, Strategy::kSplitGlobal, 1);
  fed.SetParameters({InitSplitOne(c, true)}, {InitSplitTwo(c, true)});
  FederatedData data;
  data.clients = {{ZeroClient(c, 0, 4)}};
  TrainPlan plan;
  plan.epochs = 10;
  plan.clients_per_gs = 1;
  plan.batch_size = 2;
  plan.patience = patience;
  const TrainingHistory h = RunTraining(fed, data, plan);
  EXPECT_EQ(h.epochs.size(), expected_epochs);
  EXPECT_TRUE(h.early_stopped);
  EXPECT_EQ(h.epochs[0].batches, 2u);
}

INSTANTIATE_TEST_SUITE_P(Values, PatienceTest,
                         ::testing::Values(std::make_pair(0, 2), std::make_pair(1, 2),
                                           std::make_pair(3, 4)));

TEST(RunTrainingTest, EmptyDataAndSmallPoolsRejected) {
  const ModelConfig c = SmallConfig();
  Federation fed(c, Strategy::kSplitGlobal, 1);
  TrainPlan plan;
  plan.clients_per_gs = 1;
  EXPECT_THROW(RunTraining(fed, FederatedData{}, plan), ConfigError);
  FederatedData data;
  data.clients = {{ZeroClient(c, 0, 1)}};
  plan.batch_size = 2;
  EXPECT_THROW(RunTraining(fed, data, plan), ConfigError);
  plan.clients_per_gs = 2;
  EXPECT_THROW(RunTraining(fed, data, plan), ConfigError);
}

FederatedData SynthData(const ModelConfig& c, std::size_t gs, std::size_t per_gs,
                        std::size_t days, std::uint64_t seed) {
  SynthSpec s;
  s.clients = gs * per_gs;
  s.days = days;
  s.groups = gs;
  s.seed = seed;
  std::vector<LoadSeries> series = GenerateSynthetic(s);
  for (LoadSeries& l : series) Normalize(l);
  std::vector<Neighborhood> hoods(gs);
  for (std::size_t g = 0; g < gs; ++g) {
    hoods[g].gs_index = g;
    for (std::size_t k = 0; k < per_gs; ++k) hoods[g].members.push_back(g * per_gs + k);
  }
  return MakeFederatedData(series, hoods, c, 4);
}

TEST(RunTrainingTest, LabelsNeverLeaveClients) {
  const ModelConfig c = SmallConfig();
  const FederatedData data = SynthData(c, 2, 2, 12, 3);
  // Every client target window, as raw bytes.
  std::vector<std::vector<std::uint8_t>> targets;
  for (const auto& pool : data.clients) {
    for (const ClientData& cd : pool) {
      for (const TimeSeriesWindow& w : cd.train) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(w.target.data());
        targets.emplace_back(p, p + w.target.size() * sizeof(double));
      }
    }
  }
  Federation fed(c, Strategy::kSplitGlobal, 2);
  std::mutex mu;
  std::set<MessageKind> kinds;
  std::size_t frames = 0;
  bool leaked = false;
  fed.transport().SetAuditHook(
      [&](const PartyMessage& m, std::span<const std::uint8_t> frame) {
        std::lock_guard<std::mutex> lock(mu);
        ++frames;
        kinds.insert(m.kind);
        for (const NamedTensor& t : m.tensors) {
          if (t.name.starts_with("input") || t.name.starts_with("target")) leaked = true;
        }
        for (const auto& y : targets) {
          if (std::search(frame.begin(), frame.end(), y.begin(), y.end()) != frame.end()) {
            leaked = true;
          }
        }
      });
  TrainPlan plan;
  plan.epochs = 2;
  plan.clients_per_gs = 2;
  plan.batch_size = 8;
  plan.lr = 1e-3;
  plan.threads = 2;
  RunTraining(fed, data, plan);
  EXPECT_FALSE(leaked);
  EXPECT_GT(frames, 0u);
  EXPECT_EQ(kinds, (std::set<MessageKind>{
                       MessageKind::kSplit1Weights, MessageKind::kActivations,
                       MessageKind::kPredictions, MessageKind::kLossGradients,
                       MessageKind::kActivationGradients}));
}

TEST(RunTrainingTest, ReplayGivesIdenticalHistory) {
  const ModelConfig c = SmallConfig();
  const FederatedData data = SynthData(c, 2, 2, 10, 8);
  TrainPlan plan;
  plan.epochs = 2;
  plan.clients_per_gs = 1;
  plan.selection = ClientSelection::kRandomPerEpoch;
  plan.batch_size = 8;
  plan.lr = 1e-3;
  plan.dp.enabled = true;
  plan.dp.epsilon = 5.0;
  auto run = [&](std::size_t threads) {
    Federation fed(c, Strategy::kSplitPersonal, 2);
    plan.threads = threads;
    const TrainingHistory h = RunTraining(fed, data, plan);
    std::vector<double> out = AllParameters(fed);
    for (const EpochRecord& e : h.epochs) {
      out.insert(out.end(), {e.train_mse, e.val_mse, e.test_mse});
    }
    return out;
  };
  const std::vector<double> a = run(1);
  EXPECT_TRUE(BitEqual(a, run(1)));
  EXPECT_TRUE(BitEqual(a, run(2)));
}

TEST(RunTrainingTest, TrainLossFallsOnSinusoids) {
  ModelConfig c;
  c.input_length = 48;
  c.horizon = 24;
  c.model_dim = 32;
  c.ff_dim = 64;
  c.modes = 8;
  c.seed = 1;
  const FederatedData data = SynthData(c, 1, 2, 20, 1);
  Federation fed(c, Strategy::kSplitGlobal, 1);
  TrainPlan plan;
  plan.epochs = 3;
  plan.clients_per_gs = 2;
  plan.batch_size = 16;
  plan.lr = 1e-3;
  const TrainingHistory h = RunTraining(fed, data, plan);
  ASSERT_EQ(h.epochs.size(), 3u);
  EXPECT_LT(h.epochs.back().train_mse, h.epochs.front().train_mse);
}

}  // namespace
}  // namespace splitfed
