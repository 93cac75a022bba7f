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


// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "splitfed/adam.h"
#include "splitfed/checkpoint.h"
#include "splitfed/commands.h"
#include "splitfed/config.h"
#include "splitfed/data.h"
#include "splitfed/errors.h"
#include "splitfed/fedformer.h"
#include "splitfed/gradcheck.h"
#include "splitfed/mine.h"
#include "splitfed/overhead.h"
#include "splitfed/privacy.h"
#include "splitfed/protocol.h"
#include "splitfed/random.h"
#include "splitfed/spectral.h"

namespace splitfed {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, double a, double b = 0, double c = 0,
                double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

fs::path Scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("splitfed_accept_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Tensor Random(Shape shape, std::uint64_t seed, bool grad = false, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(NumElements(shape));
  for (double& x : v) x = Uniform(rng, -scale, scale);
  return Tensor(std::move(shape), std::move(v), grad);
}

ModelConfig Desk(std::uint64_t seed) {
  ModelConfig c;  // L 48, O 24, D 32, D_ff 64, M 8
  c.seed = seed;
  return c;
}

ModelBatch RandomBatch(const ModelConfig& c, std::size_t b, std::uint64_t seed) {
  ModelBatch batch;
  batch.input.x = Random({b, c.input_length, c.series_dim}, seed);
  batch.input.x_mark = Random({b, c.input_length, c.time_dim}, seed + 1, false, 0.5);
  batch.input.y_mark = Random({b, c.decoder_length(), c.time_dim}, seed + 2, false, 0.5);
  batch.target = Random({b, c.horizon, c.series_dim}, seed + 3);
  return batch;
}

std::vector<std::vector<double>> Grads(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  for (const Tensor& t : params) {
    if (t.has_grad()) {
      out.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      out.emplace_back(t.numel(), 0.0);
    }
  }
  return out;
}

double WorstRelative(const std::vector<std::vector<double>>& a,
                     const std::vector<std::vector<double>>& b, double floor) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].size() != b[t].size()) return std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a[t].size(); ++i) {
      worst = std::max(worst, RelativeError(a[t][i], b[t][i], floor));
    }
  }
  return worst;
}

double MaxAbs(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

std::vector<std::vector<double>> Values(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  for (const Tensor& t : params) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

// ---- 1 -------------------------------------------------------------------

Outcome SplitMonolithicEquivalence() {
  double worst_fwd = 0.0, worst_grad = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ModelConfig c = Desk(seed);
    SplitOneParams p1 = InitSplitOne(c);
    SplitTwoParams p2 = InitSplitTwo(c);
    const ModelBatch batch = RandomBatch(c, 2, 1000 + 10 * seed);

    const Tensor mono = MonolithicForward(batch.input, p1, p2, c);
    Backward(MeanSquaredError(mono, batch.target));
    auto mono_grads = Grads(p1.Parameters());
    for (auto& g : Grads(p2.Parameters())) mono_grads.push_back(g);
    for (Tensor& t : p1.Parameters()) t.ZeroGrad();
    for (Tensor& t : p2.Parameters()) t.ZeroGrad();

    const SplitOneActivations a = Split1Forward(batch.input, p1, c);
    SplitOneActivations shipped{a.enc_out.Detach(), a.dec_seasonal.Detach(),
                                a.dec_trend.Detach()};
    for (Tensor* t : {&shipped.enc_out, &shipped.dec_seasonal, &shipped.dec_trend}) {
      t->set_requires_grad(true);
    }
    const Tensor pred = Split2Forward(shipped, p2, c);
    worst_fwd = std::max(worst_fwd, MaxAbs(pred.data(), mono.data()));
    Backward(MeanSquaredError(pred, batch.target));
    const Tensor roots[] = {a.enc_out, a.dec_seasonal, a.dec_trend};
    const std::vector<double> seeds[] = {
        {shipped.enc_out.grad().begin(), shipped.enc_out.grad().end()},
        {shipped.dec_seasonal.grad().begin(), shipped.dec_seasonal.grad().end()},
        {shipped.dec_trend.grad().begin(), shipped.dec_trend.grad().end()}};
    Backward(roots, seeds);
    auto split_grads = Grads(p1.Parameters());
    for (auto& g : Grads(p2.Parameters())) split_grads.push_back(g);
    worst_grad = std::max(worst_grad, WorstRelative(split_grads, mono_grads, 1e-10));
  }
  return {worst_fwd <= 1e-9 && worst_grad <= 1e-6,
          Fmt("10 seeds: forward max-abs %.2e (tol 1e-9), gradient rel %.2e (tol 1e-6)",
              worst_fwd, worst_grad)};
}

// ---- 2 -------------------------------------------------------------------

ModelBatch Concatenate(const std::vector<ModelBatch>& parts) {
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

Outcome ProtocolDistributionEquivalence() {
  constexpr double kLr = 1e-3;
  std::string detail;
  bool pass = true;
  for (std::size_t k : {1, 2, 4}) {
    const ModelConfig c = Desk(20 + k);
    std::vector<ModelBatch> parts;
    for (std::size_t i = 0; i < k; ++i) parts.push_back(RandomBatch(c, 4, 2000 + 10 * i));

    Federation fed(c, Strategy::kSplitGlobal, 1);
    RoundSpec spec;
    spec.lr = kLr;
    GsBatch group;
    for (std::size_t i = 0; i < k; ++i) {
      group.clients.push_back({static_cast<std::uint32_t>(i), parts[i]});
    }
    spec.groups.push_back(group);
    const RoundResult r = fed.BatchRound(spec);

    SplitOneParams p1 = InitSplitOne(c);
    SplitTwoParams p2 = InitSplitTwo(c);
    const ModelBatch all = Concatenate(parts);
    Backward(MeanSquaredError(MonolithicForward(all.input, p1, p2, c), all.target));
    std::vector<Tensor> v1 = p1.Parameters(), v2 = p2.Parameters();
    const auto g1 = Grads(v1), g2 = Grads(v2);
    AdamState s1(v1), s2(v2);
    AdamStep(v1, g1, s1, kLr);
    AdamStep(v2, g2, s2, kLr);

    const double grad = std::max(WorstRelative(r.split1_grads[0], g1, 1e-10),
                                 WorstRelative(r.split2_grads.at(0), g2, 1e-10));
    // Parameters compare relative to max(|p|, lr): a first ADAM step moves
    // every entry by about lr, so zero-initialized entries sit at that scale.
    const double param =
        std::max(WorstRelative(Values(fed.split1(0).Parameters()), Values(v1), kLr),
                 WorstRelative(Values(fed.split2_for(0).Parameters()), Values(v2), kLr));
    pass = pass && grad <= 1e-6 && param <= 1e-6;
    detail += Fmt("K=%.0f grad rel %.1e, params rel %.1e; ", static_cast<double>(k), grad,
                  param);
  }
  return {pass, detail + "tol 1e-6"};
}

// ---- 3 -------------------------------------------------------------------

struct GradReport {
  std::string worst_name;
  double worst = 0.0;
  std::size_t ops = 0;
};

// Compares tape and central-difference gradients of sum(w * f()) at 10
// coordinates of every leaf.
void CheckOp(GradReport& report, const std::string& name,
             const std::function<std::vector<Tensor>()>& outputs,
             std::vector<Tensor> leaves) {
  std::vector<Tensor> weights;
  {
    NoGradGuard guard;
    std::uint64_t s = 7;
    for (const Tensor& o : outputs()) weights.push_back(Random(o.shape(), s++));
  }
  auto loss = [&] {
    const auto outs = outputs();
    Tensor total = Sum(Mul(outs[0], weights[0]));
    for (std::size_t i = 1; i < outs.size(); ++i) {
      total = Add(total, Sum(Mul(outs[i], weights[i])));
    }
    return total;
  };
  for (Tensor& l : leaves) l.ZeroGrad();
  Backward(loss());
  const auto tape = Grads(leaves);
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    const std::size_t n = leaves[l].numel();
    const std::size_t count = std::min<std::size_t>(10, n);
    for (std::size_t p = 0; p < count; ++p) {
      const std::size_t i = count == n ? p : (p * 7919 + l * 104729) % n;
      const double fd = FiniteDifferenceAt([&] { return loss().item(); }, leaves[l], i, 1e-5);
      const double err = RelativeError(tape[l][i], fd, 1e-6);
      if (err > report.worst) {
        report.worst = err;
        report.worst_name = name;
      }
    }
  }
  ++report.ops;
}

Outcome AutodiffSoundness() {
  GradReport r;
  const Tensor a = Random({3, 4}, 1, true), b = Random({3, 4}, 2, true);
  const Tensor m = Random({4, 5}, 3, true), bias = Random({4}, 4, true);
  const Tensor x3 = Random({2, 6, 4}, 5, true), y3 = Random({2, 6, 4}, 6, true);
  const Tensor w3 = Random({4, 3}, 7, true), yt = Random({2, 4, 3}, 8, true);
  const std::vector<double> constant(12, 0.25);
  using V = std::vector<Tensor>;
  CheckOp(r, "Add", [&] { return V{Add(a, b)}; }, {a, b});
  CheckOp(r, "Sub", [&] { return V{Sub(a, b)}; }, {a, b});
  CheckOp(r, "Mul", [&] { return V{Mul(a, b)}; }, {a, b});
  CheckOp(r, "Scale", [&] { return V{Scale(a, -1.7)}; }, {a});
  CheckOp(r, "AddConstant", [&] { return V{AddConstant(a, constant)}; }, {a});
  CheckOp(r, "AddBias", [&] { return V{AddBias(a, bias)}; }, {a, bias});
  CheckOp(r, "MatMul", [&] { return V{MatMul(a, m)}; }, {a, m});
  CheckOp(r, "Linear", [&] { return V{Linear(x3, w3)}; }, {x3, w3});
  CheckOp(r, "BatchMatMul", [&] { return V{BatchMatMul(x3, yt)}; }, {x3, yt});
  CheckOp(r, "BatchMatMulT", [&] { return V{BatchMatMul(x3, y3, true)}; }, {x3, y3});
  CheckOp(r, "Tanh", [&] { return V{Tanh(a)}; }, {a});
  CheckOp(r, "Gelu", [&] { return V{Gelu(a)}; }, {a});
  CheckOp(r, "Elu", [&] { return V{Elu(a)}; }, {a});
  CheckOp(r, "Exp", [&] { return V{Exp(a)}; }, {a});
  CheckOp(r, "Square", [&] { return V{Square(a)}; }, {a});
  CheckOp(r, "Sum", [&] { return V{Sum(a)}; }, {a});
  CheckOp(r, "Mean", [&] { return V{Mean(a)}; }, {a});
  CheckOp(r, "MeanSquaredError", [&] { return V{MeanSquaredError(a, b)}; }, {a, b});
  CheckOp(r, "LogMeanExp", [&] { return V{LogMeanExp(a)}; }, {a});
  CheckOp(r, "Reshape", [&] { return V{Reshape(a, {4, 3})}; }, {a});
  CheckOp(r, "Slice", [&] { return V{Slice(x3, 1, 2, 3)}; }, {x3});
  CheckOp(r, "Concat", [&] {
    const Tensor parts[] = {x3, y3};
    return V{Concat(parts, 1)};
  }, {x3, y3});
  CheckOp(r, "MeanRepeat", [&] { return V{MeanRepeat(x3, 5)}; }, {x3});
  const Tensor kernel = Random({3, 4, 2}, 9, true);
  CheckOp(r, "Conv1d", [&] { return V{Conv1d(x3, kernel)}; }, {x3, kernel});
  CheckOp(r, "MovingAverage", [&] { return V{MovingAverage(x3, 3)}; }, {x3});

  const std::vector<std::size_t> modes{1, 2};
  CheckOp(r, "Dft", [&] {
    const ComplexTensor f = Dft(x3);
    return V{f.real, f.imag};
  }, {x3});
  CheckOp(r, "Idft", [&] { return V{Idft(Dft(x3))}; }, {x3});
  CheckOp(r, "ModeDft", [&] {
    const ComplexTensor f = ModeDft(x3, modes);
    return V{f.real, f.imag};
  }, {x3});
  const Tensor kr = Random({2, 2, 4}, 10, true), ki = Random({2, 2, 4}, 11, true);
  CheckOp(r, "ModeIdft", [&] { return V{ModeIdft({kr, ki}, modes, 6)}; }, {kr, ki});
  const Tensor mr = Random({1, 4, 4, 2}, 12, true), mi = Random({1, 4, 4, 2}, 13, true);
  CheckOp(r, "ModeMix", [&] {
    const ComplexTensor o = ModeMix({kr, ki}, {mr, mi});
    return V{o.real, o.imag};
  }, {kr, ki, mr, mi});
  const Tensor br = Random({2, 4, 3}, 14, true), bi = Random({2, 4, 3}, 15, true);
  CheckOp(r, "ComplexBatchMatMul", [&] {
    const ComplexTensor o = ComplexBatchMatMul({kr, ki}, {br, bi});
    return V{o.real, o.imag};
  }, {kr, ki, br, bi});
  CheckOp(r, "SplitTanh", [&] {
    const ComplexTensor o = SplitTanh({kr, ki});
    return V{o.real, o.imag};
  }, {kr, ki});

  ModelConfig c;
  c.input_length = 16;
  c.horizon = 8;
  c.model_dim = 4;
  c.ff_dim = 8;
  c.modes = 3;
  c.decomp_kernel = 5;
  c.seed = 17;
  const SplitOneParams p1 = InitSplitOne(c);
  const SplitTwoParams p2 = InitSplitTwo(c);
  const ModelBatch batch = RandomBatch(c, 2, 18);
  Tensor xin = batch.input.x.Detach();
  xin.set_requires_grad(true);
  const ModelInput in{xin, batch.input.x_mark, batch.input.y_mark};
  const Tensor h = Random({2, 16, 4}, 19, true), hd = Random({2, 16, 4}, 20, true);

  CheckOp(r, "SeriesDecomp", [&] {
    const Decomposition d = SeriesDecomp(x3, 3);
    return V{d.seasonal, d.trend};
  }, {x3});
  CheckOp(r, "DataEmbedding", [&] {
    const Embedding e = DataEmbedding(in, p1, c);
    return V{e.x_emb, e.s_emb, e.trend_ini};
  }, {xin, p1.embed_conv, p1.embed_time_x, p1.embed_time_y});
  CheckOp(r, "FEB", [&] { return V{FebForward(h, p1.enc_feb)}; },
          {h, p1.enc_feb.w, p1.enc_feb.kernel.real, p1.enc_feb.kernel.imag});
  CheckOp(r, "FEA", [&] { return V{FeaForward(h, hd, p2.dec_fea, 1)}; },
          {h, hd, p2.dec_fea.wq, p2.dec_fea.wk, p2.dec_fea.wv});
  CheckOp(r, "FFN", [&] { return V{FfnForward(h, p2.dec_ffn)}; },
          {h, p2.dec_ffn.w1, p2.dec_ffn.b1, p2.dec_ffn.w2, p2.dec_ffn.b2});
  CheckOp(r, "Split1Forward", [&] {
    const SplitOneActivations s = Split1Forward(in, p1, c);
    return V{s.enc_out, s.dec_seasonal, s.dec_trend};
  }, p1.Parameters());
  CheckOp(r, "Split2Forward", [&] {
    const SplitOneActivations s = Split1Forward(in, p1, c);
    return V{Split2Forward(s, p2, c)};
  }, p2.Parameters());
  return {r.worst <= 1e-4, Fmt("%.0f ops, worst rel %.2e", static_cast<double>(r.ops),
                               r.worst) + " (" + r.worst_name + "), tol 1e-4"};
}

// ---- 4 -------------------------------------------------------------------

RunConfig DeskRun(const std::string& name) {
  RunConfig c = DeskPreset();
  c.out_dir = Scratch(name).string();
  return c;
}

Outcome LearningSanity() {
  const RunConfig c = DeskRun("learn");
  const TrainOutcome out = TrainCommand(c, 2);
  const auto& e = out.history.epochs;
  const double ratio = e.back().val_mse / e.front().val_mse;
  return {e.size() == 5 && ratio < 0.5 && out.test.r2 > 0.5,
          Fmt("%.0f epochs, val MSE %.4f -> %.4f (ratio %.3f < 0.5)",
              static_cast<double>(e.size()), e.front().val_mse, e.back().val_mse, ratio) +
              Fmt(", test R2 %.3f > 0.5", out.test.r2)};
}

// ---- 5 -------------------------------------------------------------------

Outcome OverheadArithmetic() {
  const OverheadReport r = AnalyzeOverhead(OverheadParams{});
  const bool pass = std::abs(r.ops_client / 1.28e8 - 1) <= 0.005 &&
                    std::abs(r.ops_sp / 8.83e8 - 1) <= 0.005 &&
                    std::abs(100 * r.forward_share - 12.66) <= 0.1 &&
                    std::abs(100 * r.round_share - 5.0) <= 0.5 &&
                    std::abs(100 * r.comm_paper.client_share_reference - 4.55) <= 0.1 &&
                    std::abs(r.latency.total_seconds - 12.64) <= 0.01;
  return {pass, Fmt("ops %.4g / %.4g, forward %.2f%%, round %.2f%%", r.ops_client, r.ops_sp,
                    100 * r.forward_share, 100 * r.round_share) +
                    Fmt(", comm %.2f%%, latency %.3f s", 100 * r.comm_paper.client_share_reference,
                        r.latency.total_seconds)};
}

// ---- 6 -------------------------------------------------------------------

Outcome DpFidelity() {
  constexpr std::size_t kSamples = 1000000;
  const Tensor zeros = Tensor::Zeros({kSamples});
  struct Setting {
    double epsilon, delta, s;
  };
  const Setting settings[] = {{0.5, 0, 1.0},    {1.0, 0, 2.0},    {5.0, 0, 1.0},
                              {0.5, 1e-5, 1.0}, {1.0, 1e-3, 2.0}, {2.5, 1e-6, 1.0}};
  double worst = 0.0;
  std::uint64_t seed = 100;
  for (const Setting& s : settings) {
    Rng rng(seed++);
    const Tensor noised = s.delta == 0 ? LaplaceMechanism(zeros, s.epsilon, s.s, rng)
                                       : GaussianMechanism(zeros, s.epsilon, s.delta, s.s, rng);
    double mean = 0.0, var = 0.0;
    for (double v : noised.data()) mean += v;
    mean /= kSamples;
    for (double v : noised.data()) var += (v - mean) * (v - mean);
    var /= kSamples;
    const double want = s.delta == 0 ? 2 * (s.s / s.epsilon) * (s.s / s.epsilon)
                                     : GaussianNoiseVariance(s.epsilon, s.delta, s.s);
    worst = std::max(worst, std::abs(var / want - 1));
  }
  const Tensor input = Random({4, 8}, 5);
  Rng rng(1);
  const bool exact =
      MaxAbs(LaplaceMechanism(input, 1.0, 0.0, rng).data(), input.data()) == 0.0 &&
      MaxAbs(GaussianMechanism(input, 1.0, 1e-5, 0.0, rng).data(), input.data()) == 0.0;
  return {worst <= 0.05 && exact,
          Fmt("6 settings at 1e6 samples, worst variance error %.2f%% (tol 5%%)", 100 * worst) +
              (exact ? ", s=0 exact" : ", s=0 NOT exact")};
}

// ---- 7 -------------------------------------------------------------------

Outcome MineOracle() {
  bool pass = true;
  std::string detail;
  for (double rho : {0.0, 0.5, 0.9}) {
    Rng rng(31 + static_cast<std::uint64_t>(10 * rho));
    const std::size_t n = 5000;
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = SampleGaussian(rng, 1.0), v = SampleGaussian(rng, 1.0);
      xs[i] = u;
      ys[i] = rho * u + std::sqrt(1 - rho * rho) * v;
    }
    MineOptions o;
    o.steps = 3000;
    o.eval_every = 50;
    o.seed = 7;
    const MineResult r = TrainMine(Tensor({n, 1}, xs), Tensor({n, 1}, ys), o);
    const double est = FinalEstimate(r.trace);
    const double truth = -0.5 * std::log(1 - rho * rho);
    const bool ok = !r.diverged && std::abs(est - truth) <= 0.25 &&
                    (rho != 0.0 || std::abs(est) <= 0.15);
    pass = pass && ok;
    detail += Fmt("rho %.1f: %.3f vs %.3f; ", rho, est, truth);
  }
  return {pass, detail + "tol 0.25, |independent| <= 0.15"};
}

// ---- 8 -------------------------------------------------------------------

struct Band {
  double mean = 0.0;
  double std = 0.0;
};

Band BandOf(const std::vector<double>& v) {
  Band b;
  for (double x : v) b.mean += x;
  b.mean /= static_cast<double>(v.size());
  for (double x : v) b.std += (x - b.mean) * (x - b.mean);
  b.std = v.size() > 1 ? std::sqrt(b.std / static_cast<double>(v.size() - 1)) : 0.0;
  return b;
}

Outcome MiOrdering() {
  // Trained desk checkpoint, audit client 0 of GS 0, Laplace b = 2.
  RunConfig c = DeskRun("mi_order");
  TrainCommand(c, 2);
  const auto fed = Restore(LoadCheckpoint((fs::path(c.out_dir) / "model.ckpt").string()));
  const Dataset data = LoadDataset(Resolve(c));
  const auto& windows = data.train.clients[0][0].train;
  std::map<MiTarget, std::vector<double>> est;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig run = c;
    run.seed = seed;
    run.mi_laplace_scale = 2.0;
    for (const MiAuditRow& r : AuditMi(run, fed->split1(0), windows)) {
      est[r.target].push_back(r.estimate);
    }
  }
  const Band self = BandOf(est[MiTarget::kSelf]), clean = BandOf(est[MiTarget::kClean]),
             noised = BandOf(est[MiTarget::kNoised]), noise = BandOf(est[MiTarget::kNoise]);
  const bool pass = self.mean - self.std > clean.mean + clean.std &&
                    clean.mean - clean.std > noised.mean + noised.std &&
                    noised.mean + noised.std >= noise.mean - noise.std;
  return {pass, Fmt("5 seeds: self %.2f+-%.2f > clean %.2f+-%.2f", self.mean, self.std,
                    clean.mean, clean.std) +
                    Fmt(" > noised %.2f+-%.2f >= noise %.2f+-%.2f", noised.mean, noised.std,
                        noise.mean, noise.std)};
}

// ---- 9 -------------------------------------------------------------------

Outcome EpsilonMonotonicity() {
  RunConfig c = DeskRun("dp_sweep");
  c.sweep_epsilons = {0.5, 1.0, 2.5, 5.0, 10.0};
  c.sweep_deltas = {0.0};
  c.sweep_seeds = 3;
  const auto rows = DpSweepCommand(c, 2);
  std::map<double, std::vector<double>> mi, mse;
  for (const SweepRow& r : rows) {
    mi[r.epsilon].push_back(r.mi);
    mse[r.epsilon].push_back(r.test.mse);
  }
  bool pass = true;
  std::string detail;
  for (auto i = mi.begin(); i != mi.end(); ++i) {
    const Band mi_i = BandOf(i->second), mse_i = BandOf(mse[i->first]);
    detail += Fmt("eps %g: MI %.3f+-%.3f MSE %.4f; ", i->first, mi_i.mean, mi_i.std,
                  mse_i.mean);
    for (auto j = std::next(i); j != mi.end(); ++j) {
      const Band mi_j = BandOf(j->second), mse_j = BandOf(mse[j->first]);
      if (mi_j.mean < mi_i.mean - std::max(mi_i.std, mi_j.std)) pass = false;
      if (mse_j.mean > mse_i.mean + std::max(mse_i.std, mse_j.std)) pass = false;
    }
  }
  return {pass, detail + "3 seeds, ties within one std"};
}

// ---- 10 ------------------------------------------------------------------

Outcome PipelineOracles() {
  std::vector<std::string> failures;
  // Metrics against naive loops.
  Rng rng(3);
  std::vector<double> y(1000), p(1000);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = SampleGaussian(rng, 1.0);
    p[i] = y[i] + SampleGaussian(rng, 0.3);
  }
  double mae = 0, mse = 0, mean = 0, sst = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mae += std::abs(y[i] - p[i]);
    mse += (y[i] - p[i]) * (y[i] - p[i]);
    mean += y[i];
  }
  mean /= 1000;
  for (double v : y) sst += (v - mean) * (v - mean);
  const double r2 = 1 - mse / sst;
  mae /= 1000;
  mse /= 1000;
  const Metrics m = ComputeMetrics(y, p);
  if (std::abs(m.mae - mae) > 1e-12 || std::abs(m.mse - mse) > 1e-12 ||
      std::abs(m.r2 - r2) > 1e-12) {
    failures.push_back("metrics");
  }

  // Windows: values equal their index, so contents name their position.
  LoadSeries s;
  s.client_id = "idx";
  for (std::size_t t = 0; t < 200; ++t) {
    s.timestamps.push_back(1325376000 + static_cast<Timestamp>(t) * kSecondsPerHour);
    s.values.push_back(static_cast<double>(t));
  }
  const ModelConfig c = Desk(1);
  for (std::size_t stride : {1, 3, 7}) {
    const auto w = MakeWindows(s, c, stride);
    if (w.size() != (200 - 48 - 24) / stride + 1) failures.push_back("window count");
    for (std::size_t k = 0; k < w.size(); ++k) {
      const std::size_t j = k * stride;
      bool ok = w[k].start == j;
      for (std::size_t i = 0; i < 48; ++i) ok = ok && w[k].x[i] == static_cast<double>(j + i);
      for (std::size_t i = 0; i < 24; ++i) {
        ok = ok && w[k].target[i] == static_cast<double>(j + 48 + i);
      }
      for (std::size_t r = 0; r < c.decoder_length(); ++r) {
        const auto f = TimeFeatures(s.timestamps[j + 24 + r]);
        ok = ok && std::equal(f.begin(), f.end(), w[k].y_mark.begin() + 4 * r);
      }
      if (!ok) {
        failures.push_back("window alignment");
        break;
      }
    }
  }
  for (auto [n, tr, va, te] : std::vector<std::array<std::size_t, 4>>{
           {10, 7, 1, 2}, {9, 6, 1, 2}, {100, 70, 10, 20}, {1, 0, 0, 1}}) {
    const SplitCounts sc = SplitSizes(n);
    if (sc.train != tr || sc.val != va || sc.test != te) failures.push_back("split sizes");
  }

  // Planted groups: synthetic cluster-separable profiles and a hand fixture.
  SynthSpec spec;
  spec.clients = 8;
  spec.days = 14;
  spec.groups = 2;
  spec.profile = SynthProfile::kClusterSeparable;
  auto series = GenerateSynthetic(spec);
  std::vector<std::vector<double>> profiles;
  for (auto& l : series) {
    Normalize(l);
    profiles.push_back(l.values);
  }
  const auto hoods = AgglomerativeCluster(profiles, 2);
  if (hoods.size() != 2 || hoods[0].members != std::vector<std::size_t>{0, 2, 4, 6} ||
      hoods[1].members != std::vector<std::size_t>{1, 3, 5, 7}) {
    failures.push_back("planted synthetic clusters");
  }
  const std::vector<std::vector<double>> hand = {
      {0, 0.1, 0}, {10, 10, 10.2}, {0.2, 0, 0}, {9.9, 10, 10}, {0, 0, 0.1}};
  const auto hand_hoods = AgglomerativeCluster(hand, 2);
  if (hand_hoods.size() != 2 || hand_hoods[0].members != std::vector<std::size_t>{0, 2, 4} ||
      hand_hoods[1].members != std::vector<std::size_t>{1, 3}) {
    failures.push_back("planted hand clusters");
  }

  std::string detail = "metrics 1e-12, windows at strides 1/3/7, 7:1:2 splits, 2 planted fixtures";
  for (const std::string& f : failures) detail += "; FAILED " + f;
  return {failures.empty(), detail};
}

// ---- 11 ------------------------------------------------------------------

int Shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> Snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    files[entry.path().filename().string()] = s.str();
  }
  return files;
}

Outcome Determinism() {
  const fs::path root = Scratch("determinism");
  const fs::path cfg = root / "tiny.cfg";
  std::ofstream(cfg) << "[synth]\ndays: int = 20\n"
                        "[train]\nepochs: int = 2\nbatch_size: int = 16\n"
                        "selection: string = random\nclients_per_gs: int = 1\n"
                        "[dp]\nenabled: bool = true\nepsilon: float = 5\n"
                        "[mi]\nsteps: int = 100\n"
                        "[sweep]\nepsilons: float[] = [1, inf]\nseeds: int = 1\n";
  const std::vector<std::string> commands = {
      "synth", "cluster", "overhead", "train", "evaluate --scope own",
      "evaluate --scope cross", "evaluate --scope unseen", "audit-mi", "dp-sweep"};
  auto run_all = [&](const std::string& name, int threads) {
    const fs::path out = root / name;
    for (const std::string& cmd : commands) {
      const int rc = Shell(std::string(SPLITFED_CLI) + " " + cmd +
                           " --preset desk --seed 3 --config " + cfg.string() + " --out " +
                           out.string() + " --threads " + std::to_string(threads) +
                           " >/dev/null 2>&1");
      if (rc != 0) throw Error("'" + cmd + "' exited with " + std::to_string(rc));
    }
    return Snapshot(out);
  };
  const auto first = run_all("a", 1);
  const auto second = run_all("b", 1);
  const auto threaded = run_all("c", 3);
  std::string diff;
  for (const auto& [name, bytes] : first) {
    if (second.count(name) == 0 || second.at(name) != bytes) diff += " rerun:" + name;
    if (threaded.count(name) == 0 || threaded.at(name) != bytes) diff += " threads:" + name;
  }
  if (second.size() != first.size() || threaded.size() != first.size()) diff += " file-set";
  return {diff.empty() && !first.empty(),
          std::to_string(commands.size()) + " subcommands, " + std::to_string(first.size()) +
              " files identical across reruns and 1/3 threads" +
              (diff.empty() ? "" : "; differs:" + diff)};
}

}  // namespace
}  // namespace splitfed

int main(int argc, char** argv) {
  using namespace splitfed;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"split/monolithic equivalence", SplitMonolithicEquivalence},
      {"protocol distribution equivalence", ProtocolDistributionEquivalence},
      {"autodiff soundness", AutodiffSoundness},
      {"learning sanity", LearningSanity},
      {"overhead arithmetic", OverheadArithmetic},
      {"DP mechanism fidelity", DpFidelity},
      {"MINE oracle", MineOracle},
      {"MI ordering", MiOrdering},
      {"DP epsilon monotonicity", EpsilonMonotonicity},
      {"metrics and pipeline oracles", PipelineOracles},
      {"determinism", Determinism},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoul(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && selected.count(i + 1) == 0) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2zu %-36s %s  %s [%.1f s]\n", i + 1, criteria[i].first.c_str(),
                o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
