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

#include "splitfed/mine.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "splitfed/adam.h"
#include "splitfed/errors.h"

namespace splitfed {
namespace {

Tensor UniformLeaf(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(NumElements(shape));
  for (double& x : v) x = Uniform(rng, -bound, bound);
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor GatherRows(const Tensor& t, std::span<const std::size_t> rows) {
  const std::size_t width = t.dim(1);
  std::vector<double> out(rows.size() * width);
  const double* src = t.data().data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(src + rows[r] * width, width, out.begin() + r * width);
  }
  return Tensor({rows.size(), width}, std::move(out));
}

Tensor Pair(const Tensor& x, const Tensor& y) {
  const Tensor parts[] = {x, y};
  return Concat(parts, 1);
}

double LogAddExp(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

// Zero mean, unit variance per column; constant columns are only centred.
Tensor Standardize(const Tensor& t) {
  const std::size_t n = t.dim(0), d = t.dim(1);
  std::vector<double> v(t.data().begin(), t.data().end());
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += v[i * d + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = v[i * d + j] - mean;
      var += e * e;
    }
    var /= static_cast<double>(n);
    const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    for (std::size_t i = 0; i < n; ++i) v[i * d + j] = (v[i * d + j] - mean) * inv;
  }
  return Tensor(t.shape(), std::move(v));
}

MinePoint Evaluate(const MineNetwork& net, const Tensor& x, const Tensor& y,
                   const MineOptions& o, std::size_t step, Rng& rng) {
  NoGradGuard no_grad;
  const std::size_t n = x.dim(0);
  const std::size_t b = std::min(o.batch, n);
  std::vector<double> values;
  for (std::size_t e = 0; e < o.eval_batches; ++e) {
    const std::vector<std::size_t> idx = SampleWithoutReplacement(n, b, rng);
    const Tensor yb = GatherRows(y, idx);
    values.push_back(DvBound(net, GatherRows(x, idx), yb, ShuffleMarginal(yb, rng)).item());
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {step, mean, std::sqrt(var)};
}

}  // namespace

MineNetwork MineNetwork::Init(std::size_t input_dim, std::uint64_t seed) {
  if (input_dim == 0) throw ConfigError("MINE input dimension must be positive");
  Rng rng(DeriveSeed(seed, "mine-init"));
  MineNetwork n;
  n.w1 = UniformLeaf({input_dim, 100}, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
  n.b1 = Tensor::Zeros({100}, true);
  n.w2 = UniformLeaf({100, 50}, 1.0 / std::sqrt(100.0), rng);
  n.b2 = Tensor::Zeros({50}, true);
  n.w3 = UniformLeaf({50, 1}, 1.0 / std::sqrt(50.0), rng);
  n.b3 = Tensor::Zeros({1}, true);
  return n;
}

std::vector<Tensor> MineNetwork::Parameters() const { return {w1, b1, w2, b2, w3, b3}; }

Tensor MineNetwork::Forward(const Tensor& xy) const {
  Tensor h = Elu(AddBias(Linear(xy, w1), b1));
  h = Elu(AddBias(Linear(h, w2), b2));
  return AddBias(Linear(h, w3), b3);
}

Tensor ShuffleMarginal(const Tensor& y, Rng& rng) {
  if (y.rank() == 0) throw DimensionError("shuffle needs a batch axis");
  const std::size_t b = y.dim(0);
  const std::size_t width = y.numel() / std::max<std::size_t>(b, 1);
  const std::vector<std::size_t> perm = Permutation(b, rng);
  std::vector<double> out(y.numel());
  const double* src = y.data().data();
  for (std::size_t r = 0; r < b; ++r) {
    std::copy_n(src + perm[r] * width, width, out.begin() + r * width);
  }
  return Tensor(y.shape(), std::move(out));
}

Tensor DvFromScores(const Tensor& joint, const Tensor& marginal) {
  const Tensor bound = Sub(Mean(joint), LogMeanExp(marginal));
  if (!std::isfinite(bound.item())) throw NumericError("DV bound is not finite");
  return bound;
}

Tensor DvBound(const MineNetwork& t, const Tensor& x, const Tensor& y,
               const Tensor& y_shuffled) {
  if (x.rank() != 2 || y.rank() != 2 || y_shuffled.shape() != y.shape() ||
      x.dim(0) != y.dim(0)) {
    throw DimensionError("dv bound: x " + ShapeToString(x.shape()) + ", y " +
                         ShapeToString(y.shape()) + ", shuffled " +
                         ShapeToString(y_shuffled.shape()));
  }
  return DvFromScores(t.Forward(Pair(x, y)), t.Forward(Pair(x, y_shuffled)));
}

MineResult TrainMine(const Tensor& x, const Tensor& y, const MineOptions& o) {
  if (x.rank() != 2 || y.rank() != 2 || x.dim(0) != y.dim(0)) {
    throw DimensionError("MINE needs aligned [N x d] samples, got " +
                         ShapeToString(x.shape()) + " and " + ShapeToString(y.shape()));
  }
  const std::size_t n = x.dim(0);
  if (n < 2 || o.batch < 2) throw ConfigError("MINE needs at least 2 samples per batch");
  if (o.steps == 0 || o.eval_every == 0 || o.eval_batches == 0) {
    throw ConfigError("MINE steps, eval_every and eval_batches must be positive");
  }
  if (!(o.lr > 0.0) || !(o.ema > 0.0 && o.ema <= 1.0)) {
    throw ConfigError("MINE lr must be positive and ema in (0, 1]");
  }
  if (!(o.holdout >= 0.0 && o.holdout < 1.0)) throw ConfigError("MINE holdout must be in [0, 1)");
  Tensor xt = x, yt = y, xe = x, ye = y;
  if (o.holdout > 0.0) {
    const std::size_t held = static_cast<std::size_t>(o.holdout * static_cast<double>(n));
    if (held < 2 || n - held < 2) throw ConfigError("too few samples for the MINE holdout");
    Rng split(DeriveSeed(o.seed, "mine-holdout"));
    const std::vector<std::size_t> perm = Permutation(n, split);
    const std::span<const std::size_t> train(perm.data(), n - held);
    const std::span<const std::size_t> eval(perm.data() + (n - held), held);
    xt = GatherRows(x, train);
    yt = GatherRows(y, train);
    xe = GatherRows(x, eval);
    ye = GatherRows(y, eval);
  }
  const std::size_t b = std::min(o.batch, xt.dim(0));

  MineResult result;
  result.network = MineNetwork::Init(x.dim(1) + y.dim(1), o.seed);
  std::vector<Tensor> params = result.network.Parameters();
  AdamState adam(params);
  Rng rng(DeriveSeed(o.seed, "mine-batches"));
  Rng eval_rng(DeriveSeed(o.seed, "mine-eval"));
  std::optional<double> log_ma;

  for (std::size_t step = 1; step <= o.steps; ++step) {
    const std::vector<std::size_t> idx = SampleWithoutReplacement(xt.dim(0), b, rng);
    const Tensor xb = GatherRows(xt, idx);
    const Tensor yb = GatherRows(yt, idx);
    const Tensor joint = result.network.Forward(Pair(xb, yb));
    const Tensor marg = result.network.Forward(Pair(xb, ShuffleMarginal(yb, rng)));
    double lme;
    {
      NoGradGuard no_grad;
      lme = LogMeanExp(marg).item();
    }
    if (!std::isfinite(lme) || !std::isfinite(Mean(joint).item())) {
      result.diverged = true;
      break;
    }
    log_ma = log_ma ? LogAddExp(std::log1p(-o.ema) + *log_ma, std::log(o.ema) + lme) : lme;
    // Surrogate whose gradient divides the exp term by the moving average
    // instead of the batch mean.
    const std::vector<double> shift(marg.numel(), -*log_ma);
    const Tensor objective = Sub(Mean(joint), Mean(Exp(AddConstant(marg, shift))));
    for (Tensor& p : params) p.ZeroGrad();
    Backward(Scale(objective, -1.0));
    try {
      AdamStep(params, adam, o.lr);
    } catch (const NumericError&) {
      result.diverged = true;
      break;
    }
    if (step % o.eval_every == 0 || step == o.steps) {
      try {
        result.trace.push_back(Evaluate(result.network, xe, ye, o, step, eval_rng));
      } catch (const NumericError&) {
        result.diverged = true;
        break;
      }
    }
  }
  return result;
}

double FinalEstimate(const MiTrace& trace, std::size_t tail) {
  if (trace.empty()) throw ConfigError("empty MI trace");
  const std::size_t k = std::min(std::max<std::size_t>(tail, 1), trace.size());
  double sum = 0.0;
  for (std::size_t i = trace.size() - k; i < trace.size(); ++i) sum += trace[i].mean;
  return sum / static_cast<double>(k);
}

GateDecision MiGate(const MiTrace& trace, double threshold) {
  if (trace.empty()) throw ConfigError("MI gate needs a non-empty trace");
  return trace.back().mean <= threshold ? GateDecision::kForward : GateDecision::kWithhold;
}

double DefaultGateThreshold(const MiTrace& noise_floor, double margin) {
  return FinalEstimate(noise_floor) + margin;
}

MiTarget ParseMiTarget(const std::string& name) {
  if (name == "self") return MiTarget::kSelf;
  if (name == "noise") return MiTarget::kNoise;
  if (name == "clean") return MiTarget::kClean;
  if (name == "noised") return MiTarget::kNoised;
  throw ConfigError("unknown MI target '" + name + "' (self, noise, clean, noised)");
}

std::string MiTargetName(MiTarget target) {
  switch (target) {
    case MiTarget::kSelf:
      return "self";
    case MiTarget::kNoise:
      return "noise";
    case MiTarget::kClean:
      return "clean";
    case MiTarget::kNoised:
      return "noised";
  }
  return "?";
}

Tensor RandomProjection(const Tensor& x, std::size_t out, std::uint64_t seed) {
  if (x.rank() != 2 || out == 0) throw DimensionError("projection needs [N x d] and out > 0");
  const std::size_t d = x.dim(1);
  Rng rng(DeriveSeed(seed, "projection", {d, out}));
  std::vector<double> m(d * out);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : m) v = SampleGaussian(rng, sd);
  NoGradGuard no_grad;
  return MatMul(x, Tensor({d, out}, std::move(m)));
}

MineResult EstimateMiPipeline(const SplitOneParams& params, const ModelConfig& config,
                              std::span<const TimeSeriesWindow> windows,
                              const MiPipelineOptions& options) {
  const std::size_t n = windows.size();
  if (n < 2) throw ConfigError("MI audit needs at least 2 windows");
  if (options.dp_batch == 0) throw ConfigError("mi.dp_batch must be positive");
  const std::uint64_t seed = options.mine.seed;

  // x: the client's raw input window with its time marks.
  const std::size_t lx = config.input_length * config.series_dim;
  const std::size_t lm = config.input_length * config.time_dim;
  std::vector<double> xv;
  xv.reserve(n * (lx + lm));
  for (const TimeSeriesWindow& w : windows) {
    xv.insert(xv.end(), w.x.begin(), w.x.end());
    xv.insert(xv.end(), w.x_mark.begin(), w.x_mark.end());
  }
  Tensor x({n, lx + lm}, std::move(xv));

  Tensor y;
  const std::size_t act_dim = config.input_length * config.model_dim;
  if (options.target == MiTarget::kSelf) {
    y = x;
  } else if (options.target == MiTarget::kNoise) {
    Rng rng(DeriveSeed(seed, "mi-noise"));
    std::vector<double> v(n * act_dim);
    for (double& e : v) e = SampleGaussian(rng, 1.0);
    y = Tensor({n, act_dim}, std::move(v));
  } else {
    NoGradGuard no_grad;
    std::vector<double> v;
    v.reserve(n * act_dim);
    for (std::size_t start = 0, chunk = 0; start < n; start += options.dp_batch, ++chunk) {
      const std::size_t len = std::min(options.dp_batch, n - start);
      const ModelBatch batch = StackWindows(windows.subspan(start, len), config);
      SplitOneActivations acts = Split1Forward(batch.input, params, config);
      if (options.target == MiTarget::kNoised) {
        Rng rng(DeriveSeed(seed, "mi-dp", {chunk}));
        if (options.laplace_scale) {
          acts.enc_out = LaplaceMechanism(acts.enc_out, 1.0, *options.laplace_scale, rng);
        } else {
          acts = ProtectActivations(acts, options.dp, rng);
        }
      }
      v.insert(v.end(), acts.enc_out.data().begin(), acts.enc_out.data().end());
    }
    y = Tensor({n, act_dim}, std::move(v));
  }

  const std::size_t p = options.projection_dim;
  if (p > 0 && x.dim(1) > p) {
    const bool self = options.target == MiTarget::kSelf;
    x = RandomProjection(x, p, DeriveSeed(seed, "mi-proj-x"));
    if (self) y = x;
  }
  if (p > 0 && y.dim(1) > p) y = RandomProjection(y, p, DeriveSeed(seed, "mi-proj-y"));
  return TrainMine(Standardize(x), Standardize(y), options.mine);
}

void WriteMiTraceCsv(const std::string& path, const MiTrace& trace) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "epoch,mean,std\n";
  for (const MinePoint& p : trace) {
    out << p.step << ',' << FormatDouble(p.mean) << ',' << FormatDouble(p.std) << '\n';
  }
}

}  // namespace splitfed
