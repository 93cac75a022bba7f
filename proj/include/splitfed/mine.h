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

#ifndef SPLITFED_MINE_H_
#define SPLITFED_MINE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitfed/data.h"
#include "splitfed/fedformer.h"
#include "splitfed/privacy.h"
#include "splitfed/random.h"
#include "splitfed/tensor.h"

namespace splitfed {

// Statistics network T(x, y): 100 -> ELU -> 50 -> ELU -> 1.
struct MineNetwork {
  Tensor w1, b1, w2, b2, w3, b3;

  static MineNetwork Init(std::size_t input_dim, std::uint64_t seed);
  std::size_t input_dim() const { return w1.dim(0); }
  std::vector<Tensor> Parameters() const;
  // xy [N x input_dim] -> [N x 1]
  Tensor Forward(const Tensor& xy) const;
};

// Rows of y[B x ...] in a random order.
Tensor ShuffleMarginal(const Tensor& y, Rng& rng);

// mean(joint) - log mean exp(marginal) over statistic scores, on the tape.
// NumericError when the result is not finite.
Tensor DvFromScores(const Tensor& joint, const Tensor& marginal);

// DvFromScores(T(x, y), T(x, y_shuffled)).
Tensor DvBound(const MineNetwork& t, const Tensor& x, const Tensor& y,
               const Tensor& y_shuffled);

struct MinePoint {
  std::size_t step = 0;
  double mean = 0.0;
  double std = 0.0;
};

using MiTrace = std::vector<MinePoint>;

struct MineOptions {
  std::size_t steps = 10000;
  std::size_t batch = 100;
  double lr = 1e-3;
  // A trace point every `eval_every` steps (and after the last one), each
  // the mean and std of the bound over `eval_batches` random batches.
  std::size_t eval_every = 10;
  std::size_t eval_batches = 10;
  double ema = 0.01;  // moving-average rate of the denominator
  // Share of rows (after a seeded shuffle) held out for the trace; 0
  // evaluates on the training rows.
  double holdout = 0.2;
  std::uint64_t seed = 1;
};

struct MineResult {
  MineNetwork network;
  MiTrace trace;
  bool diverged = false;  // a non-finite bound stopped training early
};

// Gradient ascent on the bound over aligned samples x[N x dx], y[N x dy].
MineResult TrainMine(const Tensor& x, const Tensor& y, const MineOptions& options);

// Mean of the last `tail` trace points, the reported estimate.
double FinalEstimate(const MiTrace& trace, std::size_t tail = 5);

enum class GateDecision { kForward, kWithhold };
// kForward iff the latest estimate is at most `threshold`.
GateDecision MiGate(const MiTrace& trace, double threshold);
// Noise-floor estimate plus a margin.
double DefaultGateThreshold(const MiTrace& noise_floor, double margin = 1.0);

enum class MiTarget { kSelf, kNoise, kClean, kNoised };
MiTarget ParseMiTarget(const std::string& name);  // self|noise|clean|noised
std::string MiTargetName(MiTarget target);

struct MiPipelineOptions {
  MiTarget target = MiTarget::kClean;
  // Noise for kNoised: Laplace of this scale when set, else `dp`.
  std::optional<double> laplace_scale;
  PrivacyBudget dp;
  std::size_t dp_batch = 32;  // activations are noised in chunks of this size
  // Fixed Gaussian projection of x and y to this many dims when wider;
  // 0 keeps raw dims.
  std::size_t projection_dim = 32;
  MineOptions mine;
};

// x = flattened (input window, input time marks); y = the chosen target,
// e.g. the encoder output of Split-1 on the same windows.
MineResult EstimateMiPipeline(const SplitOneParams& params, const ModelConfig& config,
                              std::span<const TimeSeriesWindow> windows,
                              const MiPipelineOptions& options);

// Rows of x[N x d] times a fixed N(0, 1/d) matrix [d x out].
Tensor RandomProjection(const Tensor& x, std::size_t out, std::uint64_t seed);

void WriteMiTraceCsv(const std::string& path, const MiTrace& trace);

}  // namespace splitfed

#endif  // SPLITFED_MINE_H_
