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

#ifndef SPLITFED_DATA_H_
#define SPLITFED_DATA_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "splitfed/fedformer.h"
#include "splitfed/tensor.h"

namespace splitfed {

// Seconds since 1970-01-01T00:00:00 UTC.
using Timestamp = std::int64_t;

inline constexpr Timestamp kSecondsPerHour = 3600;

struct NormStats {
  double mean = 0.0;
  double stddev = 1.0;
};

struct LoadSeries {
  std::string client_id;
  std::vector<Timestamp> timestamps;  // strictly increasing, hourly
  std::vector<double> values;
  NormStats stats;  // identity until Normalize() runs
  bool normalized = false;
};

// "YYYY-MM-DD HH:MM[:SS]" (a 'T' separator is accepted), UTC.
Timestamp ParseTimestamp(const std::string& text);
std::string FormatTimestamp(Timestamp t);

// Timestamp column followed by one column per client. Delimiter is ';' or
// ',' (taken from the header line); with ';' a decimal comma is accepted.
// Fields may be double-quoted. Gaps, duplicates or disorder raise DataError
// naming the offending line.
// Round-trip text for a double (%.17g).
std::string FormatDouble(double v);

std::vector<LoadSeries> LoadSeriesCsv(const std::string& path);
void WriteSeriesCsv(const std::string& path, std::span<const LoadSeries> series);

// Zero mean, unit population variance. Constant series raise DataError.
void Normalize(LoadSeries& series);
std::vector<double> Denormalize(std::span<const double> values,
                                const NormStats& stats);

struct Neighborhood {
  std::size_t gs_index = 0;
  std::vector<std::size_t> members;  // ascending series indices
};

// Average-linkage agglomerative clustering under Euclidean distance,
// series truncated to the shortest length. Ties merge the pair with the
// smallest member indices. Clusters come back ordered by smallest member.
std::vector<Neighborhood> AgglomerativeCluster(
    std::span<const std::vector<double>> series, std::size_t k);

// (month, day of month, weekday with Monday = 0, hour), each mapped
// affinely onto [-0.5, 0.5]:
//   (month-1)/11, (day-1)/30, weekday/6, hour/23, all minus 0.5.
std::array<double, 4> TimeFeatures(Timestamp t);

struct TimeSeriesWindow {
  std::vector<double> x;       // [L x Z]
  std::vector<double> x_mark;  // [L x U]
  std::vector<double> y_mark;  // [L_d x U]
  std::vector<double> target;  // [O x Z]
  std::size_t start = 0;       // index of x[0] in the source series
};

// Windows at start indices 0, stride, ... with start + L + O <= length.
// A series shorter than L + O yields no windows and a warning on stderr.
std::vector<TimeSeriesWindow> MakeWindows(const LoadSeries& series,
                                          const ModelConfig& config,
                                          std::size_t stride = 1);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

// Chronological 7:1:2. train = floor(0.7 n), val = 0.1 n rounded half up,
// test takes the remainder.
SplitCounts SplitSizes(std::size_t n);

struct WindowSplit {
  std::vector<TimeSeriesWindow> train;
  std::vector<TimeSeriesWindow> val;
  std::vector<TimeSeriesWindow> test;
};

WindowSplit SplitTrainValTest(std::vector<TimeSeriesWindow> windows);

struct ModelBatch {
  ModelInput input;
  Tensor target;  // [B x O x Z]
};

ModelBatch StackWindows(std::span<const TimeSeriesWindow> windows,
                        std::span<const std::size_t> indices,
                        const ModelConfig& config);
ModelBatch StackWindows(std::span<const TimeSeriesWindow> windows,
                        const ModelConfig& config);

struct Metrics {
  double mae = 0.0;
  double mse = 0.0;
  double r2 = 0.0;
};

// R^2 = 1 - SSE/SST. A constant y_true leaves R^2 undefined (NumericError).
Metrics ComputeMetrics(std::span<const double> y_true,
                       std::span<const double> y_pred);

enum class SynthProfile { kSinusoidMix, kClusterSeparable };

struct SynthSpec {
  std::size_t clients = 4;
  std::size_t days = 60;
  SynthProfile profile = SynthProfile::kSinusoidMix;
  std::size_t groups = 2;  // planted clusters for kClusterSeparable
  double noise = 0.1;
  double weekly_amplitude = 0.3;
  Timestamp start = 1325376000;  // 2012-01-01 00:00 UTC
  std::uint64_t seed = 1;
};

// Hourly series with daily (t mod 24) and weekly (t mod 168) cycles plus
// Gaussian noise. kClusterSeparable gives group g a daily shape at
// harmonic g + 1; clients are assigned to groups round-robin.
std::vector<LoadSeries> GenerateSynthetic(const SynthSpec& spec);

SynthProfile ParseSynthProfile(const std::string& name);
std::string SynthProfileName(SynthProfile profile);

}  // namespace splitfed

#endif  // SPLITFED_DATA_H_
