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

#include "splitfed/data.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>

#include "splitfed/errors.h"
#include "splitfed/random.h"

namespace splitfed {
namespace {

std::string Trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string> SplitFields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    if (ch == delim && !quoted) {
      out.push_back(Trim(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  out.push_back(Trim(field));
  return out;
}

bool ParseInt(std::string_view text, int& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

Timestamp ParseTimestamp(const std::string& text) {
  // YYYY-MM-DD[ T]HH:MM[:SS]
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  const bool shape_ok =
      text.size() >= 16 && text[4] == '-' && text[7] == '-' &&
      (text[10] == ' ' || text[10] == 'T') && text[13] == ':' &&
      (text.size() == 16 || (text.size() == 19 && text[16] == ':'));
  if (!shape_ok || !ParseInt(std::string_view(text).substr(0, 4), y) ||
      !ParseInt(std::string_view(text).substr(5, 2), mo) ||
      !ParseInt(std::string_view(text).substr(8, 2), d) ||
      !ParseInt(std::string_view(text).substr(11, 2), h) ||
      !ParseInt(std::string_view(text).substr(14, 2), mi) ||
      (text.size() == 19 && !ParseInt(std::string_view(text).substr(17, 2), s))) {
    throw DataError("unparseable timestamp '" + text + "'");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) {
    throw DataError("invalid timestamp '" + text + "'");
  }
  const auto days_since_epoch = sys_days{ymd}.time_since_epoch().count();
  return static_cast<Timestamp>(days_since_epoch) * 86400 + h * 3600 + mi * 60 + s;
}

std::string FormatTimestamp(Timestamp t) {
  using namespace std::chrono;
  const auto days = static_cast<int>(std::floor(static_cast<double>(t) / 86400.0));
  const Timestamp rem = t - static_cast<Timestamp>(days) * 86400;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02d:%02d:%02d",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                static_cast<int>((rem / 60) % 60), static_cast<int>(rem % 60));
  return buf;
}

std::vector<LoadSeries> LoadSeriesCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const char delim = line.find(';') != std::string::npos ? ';' : ',';
  const std::vector<std::string> header = SplitFields(line, delim);
  if (header.size() < 2) {
    throw DataError(path + ": header needs a timestamp column and client columns");
  }
  std::vector<LoadSeries> series(header.size() - 1);
  for (std::size_t c = 0; c < series.size(); ++c) {
    series[c].client_id = header[c + 1];
  }
  std::size_t line_no = 1;
  Timestamp previous = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (Trim(line).empty()) continue;
    const std::vector<std::string> fields = SplitFields(line, delim);
    const std::string where = path + " line " + std::to_string(line_no);
    if (fields.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    Timestamp t = 0;
    try {
      t = ParseTimestamp(fields[0]);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!first) {
      if (t == previous) {
        throw DataError(where + ": duplicate timestamp " + fields[0]);
      }
      if (t < previous) {
        throw DataError(where + ": timestamp " + fields[0] + " is out of order");
      }
      if (t - previous != kSecondsPerHour) {
        throw DataError(where + ": gap before " + fields[0] +
                        " (series must be hourly)");
      }
    }
    first = false;
    previous = t;
    for (std::size_t c = 1; c < fields.size(); ++c) {
      std::string text = fields[c];
      if (delim == ';') std::replace(text.begin(), text.end(), ',', '.');
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw DataError(where + ": column '" + header[c] + "' holds '" +
                        fields[c] + "', not a number");
      }
      series[c - 1].timestamps.push_back(t);
      series[c - 1].values.push_back(v);
    }
  }
  return series;
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void WriteSeriesCsv(const std::string& path, std::span<const LoadSeries> series) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "timestamp";
  for (const auto& s : series) out << ',' << s.client_id;
  out << '\n';
  const std::size_t n = series.empty() ? 0 : series[0].values.size();
  for (std::size_t t = 0; t < n; ++t) {
    out << FormatTimestamp(series[0].timestamps[t]);
    for (const auto& s : series) out << ',' << FormatDouble(s.values[t]);
    out << '\n';
  }
}

void Normalize(LoadSeries& series) {
  const auto& v = series.values;
  if (v.empty()) throw DataError("series '" + series.client_id + "' is empty");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double sd = std::sqrt(var);
  if (!(sd > 0.0)) {
    throw DataError("series '" + series.client_id + "' has zero variance");
  }
  for (double& x : series.values) x = (x - mean) / sd;
  series.stats = {mean, sd};
  series.normalized = true;
}

std::vector<double> Denormalize(std::span<const double> values,
                                const NormStats& stats) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = values[i] * stats.stddev + stats.mean;
  }
  return out;
}

std::vector<Neighborhood> AgglomerativeCluster(
    std::span<const std::vector<double>> series, std::size_t k) {
  const std::size_t n = series.size();
  if (k == 0 || n < k) {
    throw ConfigError("clustering needs at least k=" + std::to_string(k) +
                      " series, got " + std::to_string(n));
  }
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (const auto& s : series) len = std::min(len, s.size());

  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < len; ++t) {
        const double d = series[i][t] - series[j][t];
        acc += d * d;
      }
      dist[i][j] = dist[j][i] = std::sqrt(acc);
    }
  }
  // Cluster slots are keyed by their smallest member; `alive` stays sorted.
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  std::vector<std::size_t> alive(n);
  for (std::size_t i = 0; i < n; ++i) alive[i] = i;

  while (alive.size() > k) {
    std::size_t best_a = 0, best_b = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < alive.size(); ++a) {
      for (std::size_t b = a + 1; b < alive.size(); ++b) {
        const double d = dist[alive[a]][alive[b]];
        if (d < best) {
          best = d;
          best_a = a;
          best_b = b;
        }
      }
    }
    const std::size_t ca = alive[best_a];
    const std::size_t cb = alive[best_b];
    const double na = static_cast<double>(members[ca].size());
    const double nb = static_cast<double>(members[cb].size());
    for (std::size_t other : alive) {
      if (other == ca || other == cb) continue;
      const double d = (na * dist[ca][other] + nb * dist[cb][other]) / (na + nb);
      dist[ca][other] = dist[other][ca] = d;
    }
    members[ca].insert(members[ca].end(), members[cb].begin(), members[cb].end());
    std::sort(members[ca].begin(), members[ca].end());
    members[cb].clear();
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(best_b));
  }
  std::vector<Neighborhood> out;
  for (std::size_t g = 0; g < alive.size(); ++g) {
    out.push_back({g, members[alive[g]]});
  }
  return out;
}

std::array<double, 4> TimeFeatures(Timestamp t) {
  using namespace std::chrono;
  const auto day_count = static_cast<int>(std::floor(static_cast<double>(t) / 86400.0));
  const sys_days sd{days{day_count}};
  const year_month_day ymd{sd};
  const unsigned wd = weekday{sd}.iso_encoding() - 1;  // Monday = 0
  const Timestamp secs = t - static_cast<Timestamp>(day_count) * 86400;
  const double hour = static_cast<double>(secs / 3600);
  return {(static_cast<unsigned>(ymd.month()) - 1) / 11.0 - 0.5,
          (static_cast<unsigned>(ymd.day()) - 1) / 30.0 - 0.5,
          wd / 6.0 - 0.5, hour / 23.0 - 0.5};
}

std::vector<TimeSeriesWindow> MakeWindows(const LoadSeries& series,
                                          const ModelConfig& c,
                                          std::size_t stride) {
  if (stride == 0) throw ConfigError("window stride must be positive");
  if (c.series_dim != 1 || c.time_dim != 4) {
    throw ConfigError("windows are univariate with 4 time features");
  }
  const std::size_t n = series.values.size();
  const std::size_t l = c.input_length, o = c.horizon, half = l / 2;
  std::vector<TimeSeriesWindow> out;
  if (n < l + o) {
    std::cerr << "warning: series '" << series.client_id << "' has " << n
              << " points, fewer than L + O = " << l + o << "; no windows\n";
    return out;
  }
  std::vector<std::array<double, 4>> feats(n);
  for (std::size_t t = 0; t < n; ++t) feats[t] = TimeFeatures(series.timestamps[t]);
  for (std::size_t j = 0; j + l + o <= n; j += stride) {
    TimeSeriesWindow w;
    w.start = j;
    w.x.assign(series.values.begin() + j, series.values.begin() + j + l);
    w.target.assign(series.values.begin() + j + l,
                    series.values.begin() + j + l + o);
    for (std::size_t t = j; t < j + l; ++t) {
      w.x_mark.insert(w.x_mark.end(), feats[t].begin(), feats[t].end());
    }
    for (std::size_t t = j + half; t < j + l + o; ++t) {
      w.y_mark.insert(w.y_mark.end(), feats[t].begin(), feats[t].end());
    }
    out.push_back(std::move(w));
  }
  return out;
}

SplitCounts SplitSizes(std::size_t n) {
  SplitCounts s;
  s.train = 7 * n / 10;
  s.val = std::min((n + 5) / 10, n - s.train);
  s.test = n - s.train - s.val;
  return s;
}

WindowSplit SplitTrainValTest(std::vector<TimeSeriesWindow> windows) {
  const SplitCounts s = SplitSizes(windows.size());
  WindowSplit out;
  auto it = std::make_move_iterator(windows.begin());
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(s.train));
  it += static_cast<std::ptrdiff_t>(s.train);
  out.val.assign(it, it + static_cast<std::ptrdiff_t>(s.val));
  it += static_cast<std::ptrdiff_t>(s.val);
  out.test.assign(it, std::make_move_iterator(windows.end()));
  return out;
}

ModelBatch StackWindows(std::span<const TimeSeriesWindow> windows,
                        std::span<const std::size_t> indices,
                        const ModelConfig& c) {
  const std::size_t b = indices.size();
  const std::size_t l = c.input_length, ld = c.decoder_length();
  std::vector<double> x, xm, ym, y;
  x.reserve(b * l * c.series_dim);
  for (std::size_t i : indices) {
    const TimeSeriesWindow& w = windows[i];
    if (w.x.size() != l * c.series_dim || w.x_mark.size() != l * c.time_dim ||
        w.y_mark.size() != ld * c.time_dim ||
        w.target.size() != c.horizon * c.series_dim) {
      throw DimensionError("window does not match the model configuration");
    }
    x.insert(x.end(), w.x.begin(), w.x.end());
    xm.insert(xm.end(), w.x_mark.begin(), w.x_mark.end());
    ym.insert(ym.end(), w.y_mark.begin(), w.y_mark.end());
    y.insert(y.end(), w.target.begin(), w.target.end());
  }
  ModelBatch out;
  out.input.x = Tensor({b, l, c.series_dim}, std::move(x));
  out.input.x_mark = Tensor({b, l, c.time_dim}, std::move(xm));
  out.input.y_mark = Tensor({b, ld, c.time_dim}, std::move(ym));
  out.target = Tensor({b, c.horizon, c.series_dim}, std::move(y));
  return out;
}

ModelBatch StackWindows(std::span<const TimeSeriesWindow> windows,
                        const ModelConfig& c) {
  std::vector<std::size_t> all(windows.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return StackWindows(windows, all, c);
}

Metrics ComputeMetrics(std::span<const double> y_true,
                       std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw DimensionError("metrics: " + std::to_string(y_true.size()) +
                         " targets vs " + std::to_string(y_pred.size()) +
                         " predictions");
  }
  if (y_true.empty()) throw DataError("metrics: no values");
  const double n = static_cast<double>(y_true.size());
  double mean = 0.0;
  for (double v : y_true) mean += v;
  mean /= n;
  double abs_sum = 0.0, sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double e = y_true[i] - y_pred[i];
    abs_sum += std::abs(e);
    sse += e * e;
    sst += (y_true[i] - mean) * (y_true[i] - mean);
  }
  if (!(sst > 0.0)) throw NumericError("metrics: R^2 undefined for constant targets");
  return {abs_sum / n, sse / n, 1.0 - sse / sst};
}

std::vector<LoadSeries> GenerateSynthetic(const SynthSpec& spec) {
  if (spec.clients == 0 || spec.days == 0) {
    throw ConfigError("synth: clients and days must be positive");
  }
  if (spec.profile == SynthProfile::kClusterSeparable && spec.groups == 0) {
    throw ConfigError("synth: groups must be positive");
  }
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const std::size_t n = spec.days * 24;
  std::vector<double> group_phase(std::max<std::size_t>(spec.groups, 1));
  {
    Rng rng(DeriveSeed(spec.seed, "synth.groups"));
    for (double& p : group_phase) p = Uniform(rng, 0.0, kTwoPi);
  }
  std::vector<LoadSeries> out(spec.clients);
  for (std::size_t c = 0; c < spec.clients; ++c) {
    Rng rng(DeriveSeed(spec.seed, "synth.client", {c}));
    LoadSeries& s = out[c];
    char id[32];
    std::snprintf(id, sizeof(id), "MT_%03zu", c + 1);
    s.client_id = id;
    const double base = Uniform(rng, 1.5, 3.0);
    const double daily_amp = Uniform(rng, 0.5, 1.0);
    const double weekly_amp = spec.weekly_amplitude * Uniform(rng, 0.5, 1.0);
    double daily_phase = Uniform(rng, 0.0, kTwoPi);
    double weekly_phase = Uniform(rng, 0.0, kTwoPi);
    double harmonic = 1.0;
    if (spec.profile == SynthProfile::kClusterSeparable) {
      const std::size_t g = c % spec.groups;
      harmonic = static_cast<double>(g + 1);
      daily_phase = group_phase[g];
      weekly_phase = group_phase[g];
    }
    s.timestamps.resize(n);
    s.values.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      s.timestamps[t] = spec.start + static_cast<Timestamp>(t) * kSecondsPerHour;
      const double day_pos = static_cast<double>(t % 24) / 24.0;
      const double week_pos = static_cast<double>(t % 168) / 168.0;
      double v = base + daily_amp * std::sin(kTwoPi * harmonic * day_pos + daily_phase) +
                 weekly_amp * std::sin(kTwoPi * week_pos + weekly_phase);
      if (spec.noise > 0.0) v += SampleGaussian(rng, spec.noise);
      s.values[t] = v;
    }
  }
  return out;
}

SynthProfile ParseSynthProfile(const std::string& name) {
  if (name == "sinusoid-mix") return SynthProfile::kSinusoidMix;
  if (name == "cluster-separable") return SynthProfile::kClusterSeparable;
  throw ConfigError("unknown synth profile '" + name +
                    "' (expected sinusoid-mix or cluster-separable)");
}

std::string SynthProfileName(SynthProfile profile) {
  return profile == SynthProfile::kSinusoidMix ? "sinusoid-mix"
                                               : "cluster-separable";
}

}  // namespace splitfed
