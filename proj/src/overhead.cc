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

#include "splitfed/overhead.h"

#include <cmath>

#include "splitfed/errors.h"

namespace splitfed {

void OverheadParams::Validate() const {
  const double sizes[] = {clients,  batch,          fft_size,       model_dim,
                          ff_dim,   modes,          encoder_length, decoder_length,
                          horizon,  series_dim,     time_dim,       bytes_per_element,
                          paper_multiplier, backward_factor, gs_time_budget};
  for (double v : sizes) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("overhead parameters must be finite and non-negative");
    }
  }
  if (!(heads > 0.0)) throw ConfigError("overhead.heads must be positive");
  if (!(gs_speedup > 0.0)) throw ConfigError("overhead.gs_speedup must be positive");
  if (assumed_client_share &&
      !(*assumed_client_share >= 0.0 && *assumed_client_share < 1.0)) {
    throw ConfigError("overhead.assumed_client_share must lie in [0, 1)");
  }
}

double OpsClient(const OverheadParams& p) {
  const double l = p.encoder_length, m = p.modes, d = p.model_dim, n = p.fft_size;
  return (2.5 * l + 2.0 * m) * d * d + (5.0 * n + 1.5) * l * d;
}

double OpsSp(const OverheadParams& p) {
  const double l = p.encoder_length, m = p.modes, d = p.model_dim, n = p.fft_size;
  const double f = p.ff_dim;
  return (4.0 * f + 7.0 * n + 4.5) * l * d + (4.5 * l + m) * d * d + 2.0 * m * m * d +
         3.0 * l * d * f;
}

double SplitOneParameterCount(const OverheadParams& p) {
  const double d = p.model_dim, z = p.series_dim, u = p.time_dim, m = p.modes;
  const double e = d / p.heads;
  const double feb = d * d + 2.0 * p.heads * e * e * m;  // projection + complex kernel
  return 3.0 * z * d + 2.0 * u * d + 2.0 * feb + d * z;
}

CommReport Communication(const OverheadParams& p, CommMode mode) {
  const bool paper = mode == CommMode::kPaperArithmetic;
  const double bytes = p.bytes_per_element * (paper ? p.paper_multiplier : 1.0);
  const double trend_width = paper ? p.model_dim : p.series_dim;
  CommReport r;
  r.client_to_gs = p.batch *
                   (p.encoder_length * p.model_dim + p.decoder_length * p.model_dim +
                    p.decoder_length * trend_width) *
                   bytes;
  r.gs_to_sp = p.clients * r.client_to_gs;
  r.sp_to_gs = r.gs_to_sp;
  r.prediction = p.batch * p.horizon * p.series_dim * bytes;
  r.loss_grad = r.prediction;
  r.weight_transfer = SplitOneParameterCount(p) * bytes * p.clients;
  r.round_total = r.client_to_gs + r.gs_to_sp + r.sp_to_gs;
  r.full_total = r.round_total + p.clients * (2.0 * r.prediction + 2.0 * r.loss_grad);
  if (r.round_total > 0.0) {
    r.client_share_direct = r.client_to_gs / r.round_total;
    r.client_share_reference = r.client_to_gs / (r.round_total + r.client_to_gs);
  }
  return r;
}

OverheadReport AnalyzeOverhead(const OverheadParams& p) {
  p.Validate();
  OverheadReport r;
  r.ops_client = OpsClient(p);
  r.ops_sp = OpsSp(p);
  const double forward = r.ops_client + r.ops_sp;
  if (forward > 0.0) {
    r.forward_share = r.ops_client / forward;
    r.round_share = r.ops_client / (p.backward_factor * forward);
    r.round_share_provider_backward =
        r.ops_client / (r.ops_client + p.backward_factor * r.ops_sp);
  }
  r.comm_exact = Communication(p, CommMode::kShapeExact);
  r.comm_paper = Communication(p, CommMode::kPaperArithmetic);

  const double s = p.assumed_client_share.value_or(r.round_share);
  LatencyReport& lat = r.latency;
  lat.provider_seconds = p.gs_time_budget;
  lat.provider_only_round_seconds = p.gs_time_budget / (1.0 - s);
  lat.client_seconds = s * lat.provider_only_round_seconds * p.gs_speedup;
  lat.total_seconds = lat.provider_seconds + lat.client_seconds;
  if (lat.total_seconds > 0.0) lat.client_share = lat.client_seconds / lat.total_seconds;

  // Same hardware everywhere: energy follows operations.
  r.energy_client_share = r.round_share;
  r.energy_provider_share = 1.0 - r.round_share;
  return r;
}

std::vector<std::pair<std::string, double>> OverheadRows(const OverheadReport& r) {
  std::vector<std::pair<std::string, double>> rows = {
      {"ops_client", r.ops_client},
      {"ops_sp", r.ops_sp},
      {"forward_share", r.forward_share},
      {"round_share", r.round_share},
      {"round_share_provider_backward", r.round_share_provider_backward},
  };
  for (const auto& [prefix, c] :
       {std::pair<std::string, const CommReport*>{"comm_exact", &r.comm_exact},
        std::pair<std::string, const CommReport*>{"comm_paper", &r.comm_paper}}) {
    rows.emplace_back(prefix + ".client_to_gs_bytes", c->client_to_gs);
    rows.emplace_back(prefix + ".gs_to_sp_bytes", c->gs_to_sp);
    rows.emplace_back(prefix + ".sp_to_gs_bytes", c->sp_to_gs);
    rows.emplace_back(prefix + ".prediction_bytes", c->prediction);
    rows.emplace_back(prefix + ".loss_grad_bytes", c->loss_grad);
    rows.emplace_back(prefix + ".weight_transfer_bytes", c->weight_transfer);
    rows.emplace_back(prefix + ".round_total_bytes", c->round_total);
    rows.emplace_back(prefix + ".full_total_bytes", c->full_total);
    rows.emplace_back(prefix + ".client_share_direct", c->client_share_direct);
    rows.emplace_back(prefix + ".client_share_reference", c->client_share_reference);
  }
  rows.emplace_back("latency.provider_seconds", r.latency.provider_seconds);
  rows.emplace_back("latency.provider_only_round_seconds",
                    r.latency.provider_only_round_seconds);
  rows.emplace_back("latency.client_seconds", r.latency.client_seconds);
  rows.emplace_back("latency.total_seconds", r.latency.total_seconds);
  rows.emplace_back("latency.client_share", r.latency.client_share);
  rows.emplace_back("energy.client_share", r.energy_client_share);
  rows.emplace_back("energy.provider_share", r.energy_provider_share);
  return rows;
}

}  // namespace splitfed
