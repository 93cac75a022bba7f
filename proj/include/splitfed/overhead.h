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

#ifndef SPLITFED_OVERHEAD_H_
#define SPLITFED_OVERHEAD_H_

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace splitfed {

// Defaults are the reference deployment: 10 clients per GS, batch 1,
// FFT size 128, D = 512, D_ff = 2048, 64 modes, L_e = 96, L_d = 144, O = 96.
struct OverheadParams {
  double clients = 10;  // C
  double batch = 1;     // B
  double fft_size = 128;  // N
  double model_dim = 512;  // D
  double ff_dim = 2048;    // D_ff
  double modes = 64;       // M
  double encoder_length = 96;  // L_e
  double decoder_length = 144;  // L_d
  double horizon = 96;          // O
  double series_dim = 1;        // Z
  double time_dim = 4;          // U
  double heads = 8;
  double bytes_per_element = 4;
  // Element-size multiplier that brings the per-client payload to the
  // reference figure of about 6.3 MB.
  double paper_multiplier = 8;
  double backward_factor = 2.5;
  double gs_speedup = 5;       // GS-SP multiplies this much faster than a client
  double gs_time_budget = 10;  // seconds for the provider's share
  // Client share of a round used for latency; unset uses the computed one.
  std::optional<double> assumed_client_share = 0.05;

  void Validate() const;  // ConfigError unless sizes >= 0 and rates > 0
};

double OpsClient(const OverheadParams& p);
double OpsSp(const OverheadParams& p);
// Trainable Split-1 values shipped to each client per batch.
double SplitOneParameterCount(const OverheadParams& p);

struct CommReport {
  double client_to_gs = 0;  // per client
  double gs_to_sp = 0;
  double sp_to_gs = 0;
  double prediction = 0;  // per client, each way through the GS
  double loss_grad = 0;   // per client
  double weight_transfer = 0;  // all clients, per batch
  // client_to_gs + gs_to_sp + sp_to_gs
  double round_total = 0;
  // round_total plus every client's prediction and loss-gradient traffic
  double full_total = 0;
  double client_share_direct = 0;  // client_to_gs / round_total
  // client_to_gs / (round_total + client_to_gs), the reference reading
  double client_share_reference = 0;
};

enum class CommMode { kShapeExact, kPaperArithmetic };
// kShapeExact: the tensors this implementation ships (Z-wide trend) at
// bytes_per_element. kPaperArithmetic: a D-wide trend at
// bytes_per_element * paper_multiplier.
CommReport Communication(const OverheadParams& p, CommMode mode);

struct LatencyReport {
  double provider_seconds = 0;
  double provider_only_round_seconds = 0;  // whole round at provider speed
  double client_seconds = 0;
  double total_seconds = 0;
  double client_share = 0;
};

struct OverheadReport {
  double ops_client = 0;
  double ops_sp = 0;
  double forward_share = 0;  // ops_client / (ops_client + ops_sp)
  // Client does forward only; the round costs backward_factor times the
  // forward total.
  double round_share = 0;
  // ops_client / (ops_client + backward_factor * ops_sp)
  double round_share_provider_backward = 0;
  CommReport comm_exact;
  CommReport comm_paper;
  LatencyReport latency;
  double energy_client_share = 0;
  double energy_provider_share = 0;
};

OverheadReport AnalyzeOverhead(const OverheadParams& p);

// metric,value rows in a fixed order.
std::vector<std::pair<std::string, double>> OverheadRows(const OverheadReport& r);

}  // namespace splitfed

#endif  // SPLITFED_OVERHEAD_H_
