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

#ifndef SPLITFED_FEDFORMER_H_
#define SPLITFED_FEDFORMER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "splitfed/tensor.h"

namespace splitfed {

// Width of the token-embedding convolution.
inline constexpr std::size_t kEmbedKernelWidth = 3;

struct ModelConfig {
  std::size_t input_length = 48;  // L
  std::size_t horizon = 24;       // O
  std::size_t series_dim = 1;     // Z
  std::size_t time_dim = 4;       // U
  std::size_t model_dim = 32;     // D
  std::size_t ff_dim = 64;        // D_ff
  std::size_t modes = 8;          // M
  std::size_t heads = 1;
  std::size_t decomp_kernel = 25;
  std::uint64_t seed = 1;

  // L_d = L/2 + O
  std::size_t decoder_length() const { return input_length / 2 + horizon; }
  std::size_t head_dim() const { return model_dim / heads; }
  // Throws ConfigError naming the offending field.
  void Validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Query projection, complex mixing kernel [H x E x E x M] and the frozen
// frequency bins of one FEB.
struct FebParams {
  Tensor w;
  ComplexTensor kernel;
  std::vector<std::size_t> modes;
};

struct FeaParams {
  Tensor wq;
  Tensor wk;
  Tensor wv;
  std::vector<std::size_t> modes_q;   // bins of the decoder-length spectrum
  std::vector<std::size_t> modes_kv;  // bins of the encoder-length spectrum
};

struct FfnParams {
  Tensor w1;  // [D x D_ff]
  Tensor b1;  // [D_ff]
  Tensor w2;  // [D_ff x D]
  Tensor b2;  // [D]
};

struct SplitOneParams {
  Tensor embed_conv;  // [3 x Z x D], shared by encoder and decoder inputs
  Tensor embed_time_x;  // [U x D]
  Tensor embed_time_y;  // [U x D]
  FebParams enc_feb;
  FebParams dec_feb;
  Tensor trend_w1;  // [D x Z]

  // Trainable tensors in a fixed order, prefixed "split1.".
  std::vector<NamedTensor> Named() const;
  std::vector<Tensor> Parameters() const;
  // Deep copy with fresh leaves (requires_grad preserved).
  SplitOneParams Clone() const;
};

struct SplitTwoParams {
  FfnParams enc_ffn1;
  FebParams enc2_feb;
  FfnParams enc_ffn2;
  FeaParams dec_fea;
  FfnParams dec_ffn;
  Tensor trend_w2;  // [D x Z]
  Tensor trend_w3;  // [D x Z]
  Tensor proj;      // [D x Z]

  // Prefixed "split2.".
  std::vector<NamedTensor> Named() const;
  std::vector<Tensor> Parameters() const;
  SplitTwoParams Clone() const;
};

// Random init: uniform(-1/sqrt(fan_in), +) for real weights, uniform of
// half-width 1/(D*M) on both parts of every spectral kernel, biases zero.
// `zero` keeps the mode sets but sets every trainable value to 0.
SplitOneParams InitSplitOne(const ModelConfig& config, bool zero = false);
SplitTwoParams InitSplitTwo(const ModelConfig& config, bool zero = false);

// Trainable tensors plus the frozen mode sets (as "<block>.modes*" rank-1
// tensors) for shipping and checkpoints. Import checks every name and
// shape against `config` (LookupError / DimensionError) and returns fresh
// leaves that require gradients.
std::vector<NamedTensor> ExportSplitOne(const SplitOneParams& params);
std::vector<NamedTensor> ExportSplitTwo(const SplitTwoParams& params);
SplitOneParams ImportSplitOne(std::span<const NamedTensor> tensors,
                              const ModelConfig& config);
SplitTwoParams ImportSplitTwo(std::span<const NamedTensor> tensors,
                              const ModelConfig& config);

// Random strictly increasing bins from 1..length/2-1, seeded and frozen.
std::vector<std::size_t> SelectModes(std::size_t length, std::size_t count,
                                     std::uint64_t seed);

struct SplitOneActivations {
  Tensor enc_out;       // [B x L x D]
  Tensor dec_seasonal;  // [B x L_d x D]
  Tensor dec_trend;     // [B x L_d x Z]
};

// One batch of model inputs.
struct ModelInput {
  Tensor x;       // [B x L x Z]
  Tensor x_mark;  // [B x L x U]
  Tensor y_mark;  // [B x L_d x U]
};

struct Decomposition {
  Tensor seasonal;
  Tensor trend;
};

Decomposition SeriesDecomp(const Tensor& x, std::size_t kernel);

struct Embedding {
  Tensor x_emb;      // [B x L x D]
  Tensor s_emb;      // [B x L_d x D]
  Tensor trend_ini;  // [B x L_d x Z]
};

Embedding DataEmbedding(const ModelInput& input, const SplitOneParams& params,
                        const ModelConfig& config);

Tensor FebForward(const Tensor& x, const FebParams& params);
Tensor FeaForward(const Tensor& x_en, const Tensor& x_de,
                  const FeaParams& params, std::size_t heads);
Tensor FfnForward(const Tensor& x, const FfnParams& params);

SplitOneActivations Split1Forward(const ModelInput& input,
                                  const SplitOneParams& params,
                                  const ModelConfig& config);
// Returns the forecast [B x O x Z].
Tensor Split2Forward(const SplitOneActivations& acts,
                     const SplitTwoParams& params, const ModelConfig& config);
// Both halves on one tape.
Tensor MonolithicForward(const ModelInput& input, const SplitOneParams& p1,
                         const SplitTwoParams& p2, const ModelConfig& config);

}  // namespace splitfed

#endif  // SPLITFED_FEDFORMER_H_
