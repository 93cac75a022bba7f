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

#ifndef SPLITFED_SPECTRAL_H_
#define SPLITFED_SPECTRAL_H_

#include <cstddef>
#include <span>

#include "splitfed/tensor.h"

namespace splitfed {

// Direct-summation DFT over axis 1 of x[B x N x C]; a rank-1 x[N] is
// treated as [1 x N x 1] and the result keeps rank 1.
//   X[k] = sum_n x[n] exp(-2 pi i k n / N)
ComplexTensor Dft(const Tensor& x);

// Inverse of Dft. Fails with NumericError when the reconstructed sequence
// has an imaginary residual above 1e-6 (the spectrum was not Hermitian).
Tensor Idft(const ComplexTensor& spectrum);

// Dft restricted to the listed bins: result is [B x modes.size() x C].
ComplexTensor ModeDft(const Tensor& x, std::span<const std::size_t> modes);

// Places kept[:, m, :] at bin modes[m] and its conjugate at N - modes[m],
// leaves every other bin zero, and inverts. Modes must lie in [0, N/2].
Tensor ModeIdft(const ComplexTensor& kept, std::span<const std::size_t> modes,
                std::size_t length);

// Per-mode channel mixing with a complex kernel split into heads.
// kept[B x M x H*E], kernel[H x E x E x M]:
//   out[b, m, h*E + o] = sum_i kept[b, m, h*E + i] * kernel[h, i, o, m]
ComplexTensor ModeMix(const ComplexTensor& kept, const ComplexTensor& kernel);

// Complex batched product built from real BatchMatMul calls.
ComplexTensor ComplexBatchMatMul(const ComplexTensor& a, const ComplexTensor& b,
                                 bool transpose_b = false);

// tanh applied separately to the real and imaginary parts.
ComplexTensor SplitTanh(const ComplexTensor& z);

// Throws ConfigError unless modes are strictly increasing and <= N/2.
void ValidateModes(std::span<const std::size_t> modes, std::size_t length);

}  // namespace splitfed

#endif  // SPLITFED_SPECTRAL_H_
