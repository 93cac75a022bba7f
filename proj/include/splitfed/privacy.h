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

#ifndef SPLITFED_PRIVACY_H_
#define SPLITFED_PRIVACY_H_

#include <optional>

#include "splitfed/fedformer.h"
#include "splitfed/random.h"
#include "splitfed/tensor.h"

namespace splitfed {

// delta == 0 selects the Laplace mechanism, delta in (0, 1) the Gaussian.
struct PrivacyBudget {
  bool enabled = false;
  double epsilon = 1.0;
  double delta = 0.0;
  // Skips per-batch estimation when set.
  std::optional<double> fixed_sensitivity;

  void Validate() const;
};

// Largest Euclidean distance between two flattened rows of acts[B x ...].
// Needs B >= 2.
double BatchSensitivity(const Tensor& acts);

// Variance of the Gaussian mechanism: (2 s^2 / eps^2) ln(2 / delta).
double GaussianNoiseVariance(double epsilon, double delta, double s);

// acts + i.i.d. Laplace(s / epsilon). The noise enters the tape as a
// constant, so gradients flow to `acts` unchanged.
Tensor LaplaceMechanism(const Tensor& acts, double epsilon, double s, Rng& rng);

// acts + i.i.d. N(0, GaussianNoiseVariance(epsilon, delta, s)).
Tensor GaussianMechanism(const Tensor& acts, double epsilon, double delta,
                         double s, Rng& rng);

// Noises enc_out then dec_seasonal, each with its own sensitivity;
// dec_trend passes through. Disabled budgets return the input untouched.
SplitOneActivations ProtectActivations(const SplitOneActivations& acts,
                                       const PrivacyBudget& budget, Rng& rng);

}  // namespace splitfed

#endif  // SPLITFED_PRIVACY_H_
