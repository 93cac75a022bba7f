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

#include "splitfed/privacy.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "splitfed/errors.h"

namespace splitfed {
namespace {

void RequireEpsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError("dp.epsilon must be a positive finite number");
  }
}

void RequireSensitivity(double s) {
  if (!(s >= 0.0) || !std::isfinite(s)) {
    throw ConfigError("sensitivity must be a non-negative finite number");
  }
}

}  // namespace

void PrivacyBudget::Validate() const {
  if (!enabled) return;
  RequireEpsilon(epsilon);
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw ConfigError("dp.delta must lie in [0, 1)");
  }
  if (fixed_sensitivity) RequireSensitivity(*fixed_sensitivity);
}

double BatchSensitivity(const Tensor& acts) {
  if (acts.rank() == 0 || acts.dim(0) < 2) {
    throw ConfigError(
        "sensitivity is undefined for a batch of fewer than 2 rows; supply "
        "dp.sensitivity or disable DP");
  }
  const std::size_t b = acts.dim(0);
  const std::size_t row = acts.numel() / b;
  const double* v = acts.data().data();
  double worst = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < row; ++k) {
        const double d = v[i * row + k] - v[j * row + k];
        acc += d * d;
      }
      worst = std::max(worst, acc);
    }
  }
  return std::sqrt(worst);
}

double GaussianNoiseVariance(double epsilon, double delta, double s) {
  RequireEpsilon(epsilon);
  if (delta == 0.0) {
    throw ConfigError("delta = 0 requests pure DP; use the Laplace mechanism");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  return 2.0 * s * s / (epsilon * epsilon) * std::log(2.0 / delta);
}

Tensor LaplaceMechanism(const Tensor& acts, double epsilon, double s, Rng& rng) {
  RequireEpsilon(epsilon);
  RequireSensitivity(s);
  if (s == 0.0) return acts;
  std::vector<double> noise(acts.numel());
  const double scale = s / epsilon;
  for (double& n : noise) n = SampleLaplace(rng, scale);
  return AddConstant(acts, noise);
}

Tensor GaussianMechanism(const Tensor& acts, double epsilon, double delta,
                         double s, Rng& rng) {
  RequireSensitivity(s);
  const double sd = std::sqrt(GaussianNoiseVariance(epsilon, delta, s));
  if (s == 0.0) return acts;
  std::vector<double> noise(acts.numel());
  for (double& n : noise) n = SampleGaussian(rng, sd);
  return AddConstant(acts, noise);
}

SplitOneActivations ProtectActivations(const SplitOneActivations& acts,
                                       const PrivacyBudget& budget, Rng& rng) {
  if (!budget.enabled) return acts;
  budget.Validate();
  auto protect = [&](const Tensor& t) {
    const double s = budget.fixed_sensitivity ? *budget.fixed_sensitivity
                                              : BatchSensitivity(t);
    return budget.delta == 0.0
               ? LaplaceMechanism(t, budget.epsilon, s, rng)
               : GaussianMechanism(t, budget.epsilon, budget.delta, s, rng);
  };
  SplitOneActivations out;
  out.enc_out = protect(acts.enc_out);
  out.dec_seasonal = protect(acts.dec_seasonal);
  out.dec_trend = acts.dec_trend;
  return out;
}

}  // namespace splitfed
