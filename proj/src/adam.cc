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

#include "splitfed/adam.h"

#include <cmath>
#include <string>

#include "splitfed/errors.h"

namespace splitfed {

AdamState::AdamState(std::span<const Tensor> params, AdamOptions options)
    : options_(options) {
  first_moment_.reserve(params.size());
  second_moment_.reserve(params.size());
  for (const Tensor& p : params) {
    first_moment_.emplace_back(p.numel(), 0.0);
    second_moment_.emplace_back(p.numel(), 0.0);
  }
}

void AdamStep(std::span<Tensor> params,
              std::span<const std::vector<double>> grads, AdamState& state,
              double lr) {
  if (params.size() != grads.size() || params.size() != state.size()) {
    throw DimensionError("adam: " + std::to_string(params.size()) +
                         " params, " + std::to_string(grads.size()) +
                         " grads, state for " + std::to_string(state.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = grads[i];
    if (!g.empty() && g.size() != params[i].numel()) {
      throw DimensionError("adam: gradient " + std::to_string(i) +
                           " has " + std::to_string(g.size()) +
                           " entries, parameter has " +
                           std::to_string(params[i].numel()));
    }
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!std::isfinite(g[j])) {
        throw NumericError("adam: non-finite gradient in parameter " +
                           std::to_string(i) + " at element " +
                           std::to_string(j));
      }
    }
  }
  const AdamOptions& o = state.options_;
  const std::uint64_t t = ++state.step_count_;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_data();
    auto& m = state.first_moment_[i];
    auto& v = state.second_moment_[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * gj;
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * gj * gj;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

void AdamStep(std::span<Tensor> params, AdamState& state, double lr) {
  std::vector<std::vector<double>> grads(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].has_grad()) {
      auto g = params[i].grad();
      grads[i].assign(g.begin(), g.end());
    }
  }
  AdamStep(params, grads, state, lr);
}

}  // namespace splitfed
