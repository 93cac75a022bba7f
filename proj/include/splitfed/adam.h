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

#ifndef SPLITFED_ADAM_H_
#define SPLITFED_ADAM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "splitfed/tensor.h"

namespace splitfed {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment buffers for one parameter list; buffers follow the list order.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::span<const Tensor> params, AdamOptions options = {});

  const AdamOptions& options() const { return options_; }
  std::uint64_t step_count() const { return step_count_; }
  std::size_t size() const { return first_moment_.size(); }
  const std::vector<double>& first_moment(std::size_t i) const {
    return first_moment_[i];
  }
  const std::vector<double>& second_moment(std::size_t i) const {
    return second_moment_[i];
  }

 private:
  friend void AdamStep(std::span<Tensor>, std::span<const std::vector<double>>,
                       AdamState&, double);

  AdamOptions options_;
  std::uint64_t step_count_ = 0;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
};

// One bias-corrected ADAM update. An empty gradient vector counts as zero.
// Every gradient is checked for NaN/Inf before anything is written, so a
// failed step leaves parameters and state untouched.
void AdamStep(std::span<Tensor> params,
              std::span<const std::vector<double>> grads, AdamState& state,
              double lr);

// Same, reading each parameter's accumulated grad().
void AdamStep(std::span<Tensor> params, AdamState& state, double lr);

}  // namespace splitfed

#endif  // SPLITFED_ADAM_H_
