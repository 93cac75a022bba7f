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

#ifndef SPLITFED_GRADCHECK_H_
#define SPLITFED_GRADCHECK_H_

#include <cstddef>
#include <functional>

#include "splitfed/tensor.h"

namespace splitfed {

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h for every element of x.
// f receives a fresh leaf each call.
Tensor FiniteDifferenceGradient(const std::function<double(const Tensor&)>& f,
                                const Tensor& x, double h);

// Single-coordinate variant that perturbs `leaf` in place and restores it.
// Handy when the parameter lives inside a larger structure.
double FiniteDifferenceAt(const std::function<double()>& f, Tensor& leaf,
                          std::size_t index, double h);

// |a - b| / max(|a|, |b|, floor)
double RelativeError(double a, double b, double floor = 1e-8);

}  // namespace splitfed

#endif  // SPLITFED_GRADCHECK_H_
