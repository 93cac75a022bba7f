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

#include "splitfed/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "splitfed/errors.h"

namespace splitfed {

Tensor FiniteDifferenceGradient(const std::function<double(const Tensor&)>& f,
                                const Tensor& x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  NoGradGuard no_grad;
  std::vector<double> base(x.data().begin(), x.data().end());
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<double> plus = base;
    std::vector<double> minus = base;
    plus[i] += h;
    minus[i] -= h;
    const double fp = f(Tensor(x.shape(), std::move(plus)));
    const double fm = f(Tensor(x.shape(), std::move(minus)));
    out[i] = (fp - fm) / (2.0 * h);
  }
  return Tensor(x.shape(), std::move(out));
}

double FiniteDifferenceAt(const std::function<double()>& f, Tensor& leaf,
                          std::size_t index, double h) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  NoGradGuard no_grad;
  auto values = leaf.mutable_data();
  const double saved = values[index];
  values[index] = saved + h;
  const double fp = f();
  values[index] = saved - h;
  const double fm = f();
  values[index] = saved;
  return (fp - fm) / (2.0 * h);
}

double RelativeError(double a, double b, double floor) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

}  // namespace splitfed
