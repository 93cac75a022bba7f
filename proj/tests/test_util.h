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

#ifndef SPLITFED_TESTS_TEST_UTIL_H_
#define SPLITFED_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "splitfed/gradcheck.h"
#include "splitfed/random.h"
#include "splitfed/tensor.h"

namespace splitfed::testing {

inline Tensor RandomTensor(Shape shape, std::uint64_t seed,
                           bool requires_grad = false, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(NumElements(shape));
  for (double& x : v) x = Uniform(rng, -scale, scale);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

inline double MaxAbsDiff(std::span<const double> a, std::span<const double> b) {
  EXPECT_EQ(a.size(), b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

inline double MaxAbsDiff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  return MaxAbsDiff(a.data(), b.data());
}

inline void ExpectAllZero(const Tensor& t) {
  for (double v : t.data()) EXPECT_EQ(v, 0.0);
}

// Tape gradient of f() against central differences for up to `points`
// coordinates of every leaf (all coordinates when the leaf is smaller).
inline void ExpectGradientsMatch(const std::function<Tensor()>& f,
                                 std::vector<Tensor> leaves, double rel_tol,
                                 std::size_t points = 10, double h = 1e-5,
                                 double floor = 1e-6) {
  for (Tensor& leaf : leaves) leaf.ZeroGrad();
  Backward(f());
  std::vector<std::vector<double>> tape(leaves.size());
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    if (leaves[l].has_grad()) {
      tape[l].assign(leaves[l].grad().begin(), leaves[l].grad().end());
    } else {
      tape[l].assign(leaves[l].numel(), 0.0);
    }
  }
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    const std::size_t n = leaves[l].numel();
    const std::size_t count = std::min(points, n);
    for (std::size_t p = 0; p < count; ++p) {
      const std::size_t i = count == n ? p : (p * 7919 + l * 104729) % n;
      const double fd =
          FiniteDifferenceAt([&] { return f().item(); }, leaves[l], i, h);
      EXPECT_LE(RelativeError(tape[l][i], fd, floor), rel_tol)
          << "leaf " << l << " element " << i << ": tape " << tape[l][i]
          << " vs fd " << fd;
    }
  }
}

}  // namespace splitfed::testing

#endif  // SPLITFED_TESTS_TEST_UTIL_H_
