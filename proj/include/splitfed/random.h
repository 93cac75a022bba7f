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

#ifndef SPLITFED_RANDOM_H_
#define SPLITFED_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace splitfed {

using Rng = std::mt19937_64;

// One SplitMix64 step; advances `state`.
std::uint64_t SplitMix64(std::uint64_t& state);

// Stable child seed for a named stream, e.g.
//   DeriveSeed(seed, "client-dp", {gs, client, epoch, batch}).
// Different tags or paths give unrelated streams; nothing depends on
// thread scheduling.
std::uint64_t DeriveSeed(std::uint64_t base, std::string_view tag,
                         std::initializer_list<std::uint64_t> path = {});

// Uniform on [lo, hi).
double Uniform(Rng& rng, double lo, double hi);
// Zero-mean Laplace with the given scale (density exp(-|x|/scale)/2scale).
double SampleLaplace(Rng& rng, double scale);
double SampleGaussian(Rng& rng, double stddev);

// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> Permutation(std::size_t n, Rng& rng);
// k distinct values from 0..n-1 in draw order.
std::vector<std::size_t> SampleWithoutReplacement(std::size_t n, std::size_t k,
                                                  Rng& rng);

}  // namespace splitfed

#endif  // SPLITFED_RANDOM_H_
