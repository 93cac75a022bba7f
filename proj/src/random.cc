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

#include "splitfed/random.h"

#include <cmath>
#include <numbers>
#include <utility>

#include "splitfed/errors.h"

namespace splitfed {

std::uint64_t SplitMix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t DeriveSeed(std::uint64_t base, std::string_view tag,
                         std::initializer_list<std::uint64_t> path) {
  // FNV-1a over the tag, then fold each path element through SplitMix64.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  std::uint64_t state = base ^ h;
  std::uint64_t out = SplitMix64(state);
  for (std::uint64_t p : path) {
    state ^= p + 0x632BE59BD9B4E019ULL + (out << 6) + (out >> 2);
    out = SplitMix64(state);
  }
  return out;
}

// 53 random bits -> [0, 1). Written out so the stream does not depend on
// the standard library's distribution internals.
static double Canonical(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double Uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * Canonical(rng);
}

double SampleLaplace(Rng& rng, double scale) {
  // Inverse CDF on u in (-1/2, 1/2); u = -1/2 is nudged away from log(0).
  double u = Canonical(rng) - 0.5;
  if (u == -0.5) u = -0.5 + 0x1.0p-54;
  const double mag = -scale * std::log1p(-2.0 * std::abs(u));
  return u < 0.0 ? -mag : mag;
}

double SampleGaussian(Rng& rng, double stddev) {
  // Box-Muller, one value per call.
  double u1 = Canonical(rng);
  while (u1 == 0.0) u1 = Canonical(rng);
  const double u2 = Canonical(rng);
  return stddev * std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> Permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

std::vector<std::size_t> SampleWithoutReplacement(std::size_t n, std::size_t k,
                                                  Rng& rng) {
  if (k > n) {
    throw ConfigError("cannot draw " + std::to_string(k) + " of " +
                      std::to_string(n) + " without replacement");
  }
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace splitfed
