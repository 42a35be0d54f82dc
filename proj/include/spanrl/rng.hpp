/*
 * Copyright (c) 2026, The spanrl Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "spanrl/policy.hpp"

namespace spanrl {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per (seed, step, purpose) so that, e.g., annotation
// noise never shifts the sampling stream.
inline Engine make_stream(std::uint64_t seed, std::uint64_t step, std::uint64_t purpose) {
  return Engine(splitmix64(splitmix64(splitmix64(seed) ^ step) ^ (purpose * 0x51ed27ULL)));
}

enum Stream : std::uint64_t {
  kStreamTask = 1,
  kStreamSample = 2,
  kStreamAnnotate = 3,
  kStreamLiftSet = 4,
  kStreamContext = 5,
};

// std::uniform_real_distribution is implementation-defined; this is not.
inline double uniform01(Engine& e) { return static_cast<double>(e() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(Engine& e, std::size_t n) {
  return static_cast<std::size_t>(uniform01(e) * static_cast<double>(n)) % n;
}

inline int sample_inverse_cdf(const Distribution& p, double u) {
  double c = 0.0;
  for (std::size_t v = 0; v + 1 < p.size(); ++v) {
    c += p[v];
    if (u < c) return static_cast<int>(v);
  }
  return static_cast<int>(p.size() - 1);
}

}  // namespace spanrl
