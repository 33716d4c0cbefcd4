// include/sidoa/random.hpp

// Copyright 2026  sidoa authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sidoa {

using Rng = std::mt19937_64;

// Independent substream keyed by a base seed and any number of indices
// (trial, frame, pair...). Same keys, same stream.
inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {}) {
  std::seed_seq::result_type words[16];
  std::size_t n = 0;
  words[n++] = static_cast<std::uint32_t>(seed);
  words[n++] = static_cast<std::uint32_t>(seed >> 32);
  for (std::uint64_t k : keys) {
    if (n + 2 > 16) break;
    words[n++] = static_cast<std::uint32_t>(k);
    words[n++] = static_cast<std::uint32_t>(k >> 32);
  }
  std::seed_seq seq(words, words + n);
  return Rng(seq);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline bool coin(Rng& rng, double p_true = 0.5) {
  return std::bernoulli_distribution(p_true)(rng);
}

}  // namespace sidoa
