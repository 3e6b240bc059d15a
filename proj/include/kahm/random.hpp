/*
 * Copyright 2026 The kahm-encoder Authors
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
 *
 */

#pragma once

// Seeded generator used everywhere randomness enters the pipeline.
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++
// standard. Streams for independent work items (bootstrap replicates, laws)
// are seeded through std::seed_seq over (seed low word, seed high word,
// stream id), which is also a standard-specified algorithm. Uniform draws
// avoid the implementation-defined std:: distributions:
//   uniform01()      = (u64 >> 11) * 2^-53
//   uniform_index(n) = Lemire multiply-shift with rejection (unbiased)
// Normal draws go through std::normal_distribution and are therefore only
// reproducible within one standard library implementation.

#include <cstdint>
#include <random>

namespace kahm {

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double normal() { return normal_(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace kahm
