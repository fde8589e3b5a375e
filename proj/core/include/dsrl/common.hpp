// Copyright 2026 The dsrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dsrl {

/// Thrown when an operation receives arguments that violate its preconditions
/// (non-finite values, shape mismatches, invalid parameter ranges).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown by environments when a rollout cannot be completed. rl_iterate
/// resamples once before giving up.
class EnvFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a pipeline stage cannot continue (e.g. feature pruning left
/// an empty set). The message carries the diagnostic for the operator.
class PipelineAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// SplitMix64 step; used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic RNG. Sampling is pinned to explicit bit manipulation
/// (not std:: distributions) so that identical seeds reproduce identical
/// streams on any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : s_(seed) {
    // Warm up so that small seeds diverge immediately.
    for (int i = 0; i < 4; ++i) next();
  }

  std::uint64_t next() { return splitmix64(s_); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    // Modulo bias is negligible for n << 2^64.
    return next() % n;
  }

  /// Standard normal via Box-Muller (cached pair).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0x1.0p-60) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Independent substream keyed by `tag`; the parent stream is unchanged.
  Rng fork(std::uint64_t tag) const {
    std::uint64_t mixed = s_ ^ (0x9e3779b97f4a7c15ULL * (tag + 1));
    return Rng(splitmix64(mixed));
  }

 private:
  std::uint64_t s_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// FNV-1a over bytes; used for config/architecture hashes in manifests.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v);

/// Global worker count for parallel_for. Defaults to the hardware
/// concurrency; set to 1 for strictly serial execution. Results are
/// identical for any thread count: workers only ever write disjoint slots.
void set_num_threads(int n);
int num_threads();

/// Runs fn(i) for i in [0, n). fn must not touch shared mutable state other
/// than slot i of preallocated outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace dsrl
