// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace popcast {

// Seeded generator with portable conversions. The mt19937_64 bit stream is
// fixed by the standard; the std distributions are not, so the conversions to
// reals, bounded integers and normals live here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n); n must be positive.
  std::size_t below(std::size_t n);

  /// Standard normal via Box-Muller; one value per call.
  double normal();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with a tag into an independent child seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

}  // namespace popcast
