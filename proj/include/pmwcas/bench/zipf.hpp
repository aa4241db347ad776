/*
 * Copyright 2026 The pmwcas Authors
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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "pmwcas/errors.hpp"

namespace pmwcas::bench {

/**
 * Zipf distribution over ranks 1..n: Pr(rank k) = k^-alpha / H(n, alpha)
 * with H(n, alpha) = sum_{m=1..n} m^-alpha. Sampling inverts a
 * precomputed CDF table.
 */
class ZipfSampler {
 public:
  ZipfSampler(std::uint64_t n, double alpha) : alpha_{alpha} {
    if (n == 0) throw ContractViolation("Zipf sampler needs at least one rank");
    if (!(alpha >= 0) || !std::isfinite(alpha)) throw ContractViolation("Zipf alpha must be a finite value >= 0");
    cdf_.resize(n);
    double sum = 0;
    for (std::uint64_t m = 1; m <= n; ++m) {
      sum += std::pow(static_cast<double>(m), -alpha);
      cdf_[m - 1] = sum;
    }
    normalization_ = sum;
    for (double& c : cdf_) c /= sum;
    cdf_.back() = 1.0;
  }

  std::uint64_t size() const { return cdf_.size(); }
  double alpha() const { return alpha_; }
  double normalization() const { return normalization_; }

  double Probability(std::uint64_t rank) const {
    if (rank == 0 || rank > size()) return 0;
    return std::pow(static_cast<double>(rank), -alpha_) / normalization_;
  }

  /// Smallest rank r (1-based) with CDF(r) > u, for u in [0, 1).
  std::uint64_t SampleRank(double u) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) return size();
    return static_cast<std::uint64_t>(it - cdf_.begin()) + 1;
  }

  template <class Rng>
  std::uint64_t Sample(Rng& rng) const {
    double u = std::generate_canonical<double, 53>(rng);
    if (u >= 1.0) u = std::nextafter(1.0, 0.0);
    return SampleRank(u);
  }

 private:
  double alpha_;
  double normalization_{0};
  std::vector<double> cdf_;
};

/// Fixed seeded bijection from ranks (1-based) to word indices, scattering hot ranks over the heap.
class RankPermutation {
 public:
  RankPermutation(std::uint64_t n, std::uint64_t seed) : words_(n) {
    std::iota(words_.begin(), words_.end(), std::uint64_t{0});
    std::mt19937_64 rng{seed};
    // Fisher-Yates with an explicit draw so the mapping does not depend on the standard library.
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t j = rng() % i;
      std::swap(words_[i - 1], words_[j]);
    }
  }

  std::uint64_t WordOf(std::uint64_t rank) const { return words_.at(rank - 1); }
  std::uint64_t size() const { return words_.size(); }

 private:
  std::vector<std::uint64_t> words_;
};

}  // namespace pmwcas::bench
