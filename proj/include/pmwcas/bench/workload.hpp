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
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pmwcas/bench/zipf.hpp"
#include "pmwcas/errors.hpp"
#include "pmwcas/tagged_word.hpp"

namespace pmwcas::bench {

/// Order of the targets inside one descriptor; each is a single global order, so waits cannot cycle.
enum class TargetOrder : std::uint8_t {
  kIndex,           ///< Ascending word index.
  kContendedFirst,  ///< Ascending Zipf rank: the hottest word is embedded first.
};

constexpr std::string_view ToString(TargetOrder o) {
  return o == TargetOrder::kIndex ? "index" : "contended-first";
}

inline TargetOrder ParseTargetOrder(std::string_view s) {
  if (s == "index") return TargetOrder::kIndex;
  if (s == "contended-first") return TargetOrder::kContendedFirst;
  throw ContractViolation("unknown target order '" + std::string(s) + "' (index, contended-first)");
}

struct DraftTarget {
  WordAddress address;
  std::uint64_t rank{0};
};

/**
 * Draws the target set of one increment operation: k distinct words, each
 * chosen by Zipf rank and mapped through the rank permutation; a rank
 * that repeats is redrawn. Expected and desired values are filled in at
 * execution time.
 */
class OpBuilder {
 public:
  OpBuilder(const ZipfSampler& sampler, const RankPermutation& permutation, std::uint32_t k, TargetOrder order)
      : sampler_{sampler}, permutation_{permutation}, k_{k}, order_{order} {
    if (k == 0 || k > sampler.size()) throw ContractViolation("need 1 <= k <= number of words");
    if (permutation.size() != sampler.size()) throw ContractViolation("permutation and sampler sizes differ");
  }

  template <class Rng>
  void Build(Rng& rng, std::vector<DraftTarget>& out) const {
    out.clear();
    while (out.size() < k_) {
      const std::uint64_t rank = sampler_.Sample(rng);
      const bool seen = std::any_of(out.begin(), out.end(), [&](const DraftTarget& t) { return t.rank == rank; });
      if (!seen) out.push_back({WordAddress{permutation_.WordOf(rank)}, rank});
    }
    if (order_ == TargetOrder::kIndex) {
      std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.address < b.address; });
    } else {
      std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
    }
  }

 private:
  const ZipfSampler& sampler_;
  const RankPermutation& permutation_;
  std::uint32_t k_;
  TargetOrder order_;
};

}  // namespace pmwcas::bench
