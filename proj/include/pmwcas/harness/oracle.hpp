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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pmwcas/descriptor.hpp"
#include "pmwcas/errors.hpp"
#include "pmwcas/harness/hashing.hpp"

namespace pmwcas::harness {

/// What the live run says about an operation's effect.
enum class Constraint : std::uint8_t {
  kMustApply,     ///< Returned true.
  kMustNotApply,  ///< Returned false.
  kMayApply,      ///< Still in flight at the crash.
};

struct OracleOp {
  std::vector<TargetEntry> targets;
  Constraint constraint{Constraint::kMayApply};
};

/**
 * Durable atomicity question: is there an order of a subset of `ops`,
 * applied one at a time to `initial` with multi-word CAS semantics (an
 * op applies only if every target holds its expected value), that ends
 * exactly at `final`? The subset must contain every must-apply op and no
 * must-not-apply op, and must respect real-time order: `precedes` pairs
 * (a, b) mean a returned before b was invoked.
 */
struct OracleProblem {
  std::vector<std::uint64_t> initial;
  std::vector<std::uint64_t> final;
  std::vector<OracleOp> ops;
  std::vector<std::pair<std::size_t, std::size_t>> precedes;
};

inline constexpr std::size_t kMaxOracleOps = 12;

/**
 * Returns an applying order (op indices) witnessing durable atomicity, or
 * nullopt if none exists. Throws HarnessError when more than `max_ops`
 * ops could apply, since the search is exponential in that number.
 */
inline std::optional<std::vector<std::size_t>> FindWitness(const OracleProblem& p,
                                                           std::size_t max_ops = kMaxOracleOps) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < p.ops.size(); ++i) {
    if (p.ops[i].constraint != Constraint::kMustNotApply) candidates.push_back(i);
  }
  if (candidates.size() > max_ops || candidates.size() > 63) {
    throw HarnessError("oracle instance too large: " + std::to_string(candidates.size()) +
                       " operations may have applied (limit " + std::to_string(max_ops) + ")");
  }
  if (p.initial.size() != p.final.size()) throw HarnessError("oracle images differ in size");
  for (const auto& op : p.ops) {
    for (const auto& t : op.targets) {
      if (t.address.index >= p.initial.size()) throw HarnessError("oracle op targets a word outside the image");
    }
  }

  // need[c]: candidate positions that must already be applied before candidate c.
  std::vector<std::uint64_t> need(candidates.size(), 0);
  std::uint64_t must_mask = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (p.ops[candidates[c]].constraint == Constraint::kMustApply) must_mask |= std::uint64_t{1} << c;
    for (const auto& [a, b] : p.precedes) {
      if (b != candidates[c]) continue;
      for (std::size_t c2 = 0; c2 < candidates.size(); ++c2) {
        if (candidates[c2] == a && p.ops[a].constraint == Constraint::kMustApply) need[c] |= std::uint64_t{1} << c2;
      }
    }
  }

  std::unordered_set<Hash128, Hash128Hasher> dead;
  std::vector<std::uint64_t> words = p.initial;
  std::vector<std::size_t> order;

  const auto key = [&](std::uint64_t mask) {
    StateHasher h;
    h.Add(mask).Add(std::span<const std::uint64_t>{words});
    return h.Finish();
  };

  auto search = [&](auto& self, std::uint64_t mask) -> bool {
    if ((mask & must_mask) == must_mask && words == p.final) return true;
    const Hash128 k = key(mask);
    if (dead.contains(k)) return false;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const std::uint64_t bit = std::uint64_t{1} << c;
      if ((mask & bit) || (need[c] & ~mask)) continue;
      const auto& targets = p.ops[candidates[c]].targets;
      bool matches = true;
      for (const auto& t : targets) matches = matches && words[t.address.index] == t.expected.raw();
      if (!matches) continue;
      for (const auto& t : targets) words[t.address.index] = t.desired.raw();
      order.push_back(candidates[c]);
      if (self(self, mask | bit)) return true;
      order.pop_back();
      for (const auto& t : targets) words[t.address.index] = t.expected.raw();
    }
    dead.insert(k);
    return false;
  };

  if (search(search, 0)) return order;
  return std::nullopt;
}

}  // namespace pmwcas::harness
