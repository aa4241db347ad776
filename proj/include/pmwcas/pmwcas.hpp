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
#include <span>

#include "pmwcas/backoff.hpp"
#include "pmwcas/descriptor.hpp"
#include "pmwcas/errors.hpp"
#include "pmwcas/memory.hpp"
#include "pmwcas/stats.hpp"
#include "pmwcas/tagged_word.hpp"

namespace pmwcas {

struct ReadOptions {
  /// Number of back-off rounds before giving up; 0 waits forever.
  std::uint64_t max_waits{0};
};

/**
 * Returns the payload at `addr`, waiting while a PMwCAS (or PCAS) holds it:
 * a descriptor or a dirty-flagged word is never returned.
 */
template <PersistentMemory Memory, StatsSink Stats = NullStats>
TaggedWord ReadWord(Memory& memory, WordAddress addr, ReadOptions options = {}, Stats&& stats = {}) {
  Backoff backoff{memory.backoff_policy()};
  for (std::uint64_t waits = 0;; ++waits) {
    const TaggedWord word = memory.Load(addr);
    if (word.IsPayload()) return word;
    if (options.max_waits != 0 && waits >= options.max_waits) {
      throw TimeoutError("read of word " + std::to_string(addr.index) + " still busy after " +
                         std::to_string(waits) + " waits");
    }
    stats.OnRetry();
    backoff.Pause();
  }
}

namespace detail {

/**
 * Test-and-test-and-set: wait until the word holds a payload, then CAS
 * `expected` -> `replacement`. Repeats while the CAS observes a busy word.
 * Returns the payload the CAS observed; it succeeded iff that is `expected`.
 */
template <PersistentMemory Memory, StatsSink Stats>
TaggedWord CasWhenIdle(Memory& memory, WordAddress addr, TaggedWord expected, TaggedWord replacement,
                       Stats& stats) {
  Backoff backoff{memory.backoff_policy()};
  while (true) {
    if (!memory.Load(addr).IsPayload()) {
      stats.OnRetry();
      backoff.Pause();
      continue;
    }
    const TaggedWord observed = memory.Cas(addr, expected, replacement);
    stats.OnCas();
    if (observed.IsPayload()) return observed;
    stats.OnRetry();
    backoff.Pause();
  }
}

}  // namespace detail

/**
 * Persistent multi-word CAS over the targets of `desc`, with or without
 * dirty flags (`algorithm` must be kDirtyFlags or kNoDirtyFlags).
 *
 * Reservation embeds the slot's descriptor word into each target in array
 * order, waiting while a target is busy and stopping at the first payload
 * mismatch. If every target is reserved they are persisted and the durable
 * state flips to Succeeded, the linearization point. Finalization then
 * replaces each reserved target with desired (commit) or expected (abort)
 * and persists it; the dirty-flag variant first stores and persists the
 * flagged value. Completed is written but left volatile.
 *
 * Returns true iff the operation committed. On return no durable word
 * refers to the slot, so the caller may reuse it.
 */
template <PersistentMemory Memory, StatsSink Stats = NullStats>
bool ExecutePmwcas(Memory& memory, const Descriptor& desc, Algorithm algorithm, Stats&& stats = {}) {
  if (algorithm == Algorithm::kPcas) throw ContractViolation("PCAS is a single-word operation; use Pcas()");
  const bool dirty_flags = algorithm == Algorithm::kDirtyFlags;
  const auto targets = desc.targets();
  const DescriptorSlot slot = desc.slot();
  ValidateTargets(targets, memory.layout().max_targets);
  const TaggedWord desc_word = memory.layout().DescriptorWord(slot);
  SlotGuard guard{memory, slot};

  memory.InitDescriptor(slot, targets);
  memory.PersistDescriptor(slot);
  stats.OnDescriptorPersist();

  bool success = true;
  std::size_t reserved = 0;
  for (const auto& t : targets) {
    if (detail::CasWhenIdle(memory, t.address, t.expected, desc_word, stats) != t.expected) {
      success = false;
      break;
    }
    ++reserved;
  }

  if (success) {
    for (const auto& t : targets) {
      memory.Persist(t.address);
      stats.OnFlush();
    }
    memory.StoreState(slot, DescriptorState::kSucceeded);
    memory.PersistDescriptor(slot);
    stats.OnDescriptorPersist();
  }

  // Reservation is in array order, so exactly the first `reserved` targets hold the descriptor.
  for (std::size_t i = 0; i < reserved; ++i) {
    const auto& t = targets[i];
    const TaggedWord word = success ? t.desired : t.expected;
    if (dirty_flags) {
      memory.Store(t.address, word.WithDirtyFlag());
      stats.OnDirtyStore();
      memory.Persist(t.address);
      stats.OnFlush();
    }
    memory.Store(t.address, word);
    stats.OnCas();
    memory.Persist(t.address);
    stats.OnFlush();
  }
  memory.StoreState(slot, DescriptorState::kCompleted);
  return success;
}

/**
 * Single-word persistent CAS with a dirty flag: swap in the flagged
 * desired value, persist it once, then clear the flag with a plain store.
 * Readers wait out the flagged window via ReadWord.
 */
template <PersistentMemory Memory, StatsSink Stats = NullStats>
bool Pcas(Memory& memory, WordAddress addr, TaggedWord expected, TaggedWord desired, Stats&& stats = {}) {
  if (!expected.IsPayload() || !desired.IsPayload()) {
    throw ContractViolation("PCAS values must be plain payloads (tag 00)");
  }
  if (detail::CasWhenIdle(memory, addr, expected, desired.WithDirtyFlag(), stats) != expected) return false;
  memory.Persist(addr);
  stats.OnFlush();
  memory.Store(addr, desired);
  stats.OnCas();
  return true;
}

}  // namespace pmwcas
