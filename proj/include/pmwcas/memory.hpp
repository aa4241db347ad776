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
#include <atomic>
#include <concepts>
#include <cstdint>
#include <memory>
#include <span>

#include "pmwcas/backoff.hpp"
#include "pmwcas/descriptor.hpp"
#include "pmwcas/layout.hpp"
#include "pmwcas/tagged_word.hpp"

namespace pmwcas {

/**
 * What the PMwCAS algorithms need from memory. Heaps implement it
 * directly; adapters (event recording, the virtual scheduler) wrap a heap
 * and forward, so the algorithm code is shared by every execution mode.
 *
 * Load/Store/Cas act on the cache view. Persist and PersistDescriptor make
 * the containing cache lines durable and fence. Cas returns the value it
 * observed; it succeeded iff that equals `expected`.
 */
template <class M>
concept PersistentMemory = requires(M& m, const M& cm, WordAddress a, TaggedWord w, DescriptorSlot s,
                                    std::span<const TargetEntry> t, DescriptorState st) {
  { cm.layout() } -> std::convertible_to<const HeapLayout&>;
  { cm.backoff_policy() } -> std::same_as<BackoffPolicy>;
  { m.Load(a) } -> std::same_as<TaggedWord>;
  { m.Store(a, w) };
  { m.Cas(a, w, w) } -> std::same_as<TaggedWord>;
  { m.Persist(a) };
  { m.InitDescriptor(s, t) };
  { m.StoreState(s, st) };
  { m.PersistDescriptor(s) };
  { m.ReadDescriptor(s) } -> std::same_as<DescriptorImage>;
  { m.TryAcquireSlot(s) } -> std::same_as<bool>;
  { m.ReleaseSlot(s) };
};

/// Volatile per-slot ownership flags; never part of the persistent image.
class SlotOwnership {
 public:
  explicit SlotOwnership(std::uint32_t slots) : flags_{std::make_unique<std::atomic<bool>[]>(slots)}, size_{slots} {}

  bool TryAcquire(DescriptorSlot slot) {
    Check(slot);
    return !flags_[slot].exchange(true, std::memory_order_acquire);
  }
  void Release(DescriptorSlot slot) {
    Check(slot);
    flags_[slot].store(false, std::memory_order_release);
  }

 private:
  void Check(DescriptorSlot slot) const {
    if (slot >= size_) throw AddressError("descriptor slot " + std::to_string(slot) + " out of range");
  }

  std::unique_ptr<std::atomic<bool>[]> flags_;
  std::uint32_t size_;
};

/**
 * Word- and descriptor-level operations expressed over a derived heap's
 * raw 8-byte cells:
 *
 *   std::uint64_t LoadCell(std::uint64_t offset);
 *   void StoreCell(std::uint64_t offset, std::uint64_t value);
 *   std::uint64_t CasCell(std::uint64_t offset, std::uint64_t expected, std::uint64_t desired);
 *   void PersistBytes(std::uint64_t offset, std::uint64_t bytes);
 */
template <class Derived>
class HeapBase {
 public:
  const HeapLayout& layout() const { return layout_; }
  Algorithm algorithm() const { return algorithm_; }

  BackoffPolicy backoff_policy() const { return backoff_; }
  void set_backoff_policy(BackoffPolicy p) { backoff_ = p; }

  TaggedWord Load(WordAddress addr) { return TaggedWord::FromRaw(self().LoadCell(layout_.WordOffset(addr))); }

  void Store(WordAddress addr, TaggedWord value) { self().StoreCell(layout_.WordOffset(addr), value.raw()); }

  TaggedWord Cas(WordAddress addr, TaggedWord expected, TaggedWord desired) {
    return TaggedWord::FromRaw(self().CasCell(layout_.WordOffset(addr), expected.raw(), desired.raw()));
  }

  void Persist(WordAddress addr) { self().PersistBytes(layout_.WordOffset(addr), sizeof(std::uint64_t)); }

  /// Writes count and targets, then state <- Failed. Not durable until PersistDescriptor.
  void InitDescriptor(DescriptorSlot slot, std::span<const TargetEntry> targets) {
    ValidateTargets(targets, layout_.max_targets);
    const std::uint64_t base = layout_.SlotOffset(slot);
    self().StoreCell(base + 8, targets.size());
    std::uint64_t pos = base + HeapLayout::kDescriptorHeaderBytes;
    for (const auto& t : targets) {
      self().StoreCell(pos, t.address.index);
      self().StoreCell(pos + 8, t.expected.raw());
      self().StoreCell(pos + 16, t.desired.raw());
      pos += HeapLayout::kTargetEntryBytes;
    }
    self().StoreCell(base, static_cast<std::uint64_t>(DescriptorState::kFailed));
  }

  void StoreState(DescriptorSlot slot, DescriptorState state) {
    self().StoreCell(layout_.SlotOffset(slot), static_cast<std::uint64_t>(state));
  }

  /// Persists every line holding the slot's state, count and live targets.
  void PersistDescriptor(DescriptorSlot slot) {
    const std::uint64_t base = layout_.SlotOffset(slot);
    const std::uint64_t count = std::min<std::uint64_t>(self().LoadCell(base + 8), layout_.max_targets);
    self().PersistBytes(base, HeapLayout::DescriptorBytes(count));
  }

  DescriptorImage ReadDescriptor(DescriptorSlot slot) {
    const std::uint64_t base = layout_.SlotOffset(slot);
    DescriptorImage image;
    image.raw_state = self().LoadCell(base);
    image.count = self().LoadCell(base + 8);
    const std::uint64_t readable = std::min<std::uint64_t>(image.count, layout_.max_targets);
    std::uint64_t pos = base + HeapLayout::kDescriptorHeaderBytes;
    for (std::uint64_t i = 0; i < readable; ++i, pos += HeapLayout::kTargetEntryBytes) {
      image.targets.push_back(TargetEntry{WordAddress{self().LoadCell(pos)},
                                          TaggedWord::FromRaw(self().LoadCell(pos + 8)),
                                          TaggedWord::FromRaw(self().LoadCell(pos + 16))});
    }
    return image;
  }

  bool TryAcquireSlot(DescriptorSlot slot) { return slots_->TryAcquire(slot); }
  void ReleaseSlot(DescriptorSlot slot) { slots_->Release(slot); }

 protected:
  HeapBase(HeapLayout layout, Algorithm algorithm)
      : layout_{layout}, algorithm_{algorithm}, slots_{std::make_unique<SlotOwnership>(layout.worker_slots)} {
    layout_.Validate();
  }

  HeapBase(const HeapBase& other)
      : layout_{other.layout_},
        algorithm_{other.algorithm_},
        backoff_{other.backoff_},
        slots_{std::make_unique<SlotOwnership>(other.layout_.worker_slots)} {}
  HeapBase& operator=(const HeapBase&) = delete;
  HeapBase(HeapBase&&) noexcept = default;
  HeapBase& operator=(HeapBase&&) noexcept = default;
  ~HeapBase() = default;

 private:
  Derived& self() { return static_cast<Derived&>(*this); }

  HeapLayout layout_;
  Algorithm algorithm_;
  BackoffPolicy backoff_{};
  std::unique_ptr<SlotOwnership> slots_;
};

/// Acquires a descriptor slot for one operation; throws if another worker holds it.
template <PersistentMemory Memory>
class SlotGuard {
 public:
  SlotGuard(Memory& memory, DescriptorSlot slot) : memory_{memory}, slot_{slot} {
    if (!memory_.TryAcquireSlot(slot_)) {
      throw ContractViolation("descriptor slot " + std::to_string(slot_) + " is already in use");
    }
  }
  ~SlotGuard() { memory_.ReleaseSlot(slot_); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  Memory& memory_;
  DescriptorSlot slot_;
};

}  // namespace pmwcas
