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

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmwcas/errors.hpp"
#include "pmwcas/layout.hpp"
#include "pmwcas/memory.hpp"

namespace pmwcas {

/**
 * Fully observable heap: every 8-byte cell has a cache value and a durable
 * value, and every 64-byte line a dirty bit. Stores touch only the cache
 * view; the durable view changes only through PersistBytes, EvictLine and
 * Crash. Invariant: a clean line has cache == durable for all its cells.
 *
 * Cell accesses use atomic_ref, so benchmark-style concurrent use is safe
 * per cell. The model checker drives it from a single thread.
 */
class SimulatedHeap : public HeapBase<SimulatedHeap> {
 public:
  explicit SimulatedHeap(HeapLayout layout, Algorithm algorithm = Algorithm::kNoDirtyFlags)
      : HeapBase{layout, algorithm},
        cache_(layout.TotalBytes() / 8, 0),
        durable_(layout.TotalBytes() / 8, 0),
        dirty_(RoundUp(layout.TotalBytes(), kCacheLineSize) / kCacheLineSize, 0) {}

  SimulatedHeap(const SimulatedHeap& other)
      : HeapBase{other},
        cache_{other.cache_},
        durable_{other.durable_},
        dirty_{other.dirty_},
        line_flushes_{other.line_flushes_} {}
  SimulatedHeap& operator=(const SimulatedHeap&) = delete;
  SimulatedHeap(SimulatedHeap&&) noexcept = default;
  SimulatedHeap& operator=(SimulatedHeap&&) noexcept = default;

  // Raw cell access used by HeapBase.

  std::uint64_t LoadCell(std::uint64_t offset) {
    return std::atomic_ref<std::uint64_t>{cache_[CellIndex(offset)]}.load(std::memory_order_acquire);
  }

  void StoreCell(std::uint64_t offset, std::uint64_t value) {
    std::atomic_ref<std::uint64_t>{cache_[CellIndex(offset)]}.store(value, std::memory_order_release);
    MarkDirty(HeapLayout::LineOf(offset));
  }

  std::uint64_t CasCell(std::uint64_t offset, std::uint64_t expected, std::uint64_t desired) {
    std::uint64_t observed = expected;
    if (std::atomic_ref<std::uint64_t>{cache_[CellIndex(offset)]}.compare_exchange_strong(observed, desired)) {
      MarkDirty(HeapLayout::LineOf(offset));
    }
    return observed;
  }

  void PersistBytes(std::uint64_t offset, std::uint64_t bytes) {
    const std::uint64_t first = HeapLayout::LineOf(offset);
    const std::uint64_t last = HeapLayout::LineOf(offset + bytes - 1);
    for (std::uint64_t line = first; line <= last; ++line) {
      WriteBack(line);
      std::atomic_ref<std::uint64_t>{line_flushes_}.fetch_add(1, std::memory_order_relaxed);
    }
  }

  // Observation.

  std::uint64_t CacheCell(std::uint64_t offset) const { return cache_[CellIndex(offset)]; }
  std::uint64_t DurableCell(std::uint64_t offset) const { return durable_[CellIndex(offset)]; }
  TaggedWord CacheWord(WordAddress addr) const { return TaggedWord::FromRaw(CacheCell(layout().WordOffset(addr))); }
  TaggedWord DurableWord(WordAddress addr) const {
    return TaggedWord::FromRaw(DurableCell(layout().WordOffset(addr)));
  }

  std::uint64_t line_count() const { return dirty_.size(); }
  bool IsLineDirty(std::uint64_t line) const { return dirty_.at(line) != 0; }
  std::vector<std::uint64_t> DirtyLines() const {
    std::vector<std::uint64_t> lines;
    for (std::uint64_t i = 0; i < dirty_.size(); ++i) {
      if (dirty_[i]) lines.push_back(i);
    }
    return lines;
  }
  /// Dirty lines whose write-back would actually change the durable view.
  std::vector<std::uint64_t> DivergentLines() const {
    std::vector<std::uint64_t> lines;
    for (std::uint64_t line : DirtyLines()) {
      if (LineDiverges(line)) lines.push_back(line);
    }
    return lines;
  }

  std::uint64_t line_flushes() const { return line_flushes_; }

  /// Uncontrolled write-back by the cache hierarchy. Not counted as a flush.
  void EvictLine(std::uint64_t line) {
    if (line >= dirty_.size()) throw AddressError("line " + std::to_string(line) + " out of range");
    WriteBack(line);
  }

  /**
   * Power failure: lines in `eviction_subset` reach the durable view first,
   * then all cache contents are lost and the cache is refilled from durable
   * memory. Every listed line must currently be dirty.
   */
  void Crash(std::span<const std::uint64_t> eviction_subset) {
    for (std::uint64_t line : eviction_subset) {
      if (line >= dirty_.size() || !dirty_[line]) {
        throw ContractViolation("eviction subset contains clean line " + std::to_string(line));
      }
      WriteBack(line);
    }
    cache_ = durable_;
    std::fill(dirty_.begin(), dirty_.end(), 0);
  }

  std::span<const std::uint64_t> cache_cells() const { return cache_; }
  std::span<const std::uint64_t> durable_cells() const { return durable_; }
  std::span<const std::uint8_t> dirty_bits() const { return dirty_; }

  /// FNV-1a over the durable view; used to assert it only moves at flushes.
  std::uint64_t DurableChecksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint64_t v : durable_) {
      h ^= v;
      h *= 1099511628211ull;
    }
    return h;
  }

 private:
  std::size_t CellIndex(std::uint64_t offset) const {
    if (offset % 8 != 0 || offset / 8 >= cache_.size()) {
      throw AddressError("cell offset " + std::to_string(offset) + " out of range");
    }
    return offset / 8;
  }

  void MarkDirty(std::uint64_t line) { std::atomic_ref<std::uint8_t>{dirty_[line]}.store(1, std::memory_order_release); }

  bool LineDiverges(std::uint64_t line) const {
    const std::size_t first = line * kCacheLineSize / 8;
    const std::size_t last = std::min(first + kCacheLineSize / 8, cache_.size());
    for (std::size_t i = first; i < last; ++i) {
      if (cache_[i] != durable_[i]) return true;
    }
    return false;
  }

  void WriteBack(std::uint64_t line) {
    std::atomic_ref<std::uint8_t>{dirty_[line]}.store(0, std::memory_order_release);
    const std::size_t first = line * kCacheLineSize / 8;
    const std::size_t last = std::min(first + kCacheLineSize / 8, cache_.size());
    for (std::size_t i = first; i < last; ++i) {
      const auto v = std::atomic_ref<std::uint64_t>{cache_[i]}.load(std::memory_order_acquire);
      std::atomic_ref<std::uint64_t>{durable_[i]}.store(v, std::memory_order_release);
    }
  }

  std::vector<std::uint64_t> cache_;
  std::vector<std::uint64_t> durable_;
  std::vector<std::uint8_t> dirty_;
  std::uint64_t line_flushes_{0};
};

}  // namespace pmwcas
