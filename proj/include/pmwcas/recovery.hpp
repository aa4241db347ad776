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
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "pmwcas/atomic_heap.hpp"
#include "pmwcas/descriptor.hpp"
#include "pmwcas/errors.hpp"
#include "pmwcas/memory.hpp"
#include "pmwcas/simulated_heap.hpp"

namespace pmwcas {

struct RecoveryReport {
  std::uint64_t descriptors_scanned{0};
  std::uint64_t rolled_forward{0};
  std::uint64_t rolled_back{0};
  std::uint64_t dirty_flags_cleared{0};
  std::vector<WordAddress> words_touched;
};

namespace detail {

inline void ValidateForRecovery(const DescriptorImage& image, DescriptorSlot slot, const HeapLayout& layout) {
  const auto fail = [&](const std::string& why) {
    throw RecoveryError("descriptor slot " + std::to_string(slot) + " is malformed: " + why);
  };
  if (image.count == 0 || image.count > layout.max_targets) fail("count " + std::to_string(image.count));
  for (std::size_t i = 0; i < image.targets.size(); ++i) {
    const auto& t = image.targets[i];
    if (!layout.Contains(t.address)) fail("target address " + std::to_string(t.address.index) + " out of range");
    if (!t.expected.IsPayload() || !t.desired.IsPayload()) fail("tagged target value");
    for (std::size_t j = 0; j < i; ++j) {
      if (image.targets[j].address == t.address) fail("duplicate target " + std::to_string(t.address.index));
    }
  }
}

}  // namespace detail

/**
 * Brings the durable image back to a state with no descriptor or dirty
 * words, treating descriptors as write-ahead logs.
 *
 * A word that durably holds a slot's descriptor word is rolled forward to
 * that target's desired value if the slot's durable state is Succeeded and
 * rolled back to expected otherwise (an unreadable state means the crash
 * hit before the Failed state was persisted, i.e. before any embedding).
 * Dirty flags are then cleared on every data word (dirty-flag and PCAS
 * heaps), every modified word is persisted, and every slot is durably
 * marked Completed. Slots no word refers to are never interpreted, so a
 * torn, unreferenced descriptor is harmless.
 *
 * Runs single-threaded before any worker starts; reads only what the
 * memory returns after a crash, which is the durable view.
 */
template <PersistentMemory Memory>
RecoveryReport Recover(Memory& heap, Algorithm algorithm) {
  const HeapLayout& layout = heap.layout();
  RecoveryReport report;
  report.descriptors_scanned = layout.worker_slots;

  std::vector<std::vector<WordAddress>> references(layout.worker_slots);
  for (std::uint64_t i = 0; i < layout.word_capacity; ++i) {
    const WordAddress addr{i};
    const TaggedWord word = heap.Load(addr);
    if (!word.IsDescriptor()) continue;
    const auto slot = layout.SlotOf(word);
    if (!slot) {
      throw RecoveryError("word " + std::to_string(i) + " holds an invalid descriptor reference");
    }
    references[*slot].push_back(addr);
  }

  std::unordered_set<std::uint64_t> touched;
  const auto touch = [&](WordAddress addr) {
    if (touched.insert(addr.index).second) report.words_touched.push_back(addr);
  };

  for (DescriptorSlot slot = 0; slot < layout.worker_slots; ++slot) {
    if (references[slot].empty()) continue;
    const DescriptorImage image = heap.ReadDescriptor(slot);
    detail::ValidateForRecovery(image, slot, layout);
    const auto state = image.state();
    if (state == DescriptorState::kCompleted) {
      throw RecoveryError("descriptor slot " + std::to_string(slot) + " is Completed but still referenced by word " +
                          std::to_string(references[slot].front().index));
    }
    const bool roll_forward = state == DescriptorState::kSucceeded;
    for (const WordAddress addr : references[slot]) {
      const auto it = std::find_if(image.targets.begin(), image.targets.end(),
                                   [&](const TargetEntry& t) { return t.address == addr; });
      if (it == image.targets.end()) {
        throw RecoveryError("word " + std::to_string(addr.index) + " refers to descriptor slot " +
                            std::to_string(slot) + " which does not target it");
      }
      if (touched.contains(addr.index)) {
        throw RecoveryError("word " + std::to_string(addr.index) + " is claimed by more than one descriptor");
      }
      heap.Store(addr, roll_forward ? it->desired : it->expected);
      heap.Persist(addr);
      ++(roll_forward ? report.rolled_forward : report.rolled_back);
      touch(addr);
    }
  }

  if (algorithm != Algorithm::kNoDirtyFlags) {
    for (std::uint64_t i = 0; i < layout.word_capacity; ++i) {
      const WordAddress addr{i};
      const TaggedWord word = heap.Load(addr);
      if (!word.IsDirty()) continue;
      heap.Store(addr, word.WithoutFlags());
      heap.Persist(addr);
      ++report.dirty_flags_cleared;
      touch(addr);
    }
  }

  for (DescriptorSlot slot = 0; slot < layout.worker_slots; ++slot) {
    if (heap.ReadDescriptor(slot).state() == DescriptorState::kCompleted) continue;
    heap.StoreState(slot, DescriptorState::kCompleted);
    heap.PersistDescriptor(slot);
  }
  return report;
}

template <class Heap>
RecoveryReport Recover(Heap& heap) {
  return Recover(heap, heap.algorithm());
}

/// Durable bytes of a heap, for byte-for-byte comparisons.
inline std::vector<std::uint64_t> DurableImage(const SimulatedHeap& heap) {
  const auto cells = heap.durable_cells();
  return {cells.begin(), cells.end()};
}

inline std::vector<std::byte> DurableImage(const AtomicHeap& heap) { return heap.Snapshot(); }

/**
 * Runs recovery once more on an already recovered heap and reports whether
 * it was a no-op: no data word touched and the durable image unchanged.
 */
template <class Heap>
bool CheckRecoveryIdempotent(Heap& heap) {
  const auto before = DurableImage(heap);
  const RecoveryReport again = Recover(heap);
  return again.words_touched.empty() && DurableImage(heap) == before;
}

struct OpenedHeap {
  AtomicHeap heap;
  std::optional<RecoveryReport> recovery;  ///< Set when the file was not shut down cleanly.
};

/// Maps a heap file and recovers it if the clean-shutdown marker is absent.
inline OpenedHeap OpenHeap(const std::filesystem::path& path) {
  bool was_clean = false;
  OpenedHeap opened{AtomicHeap::OpenFile(path, &was_clean), std::nullopt};
  if (!was_clean) opened.recovery = Recover(opened.heap);
  return opened;
}

}  // namespace pmwcas
