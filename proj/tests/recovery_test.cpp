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

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <vector>

#include "pmwcas/atomic_heap.hpp"
#include "pmwcas/errors.hpp"
#include "pmwcas/pmwcas.hpp"
#include "pmwcas/recovery.hpp"
#include "pmwcas/simulated_heap.hpp"

namespace pmwcas {
namespace {

struct PowerCut {};

// Forwards to a heap and throws PowerCut before event number `limit`.
class CutAfter {
 public:
  CutAfter(SimulatedHeap& heap, std::size_t limit) : heap_{heap}, limit_{limit} {}

  const HeapLayout& layout() const { return heap_.layout(); }
  BackoffPolicy backoff_policy() const { return heap_.backoff_policy(); }
  TaggedWord Load(WordAddress a) { return Tick(), heap_.Load(a); }
  void Store(WordAddress a, TaggedWord w) { Tick(), heap_.Store(a, w); }
  TaggedWord Cas(WordAddress a, TaggedWord e, TaggedWord d) { return Tick(), heap_.Cas(a, e, d); }
  void Persist(WordAddress a) { Tick(), heap_.Persist(a); }
  void InitDescriptor(DescriptorSlot s, std::span<const TargetEntry> t) { Tick(), heap_.InitDescriptor(s, t); }
  void StoreState(DescriptorSlot s, DescriptorState st) { Tick(), heap_.StoreState(s, st); }
  void PersistDescriptor(DescriptorSlot s) { Tick(), heap_.PersistDescriptor(s); }
  DescriptorImage ReadDescriptor(DescriptorSlot s) { return heap_.ReadDescriptor(s); }
  bool TryAcquireSlot(DescriptorSlot s) { return heap_.TryAcquireSlot(s); }
  void ReleaseSlot(DescriptorSlot s) { heap_.ReleaseSlot(s); }

  std::size_t events() const { return events_; }

 private:
  void Tick() {
    if (events_ == limit_) throw PowerCut{};
    ++events_;
  }

  SimulatedHeap& heap_;
  std::size_t limit_;
  std::size_t events_{0};
};

HeapLayout Layout(std::uint32_t block = 64) {
  HeapLayout l;
  l.word_capacity = 8;
  l.block_size = block;
  l.worker_slots = 2;
  l.max_targets = 4;
  return l;
}

SimulatedHeap Seeded(Algorithm alg, std::uint32_t block = 64) {
  SimulatedHeap heap{Layout(block), alg};
  for (std::uint64_t i = 0; i < 8; ++i) {
    heap.Store(WordAddress{i}, TaggedWord::FromPayload(10 + i));
    heap.Persist(WordAddress{i});
  }
  return heap;
}

Descriptor Increment(const std::vector<std::uint64_t>& words) {
  Descriptor desc{0};
  for (auto w : words) {
    desc.AddTarget(WordAddress{w}, TaggedWord::FromPayload(10 + w), TaggedWord::FromPayload(11 + w));
  }
  return desc;
}

// Every crash point of a single operation, under every eviction subset of
// the divergent lines, recovers to all-old or all-new.
TEST(Recovery, EveryCrashPointIsAtomic) {
  const std::vector<std::uint64_t> words{1, 4, 6};
  for (Algorithm alg : {Algorithm::kNoDirtyFlags, Algorithm::kDirtyFlags}) {
    for (std::size_t cut = 0;; ++cut) {
      SimulatedHeap heap = Seeded(alg);
      CutAfter mem{heap, cut};
      bool finished = false;
      try {
        ExecutePmwcas(mem, Increment(words), alg);
        finished = true;
      } catch (const PowerCut&) {
      }
      const auto lines = heap.DivergentLines();
      ASSERT_LE(lines.size(), 12u);
      for (std::uint64_t mask = 0; mask < (1ull << lines.size()); ++mask) {
        std::vector<std::uint64_t> subset;
        for (std::size_t i = 0; i < lines.size(); ++i) {
          if (mask >> i & 1) subset.push_back(lines[i]);
        }
        SimulatedHeap crashed{heap};
        crashed.Crash(subset);
        // Committed once the Succeeded state reached durable memory, by a persist or an eviction.
        const bool committed = finished || crashed.ReadDescriptor(0).state() == DescriptorState::kSucceeded;
        Recover(crashed);
        for (std::uint64_t w = 0; w < 8; ++w) {
          const bool target = std::find(words.begin(), words.end(), w) != words.end();
          const std::uint64_t want = 10 + w + (target && committed ? 1 : 0);
          ASSERT_EQ(crashed.DurableWord(WordAddress{w}), TaggedWord::FromPayload(want))
              << ToString(alg) << " cut " << cut << " mask " << mask << " word " << w;
        }
        ASSERT_TRUE(CheckRecoveryIdempotent(crashed));
      }
      if (finished) break;
    }
  }
}

TEST(Recovery, ReportCountsRollDirections) {
  SimulatedHeap heap = Seeded(Algorithm::kNoDirtyFlags);
  const HeapLayout& l = heap.layout();
  const std::vector<TargetEntry> fwd{{WordAddress{0}, TaggedWord::FromPayload(10), TaggedWord::FromPayload(99)}};
  const std::vector<TargetEntry> back{{WordAddress{3}, TaggedWord::FromPayload(13), TaggedWord::FromPayload(98)}};
  heap.InitDescriptor(0, fwd);
  heap.StoreState(0, DescriptorState::kSucceeded);
  heap.PersistDescriptor(0);
  heap.InitDescriptor(1, back);
  heap.PersistDescriptor(1);
  heap.Store(WordAddress{0}, l.DescriptorWord(0));
  heap.Store(WordAddress{3}, l.DescriptorWord(1));
  heap.Persist(WordAddress{0});
  heap.Persist(WordAddress{3});
  heap.Crash({});
  const RecoveryReport r = Recover(heap);
  EXPECT_EQ(r.rolled_forward, 1u);
  EXPECT_EQ(r.rolled_back, 1u);
  EXPECT_EQ(r.descriptors_scanned, 2u);
  EXPECT_EQ(r.words_touched.size(), 2u);
  EXPECT_EQ(heap.DurableWord(WordAddress{0}).payload(), 99u);
  EXPECT_EQ(heap.DurableWord(WordAddress{3}).payload(), 13u);
  EXPECT_EQ(heap.ReadDescriptor(0).state(), DescriptorState::kCompleted);
  EXPECT_EQ(heap.ReadDescriptor(1).state(), DescriptorState::kCompleted);
}

TEST(Recovery, ClearsDirtyFlagsOnlyForFlaggedVariants) {
  for (Algorithm alg : {Algorithm::kDirtyFlags, Algorithm::kPcas}) {
    SimulatedHeap heap = Seeded(alg);
    heap.Store(WordAddress{2}, TaggedWord::FromPayload(5).WithDirtyFlag());
    heap.Persist(WordAddress{2});
    heap.Crash({});
    EXPECT_EQ(Recover(heap).dirty_flags_cleared, 1u);
    EXPECT_EQ(heap.DurableWord(WordAddress{2}), TaggedWord::FromPayload(5));
  }
}

TEST(Recovery, IgnoresTornUnreferencedDescriptor) {
  SimulatedHeap heap = Seeded(Algorithm::kNoDirtyFlags);
  const std::uint64_t base = heap.layout().SlotOffset(1);
  heap.StoreCell(base, 77);
  heap.StoreCell(base + 8, 1000);
  heap.PersistBytes(base, 16);
  heap.Crash({});
  const RecoveryReport r = Recover(heap);
  EXPECT_TRUE(r.words_touched.empty());
  EXPECT_EQ(heap.ReadDescriptor(1).state(), DescriptorState::kCompleted);
}

TEST(Recovery, RejectsInconsistentImages) {
  {
    // Referenced but Completed: the descriptor was retired while still in use.
    SimulatedHeap heap = Seeded(Algorithm::kNoDirtyFlags);
    const std::vector<TargetEntry> t{{WordAddress{0}, TaggedWord::FromPayload(10), TaggedWord::FromPayload(11)}};
    heap.InitDescriptor(0, t);
    heap.StoreState(0, DescriptorState::kCompleted);
    heap.PersistDescriptor(0);
    heap.Store(WordAddress{0}, heap.layout().DescriptorWord(0));
    heap.Persist(WordAddress{0});
    EXPECT_THROW(Recover(heap), RecoveryError);
  }
  {
    // Referenced slot does not list the word.
    SimulatedHeap heap = Seeded(Algorithm::kNoDirtyFlags);
    const std::vector<TargetEntry> t{{WordAddress{1}, TaggedWord::FromPayload(11), TaggedWord::FromPayload(12)}};
    heap.InitDescriptor(0, t);
    heap.PersistDescriptor(0);
    heap.Store(WordAddress{0}, heap.layout().DescriptorWord(0));
    EXPECT_THROW(Recover(heap), RecoveryError);
  }
  {
    // Descriptor-tagged word that names no slot.
    SimulatedHeap heap = Seeded(Algorithm::kNoDirtyFlags);
    heap.Store(WordAddress{0}, TaggedWord::FromRaw(8 | 0b10));
    EXPECT_THROW(Recover(heap), RecoveryError);
  }
  {
    // Referenced slot with a torn count.
    SimulatedHeap heap = Seeded(Algorithm::kNoDirtyFlags);
    heap.StoreCell(heap.layout().SlotOffset(0) + 8, 0);
    heap.Store(WordAddress{0}, heap.layout().DescriptorWord(0));
    EXPECT_THROW(Recover(heap), RecoveryError);
  }
}

TEST(Recovery, OpenHeapRecoversUncleanFile) {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / ("pmwcas_recovery_" + std::to_string(::getpid()));
  fs::remove(path);
  {
    AtomicHeap heap = AtomicHeap::CreateFile(path, Layout(), Algorithm::kNoDirtyFlags);
    const std::vector<TargetEntry> t{{WordAddress{2}, TaggedWord::FromPayload(0), TaggedWord::FromPayload(5)}};
    heap.InitDescriptor(0, t);
    heap.StoreState(0, DescriptorState::kSucceeded);
    heap.PersistDescriptor(0);
    heap.Store(WordAddress{2}, heap.layout().DescriptorWord(0));
    heap.Persist(WordAddress{2});
    heap.Abandon();
  }
  {
    OpenedHeap opened = OpenHeap(path);
    ASSERT_TRUE(opened.recovery.has_value());
    EXPECT_EQ(opened.recovery->rolled_forward, 1u);
    EXPECT_EQ(opened.heap.Load(WordAddress{2}).payload(), 5u);
  }
  {
    OpenedHeap opened = OpenHeap(path);
    EXPECT_FALSE(opened.recovery.has_value());
  }
  fs::remove(path);
}

TEST(Recovery, RandomDurableImagesAreIdempotent) {
  std::mt19937_64 rng{7};
  for (int trial = 0; trial < 200; ++trial) {
    const Algorithm alg = static_cast<Algorithm>(rng() % 2);
    SimulatedHeap heap = Seeded(alg, 8);
    const std::size_t cut = rng() % 30;
    CutAfter mem{heap, cut};
    try {
      ExecutePmwcas(mem, Increment({0, 1, 2, 3}), alg);
    } catch (const PowerCut&) {
    }
    std::vector<std::uint64_t> subset;
    for (auto line : heap.DivergentLines()) {
      if (rng() % 2) subset.push_back(line);
    }
    heap.Crash(subset);
    Recover(heap);
    for (std::uint64_t w = 0; w < 8; ++w) ASSERT_TRUE(heap.DurableWord(WordAddress{w}).IsPayload());
    ASSERT_TRUE(CheckRecoveryIdempotent(heap));
  }
}

}  // namespace
}  // namespace pmwcas
