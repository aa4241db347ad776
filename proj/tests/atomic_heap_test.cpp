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
#include <thread>
#include <vector>

#include "pmwcas/atomic_heap.hpp"
#include "pmwcas/errors.hpp"

namespace pmwcas {
namespace {

namespace fs = std::filesystem;

HeapLayout Layout() {
  HeapLayout l;
  l.word_capacity = 64;
  l.block_size = 64;
  l.worker_slots = 4;
  l.max_targets = 4;
  return l;
}

class TempPath {
 public:
  TempPath() : path_{fs::temp_directory_path() / ("pmwcas_test_" + std::to_string(::getpid()) + "_" + Name())} {
    fs::remove(path_);
  }
  ~TempPath() { fs::remove(path_); }
  const fs::path& get() const { return path_; }

 private:
  static std::string Name() { return ::testing::UnitTest::GetInstance()->current_test_info()->name(); }
  fs::path path_;
};

TEST(AtomicHeap, VolatileBasics) {
  AtomicHeap heap = AtomicHeap::CreateVolatile(Layout(), Algorithm::kDirtyFlags);
  EXPECT_FALSE(heap.is_file_backed());
  EXPECT_EQ(heap.algorithm(), Algorithm::kDirtyFlags);
  heap.Store(WordAddress{3}, TaggedWord::FromPayload(11));
  EXPECT_EQ(heap.Load(WordAddress{3}).payload(), 11u);
  EXPECT_THROW(heap.Crash({}), UnsupportedBackend);
}

TEST(AtomicHeap, FlushCountingIsOptIn) {
  AtomicHeap heap = AtomicHeap::CreateVolatile(Layout(), Algorithm::kNoDirtyFlags);
  heap.Persist(WordAddress{0});
  EXPECT_EQ(heap.line_flushes(), 0u);
  heap.set_count_flushes(true);
  heap.Persist(WordAddress{0});
  heap.PersistDescriptor(0);
  EXPECT_EQ(heap.line_flushes(), 2u);
}

TEST(AtomicHeap, FileRoundTripAndCleanMarker) {
  TempPath tmp;
  {
    AtomicHeap heap = AtomicHeap::CreateFile(tmp.get(), Layout(), Algorithm::kPcas);
    heap.Store(WordAddress{5}, TaggedWord::FromPayload(77));
    heap.Persist(WordAddress{5});
  }
  bool clean = false;
  {
    AtomicHeap heap = AtomicHeap::OpenFile(tmp.get(), &clean);
    EXPECT_TRUE(clean);
    EXPECT_EQ(heap.layout(), Layout());
    EXPECT_EQ(heap.algorithm(), Algorithm::kPcas);
    EXPECT_EQ(heap.Load(WordAddress{5}).payload(), 77u);
    heap.Abandon();
  }
  AtomicHeap heap = AtomicHeap::OpenFile(tmp.get(), &clean);
  EXPECT_FALSE(clean);
}

TEST(AtomicHeap, OpenRejectsBadFiles) {
  TempPath tmp;
  EXPECT_THROW(AtomicHeap::OpenFile(tmp.get()), IoError);
  {
    std::FILE* f = std::fopen(tmp.get().c_str(), "wb");
    ASSERT_NE(f, nullptr);
    std::fputs("definitely not a heap, but long enough to hold a header", f);
    std::fclose(f);
  }
  EXPECT_THROW(AtomicHeap::OpenFile(tmp.get()), IoError);
}

TEST(AtomicHeap, OpenRejectsTruncatedFile) {
  TempPath tmp;
  { AtomicHeap heap = AtomicHeap::CreateFile(tmp.get(), Layout(), Algorithm::kPcas); }
  fs::resize_file(tmp.get(), 4096);
  EXPECT_THROW(AtomicHeap::OpenFile(tmp.get()), IoError);
}

TEST(AtomicHeap, ConcurrentCasIsAtomic) {
  AtomicHeap heap = AtomicHeap::CreateVolatile(Layout(), Algorithm::kNoDirtyFlags);
  constexpr int kThreads = 4;
  constexpr int kIncrements = 20000;
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < kIncrements; ++i) {
        TaggedWord seen = heap.Load(WordAddress{0});
        while (true) {
          const TaggedWord got = heap.Cas(WordAddress{0}, seen, TaggedWord::FromPayload(seen.payload() + 1));
          if (got == seen) break;
          seen = got;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(heap.Load(WordAddress{0}).payload(), static_cast<std::uint64_t>(kThreads) * kIncrements);
}

}  // namespace
}  // namespace pmwcas
