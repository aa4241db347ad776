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

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmwcas/errors.hpp"
#include "pmwcas/layout.hpp"
#include "pmwcas/memory.hpp"
#include "pmwcas/persist.hpp"

namespace pmwcas {

/// How Persist reaches the durable medium.
enum class PersistMode {
  kFenceOnly,       ///< DRAM stand-in: ordering fence, no write-back.
  kCacheLineFlush,  ///< clwb/clflushopt/clflush per line, then a full fence.
};

/**
 * Heap over real memory: an anonymous mapping ("dram" backend) or a
 * memory-mapped file using the on-disk layout of HeapHeader. Word
 * operations are hardware atomics and may be issued from any number of
 * threads. Create/Open/Close are single-threaded phases.
 */
class AtomicHeap : public HeapBase<AtomicHeap> {
 public:
  static AtomicHeap CreateVolatile(HeapLayout layout, Algorithm algorithm) {
    layout.Validate();
    void* base = ::mmap(nullptr, layout.TotalBytes(), PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
    if (base == MAP_FAILED) throw IoError("mmap of " + std::to_string(layout.TotalBytes()) + " bytes failed");
    return AtomicHeap{layout, algorithm, static_cast<std::byte*>(base), -1, PersistMode::kFenceOnly, {}};
  }

  /// Creates (or truncates) a zero-filled heap file and maps it.
  static AtomicHeap CreateFile(const std::filesystem::path& path, HeapLayout layout, Algorithm algorithm) {
    layout.Validate();
    const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw IoError("cannot create " + path.string() + ": " + std::strerror(errno));
    if (::ftruncate(fd, static_cast<off_t>(layout.TotalBytes())) != 0) {
      ::close(fd);
      throw IoError("cannot size " + path.string() + ": " + std::strerror(errno));
    }
    AtomicHeap heap{layout, algorithm, MapFile(fd, layout.TotalBytes(), path), fd, PersistMode::kCacheLineFlush,
                    path};
    heap.WriteHeader(/*clean_shutdown=*/false);
    return heap;
  }

  /// Maps an existing heap file. The caller decides whether to recover (see Recovery).
  static AtomicHeap OpenFile(const std::filesystem::path& path, bool* was_clean = nullptr) {
    const int fd = ::open(path.c_str(), O_RDWR);
    if (fd < 0) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
    std::array<std::byte, HeapHeader::kEncodedBytes> raw{};
    if (::pread(fd, raw.data(), raw.size(), 0) != static_cast<ssize_t>(raw.size())) {
      ::close(fd);
      throw IoError("cannot read header of " + path.string());
    }
    HeapHeader header;
    try {
      header = HeapHeader::Decode(raw);
    } catch (...) {
      ::close(fd);
      throw;
    }
    struct stat st {};
    if (::fstat(fd, &st) != 0 || static_cast<std::uint64_t>(st.st_size) < header.layout.TotalBytes()) {
      ::close(fd);
      throw IoError(path.string() + " is shorter than its header claims");
    }
    if (was_clean != nullptr) *was_clean = header.clean_shutdown;
    AtomicHeap heap{header.layout, header.algorithm, MapFile(fd, header.layout.TotalBytes(), path), fd,
                    PersistMode::kCacheLineFlush, path};
    heap.WriteHeader(/*clean_shutdown=*/false);
    return heap;
  }

  AtomicHeap(AtomicHeap&& other) noexcept
      : HeapBase{std::move(other)},
        base_{std::exchange(other.base_, nullptr)},
        fd_{std::exchange(other.fd_, -1)},
        mode_{other.mode_},
        path_{std::move(other.path_)},
        count_flushes_{other.count_flushes_},
        line_flushes_{other.line_flushes_.load()} {}
  AtomicHeap& operator=(AtomicHeap&&) = delete;
  AtomicHeap(const AtomicHeap&) = delete;
  AtomicHeap& operator=(const AtomicHeap&) = delete;

  /// Unmaps; file-backed heaps are marked cleanly shut down first.
  ~AtomicHeap() { Close(); }

  void Close() {
    if (base_ == nullptr) return;
    if (fd_ >= 0) {
      WriteHeader(/*clean_shutdown=*/true);
      ::msync(base_, layout().TotalBytes(), MS_SYNC);
    }
    Release();
  }

  /// Drops the mapping without the clean-shutdown marker, as a crash would.
  void Abandon() {
    if (base_ == nullptr) return;
    if (fd_ >= 0) ::msync(base_, layout().TotalBytes(), MS_SYNC);
    Release();
  }

  bool is_file_backed() const { return !path_.empty(); }
  PersistMode persist_mode() const { return mode_; }

  /// Line flushes are only counted when enabled; the counter is shared by all threads.
  void set_count_flushes(bool on) { count_flushes_ = on; }
  std::uint64_t line_flushes() const { return line_flushes_.load(std::memory_order_relaxed); }

  [[noreturn]] void Crash(std::span<const std::uint64_t>) {
    throw UnsupportedBackend("crash injection needs the simulated backend");
  }

  std::uint64_t LoadCell(std::uint64_t offset) { return Ref(offset).load(std::memory_order_acquire); }
  void StoreCell(std::uint64_t offset, std::uint64_t value) { Ref(offset).store(value, std::memory_order_release); }
  std::uint64_t CasCell(std::uint64_t offset, std::uint64_t expected, std::uint64_t desired) {
    Ref(offset).compare_exchange_strong(expected, desired, std::memory_order_seq_cst);
    return expected;
  }

  void PersistBytes(std::uint64_t offset, std::uint64_t bytes) {
    if (mode_ == PersistMode::kCacheLineFlush) FlushRange(base_ + offset, bytes);
    PersistFence();
    if (count_flushes_) {
      const std::uint64_t lines = HeapLayout::LineOf(offset + bytes - 1) - HeapLayout::LineOf(offset) + 1;
      line_flushes_.fetch_add(lines, std::memory_order_relaxed);
    }
  }

  /// Copy of the whole mapped image (header included).
  std::vector<std::byte> Snapshot() const { return {base_, base_ + layout().TotalBytes()}; }

 private:
  AtomicHeap(HeapLayout layout, Algorithm algorithm, std::byte* base, int fd, PersistMode mode,
             std::filesystem::path path)
      : HeapBase{layout, algorithm}, base_{base}, fd_{fd}, mode_{mode}, path_{std::move(path)} {}

  static std::byte* MapFile(int fd, std::uint64_t bytes, const std::filesystem::path& path) {
    void* base = ::mmap(nullptr, bytes, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
    if (base == MAP_FAILED) {
      ::close(fd);
      throw IoError("cannot map " + path.string() + ": " + std::strerror(errno));
    }
    return static_cast<std::byte*>(base);
  }

  std::atomic_ref<std::uint64_t> Ref(std::uint64_t offset) {
    return std::atomic_ref<std::uint64_t>{*reinterpret_cast<std::uint64_t*>(base_ + offset)};
  }

  void WriteHeader(bool clean_shutdown) {
    HeapHeader header{layout(), algorithm(), clean_shutdown};
    header.Encode(std::span<std::byte, HeapHeader::kEncodedBytes>{base_, HeapHeader::kEncodedBytes});
    FlushRange(base_, HeapHeader::kEncodedBytes);
    PersistFence();
    ::msync(base_, kPageSize, MS_SYNC);
  }

  void Release() {
    ::munmap(base_, layout().TotalBytes());
    base_ = nullptr;
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  std::byte* base_{nullptr};
  int fd_{-1};
  PersistMode mode_{PersistMode::kFenceOnly};
  std::filesystem::path path_;
  bool count_flushes_{false};
  std::atomic<std::uint64_t> line_flushes_{0};
};

}  // namespace pmwcas
