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
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "pmwcas/errors.hpp"
#include "pmwcas/tagged_word.hpp"

#ifndef PMWCAS_CACHE_LINE_SIZE
#define PMWCAS_CACHE_LINE_SIZE 64
#endif

namespace pmwcas {

inline constexpr std::size_t kCacheLineSize = PMWCAS_CACHE_LINE_SIZE;
static_assert(std::has_single_bit(kCacheLineSize) && kCacheLineSize >= 8);

inline constexpr std::size_t kPageSize = 4096;
inline constexpr std::uint32_t kDefaultMaxTargets = 8;
/// Capacity of an in-memory Descriptor; heaps may configure up to this many.
inline constexpr std::uint32_t kMaxTargetsLimit = 16;

/// Which persistence protocol a heap's words follow. Recorded in the file
/// header so recovery knows whether dirty flags can appear.
enum class Algorithm : std::uint32_t {
  kNoDirtyFlags = 0,
  kDirtyFlags = 1,
  kPcas = 2,
};

constexpr std::string_view ToString(Algorithm a) {
  switch (a) {
    case Algorithm::kNoDirtyFlags:
      return "nodf";
    case Algorithm::kDirtyFlags:
      return "df";
    case Algorithm::kPcas:
      return "pcas";
  }
  return "?";
}

inline Algorithm ParseAlgorithm(std::string_view s) {
  if (s == "nodf") return Algorithm::kNoDirtyFlags;
  if (s == "df") return Algorithm::kDirtyFlags;
  if (s == "pcas") return Algorithm::kPcas;
  throw ContractViolation("unknown algorithm '" + std::string{s} + "' (expected df, nodf or pcas)");
}

/// Index of a per-worker descriptor slot.
using DescriptorSlot = std::uint32_t;

constexpr std::uint64_t RoundUp(std::uint64_t value, std::uint64_t unit) {
  return (value + unit - 1) / unit * unit;
}

/**
 * Byte layout shared by every backend:
 *
 *   [0, 4096)              header (see HeapHeader)
 *   [4096, data_offset)    descriptor area, one slot per worker
 *   [data_offset, ...)     word_capacity blocks of block_size bytes,
 *                          the managed word at offset 0 of each block
 *
 * A descriptor slot holds state (u64), count (u64), then count entries of
 * {address, expected, desired} (3 x u64), padded to whole cache lines.
 */
struct HeapLayout {
  std::uint64_t word_capacity{0};
  std::uint32_t block_size{256};
  std::uint32_t worker_slots{1};
  std::uint32_t max_targets{kDefaultMaxTargets};

  static constexpr std::uint64_t kDescriptorHeaderBytes = 16;
  static constexpr std::uint64_t kTargetEntryBytes = 24;

  void Validate() const {
    if (word_capacity == 0) throw ContractViolation("heap needs at least one word");
    if (block_size < 8 || !std::has_single_bit(block_size)) {
      throw ContractViolation("block size must be a power of two >= 8");
    }
    if (worker_slots == 0) throw ContractViolation("heap needs at least one worker slot");
    if (max_targets == 0 || max_targets > kMaxTargetsLimit) {
      throw ContractViolation("max_targets must be in [1, " + std::to_string(kMaxTargetsLimit) + "]");
    }
  }

  constexpr std::uint64_t DescriptorSlotBytes() const {
    return RoundUp(kDescriptorHeaderBytes + kTargetEntryBytes * max_targets, kCacheLineSize);
  }
  constexpr std::uint64_t DescriptorAreaOffset() const { return kPageSize; }
  constexpr std::uint64_t DataOffset() const {
    const std::uint64_t end = DescriptorAreaOffset() + DescriptorSlotBytes() * worker_slots;
    return RoundUp(end, std::max<std::uint64_t>(kPageSize, block_size));
  }
  constexpr std::uint64_t TotalBytes() const { return DataOffset() + word_capacity * block_size; }

  constexpr bool Contains(WordAddress addr) const { return addr.index < word_capacity; }

  std::uint64_t WordOffset(WordAddress addr) const {
    if (!Contains(addr)) {
      throw AddressError("word index " + std::to_string(addr.index) + " out of range (capacity " +
                         std::to_string(word_capacity) + ")");
    }
    return DataOffset() + addr.index * block_size;
  }

  std::uint64_t SlotOffset(DescriptorSlot slot) const {
    if (slot >= worker_slots) {
      throw AddressError("descriptor slot " + std::to_string(slot) + " out of range (" +
                         std::to_string(worker_slots) + " slots)");
    }
    return DescriptorAreaOffset() + DescriptorSlotBytes() * slot;
  }

  /// Bytes of a slot that hold live content for a descriptor of `count` targets.
  static constexpr std::uint64_t DescriptorBytes(std::uint64_t count) {
    return kDescriptorHeaderBytes + kTargetEntryBytes * count;
  }

  /// The tagged word embedded into targets: the slot's heap byte offset | 0b10.
  TaggedWord DescriptorWord(DescriptorSlot slot) const {
    return TaggedWord::FromRaw(SlotOffset(slot) | static_cast<std::uint64_t>(WordTag::kDescriptor));
  }

  /// Inverse of DescriptorWord; nullopt if the word does not name a slot.
  std::optional<DescriptorSlot> SlotOf(TaggedWord word) const {
    if (!word.IsDescriptor()) return std::nullopt;
    const std::uint64_t offset = word.raw() & ~TaggedWord::kTagMask;
    if (offset < DescriptorAreaOffset()) return std::nullopt;
    const std::uint64_t rel = offset - DescriptorAreaOffset();
    if (rel % DescriptorSlotBytes() != 0) return std::nullopt;
    const std::uint64_t slot = rel / DescriptorSlotBytes();
    if (slot >= worker_slots) return std::nullopt;
    return static_cast<DescriptorSlot>(slot);
  }

  static constexpr std::uint64_t LineOf(std::uint64_t byte_offset) { return byte_offset / kCacheLineSize; }

  constexpr bool operator==(const HeapLayout&) const = default;
};

/**
 * On-disk header, little-endian:
 *   0  magic "PMWC"        4 bytes
 *   4  format version      u32
 *   8  word_capacity       u64
 *   16 block_size          u32
 *   20 worker_slots        u32
 *   24 max_targets         u32
 *   28 algorithm           u32
 *   32 clean_shutdown      u32
 */
struct HeapHeader {
  static constexpr std::array<char, 4> kMagic{'P', 'M', 'W', 'C'};
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kEncodedBytes = 36;

  HeapLayout layout{};
  Algorithm algorithm{Algorithm::kNoDirtyFlags};
  bool clean_shutdown{true};

  void Encode(std::span<std::byte, kEncodedBytes> out) const {
    std::size_t pos = 0;
    auto put = [&](std::uint64_t v, std::size_t bytes) {
      for (std::size_t i = 0; i < bytes; ++i) out[pos++] = static_cast<std::byte>((v >> (8 * i)) & 0xff);
    };
    for (char c : kMagic) out[pos++] = static_cast<std::byte>(c);
    put(kVersion, 4);
    put(layout.word_capacity, 8);
    put(layout.block_size, 4);
    put(layout.worker_slots, 4);
    put(layout.max_targets, 4);
    put(static_cast<std::uint32_t>(algorithm), 4);
    put(clean_shutdown ? 1 : 0, 4);
  }

  static HeapHeader Decode(std::span<const std::byte, kEncodedBytes> in) {
    std::size_t pos = 0;
    auto get = [&](std::size_t bytes) {
      std::uint64_t v = 0;
      for (std::size_t i = 0; i < bytes; ++i) v |= std::to_integer<std::uint64_t>(in[pos++]) << (8 * i);
      return v;
    };
    for (char c : kMagic) {
      if (static_cast<char>(in[pos++]) != c) throw IoError("not a pmwcas heap (bad magic)");
    }
    if (const auto version = get(4); version != kVersion) {
      throw IoError("unsupported heap format version " + std::to_string(version));
    }
    HeapHeader h;
    h.layout.word_capacity = get(8);
    h.layout.block_size = static_cast<std::uint32_t>(get(4));
    h.layout.worker_slots = static_cast<std::uint32_t>(get(4));
    h.layout.max_targets = static_cast<std::uint32_t>(get(4));
    const auto algorithm = get(4);
    if (algorithm > static_cast<std::uint32_t>(Algorithm::kPcas)) throw IoError("corrupt heap header (algorithm)");
    h.algorithm = static_cast<Algorithm>(algorithm);
    h.clean_shutdown = get(4) != 0;
    try {
      h.layout.Validate();
    } catch (const ContractViolation& e) {
      throw IoError(std::string{"corrupt heap header: "} + e.what());
    }
    return h;
  }
};

}  // namespace pmwcas
