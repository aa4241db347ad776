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
#include <cstddef>
#include <cstdint>

#if defined(__x86_64__)
#include <cpuid.h>
#endif

#include "pmwcas/layout.hpp"

namespace pmwcas {

/// Cache-line writeback instruction picked at startup from CPUID.
enum class FlushInstruction { kNone, kClflush, kClflushopt, kClwb };

inline FlushInstruction DetectFlushInstruction() {
#if defined(__x86_64__)
  unsigned eax = 0, ebx = 0, ecx = 0, edx = 0;
  if (__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) {
    if (ebx & (1u << 24)) return FlushInstruction::kClwb;
    if (ebx & (1u << 23)) return FlushInstruction::kClflushopt;
  }
  return FlushInstruction::kClflush;
#else
  return FlushInstruction::kNone;
#endif
}

inline FlushInstruction ActiveFlushInstruction() {
  static const FlushInstruction kActive = DetectFlushInstruction();
  return kActive;
}

/// Writes back the line holding `p` without an ordering fence.
inline void FlushLine(const void* p) {
#if defined(__x86_64__)
  auto* line = const_cast<char*>(static_cast<const char*>(p));
  switch (ActiveFlushInstruction()) {
    case FlushInstruction::kClwb:
      asm volatile(".byte 0x66; xsaveopt %0" : "+m"(*line));
      break;
    case FlushInstruction::kClflushopt:
      asm volatile(".byte 0x66; clflush %0" : "+m"(*line));
      break;
    case FlushInstruction::kClflush:
      asm volatile("clflush %0" : "+m"(*line));
      break;
    case FlushInstruction::kNone:
      break;
  }
#else
  (void)p;
#endif
}

/// Full ordering after a batch of line writebacks.
inline void PersistFence() { std::atomic_thread_fence(std::memory_order_seq_cst); }

inline void FlushRange(const void* p, std::size_t bytes) {
  const auto begin = reinterpret_cast<std::uintptr_t>(p) & ~(std::uintptr_t{kCacheLineSize} - 1);
  const auto end = reinterpret_cast<std::uintptr_t>(p) + bytes;
  for (std::uintptr_t line = begin; line < end; line += kCacheLineSize) {
    FlushLine(reinterpret_cast<const void*>(line));
  }
}

}  // namespace pmwcas
