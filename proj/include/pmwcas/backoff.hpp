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
#include <thread>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#endif

namespace pmwcas {

inline void CpuRelax() {
#if defined(__x86_64__) || defined(__i386__)
  _mm_pause();
#elif defined(__aarch64__)
  asm volatile("yield" ::: "memory");
#endif
}

/// Exponential back-off used by every wait loop (reads and reservations).
struct BackoffPolicy {
  std::uint32_t initial_spins{64};
  std::uint32_t max_spins{4096};
  bool yield_at_cap{true};

  /// No spinning at all; used when a scheduler, not time, decides progress.
  static constexpr BackoffPolicy None() { return BackoffPolicy{0, 0, false}; }
};

class Backoff {
 public:
  explicit Backoff(BackoffPolicy policy) : policy_{policy}, spins_{policy.initial_spins} {}

  void Pause() {
    for (std::uint32_t i = 0; i < spins_; ++i) CpuRelax();
    if (spins_ >= policy_.max_spins) {
      if (policy_.yield_at_cap) std::this_thread::yield();
    } else {
      spins_ = std::min(spins_ * 2, policy_.max_spins);
    }
  }

 private:
  BackoffPolicy policy_;
  std::uint32_t spins_;
};

}  // namespace pmwcas
