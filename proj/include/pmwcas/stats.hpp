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

namespace pmwcas {

/**
 * Event counts attributed to one operation (or summed over many).
 *
 * cas_count includes the owner's finalizing store, so a conflict-free
 * k-word PMwCAS reports 2k. flush_count counts target-word persists;
 * descriptor persists are tracked separately.
 */
struct OpStats {
  std::uint64_t cas_count{0};
  std::uint64_t dirty_store_count{0};
  std::uint64_t flush_count{0};
  std::uint64_t descriptor_persist_count{0};
  std::uint64_t retry_count{0};

  void OnCas() { ++cas_count; }
  void OnDirtyStore() { ++dirty_store_count; }
  void OnFlush() { ++flush_count; }
  void OnDescriptorPersist() { ++descriptor_persist_count; }
  void OnRetry() { ++retry_count; }

  OpStats& operator+=(const OpStats& o) {
    cas_count += o.cas_count;
    dirty_store_count += o.dirty_store_count;
    flush_count += o.flush_count;
    descriptor_persist_count += o.descriptor_persist_count;
    retry_count += o.retry_count;
    return *this;
  }

  bool operator==(const OpStats&) const = default;
};

/// Instrumentation disabled: every hook compiles away.
struct NullStats {
  void OnCas() {}
  void OnDirtyStore() {}
  void OnFlush() {}
  void OnDescriptorPersist() {}
  void OnRetry() {}
};

template <class S>
concept StatsSink = requires(S& s) {
  s.OnCas();
  s.OnDirtyStore();
  s.OnFlush();
  s.OnDescriptorPersist();
  s.OnRetry();
};

}  // namespace pmwcas
