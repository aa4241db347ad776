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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmwcas/descriptor.hpp"
#include "pmwcas/memory.hpp"

namespace pmwcas::harness {

/// Shared-memory events; the unit of interleaving and of crash placement.
enum class EventKind : std::uint8_t {
  kLoad,
  kStore,
  kCas,
  kPersist,
  kInitDescriptor,
  kStoreState,
  kPersistDescriptor,
};

constexpr std::string_view ToString(EventKind k) {
  switch (k) {
    case EventKind::kLoad:
      return "load";
    case EventKind::kStore:
      return "store";
    case EventKind::kCas:
      return "cas";
    case EventKind::kPersist:
      return "persist";
    case EventKind::kInitDescriptor:
      return "init-descriptor";
    case EventKind::kStoreState:
      return "store-state";
    case EventKind::kPersistDescriptor:
      return "persist-descriptor";
  }
  return "?";
}

/**
 * `target` is a word index for word events and a slot for descriptor
 * events. Arguments: store value; cas expected/desired; state value;
 * init-descriptor target count. `result` holds what a load or cas observed.
 */
struct MemoryEvent {
  EventKind kind{EventKind::kLoad};
  std::uint64_t target{0};
  std::uint64_t arg0{0};
  std::uint64_t arg1{0};
  std::uint64_t result{0};

  bool operator==(const MemoryEvent&) const = default;

  bool IsWordEvent() const {
    return kind == EventKind::kLoad || kind == EventKind::kStore || kind == EventKind::kCas ||
           kind == EventKind::kPersist;
  }
};

inline std::string Describe(const MemoryEvent& e) {
  std::string s{ToString(e.kind)};
  s += e.IsWordEvent() ? " word " : " slot ";
  s += std::to_string(e.target);
  switch (e.kind) {
    case EventKind::kStore:
    case EventKind::kStoreState:
      s += " <- " + std::to_string(e.arg0);
      break;
    case EventKind::kCas:
      s += " " + std::to_string(e.arg0) + " -> " + std::to_string(e.arg1) + " saw " + std::to_string(e.result);
      break;
    case EventKind::kLoad:
      s += " = " + std::to_string(e.result);
      break;
    default:
      break;
  }
  return s;
}

/**
 * Forwards to a heap and appends every event to a log. Used to compare a
 * single-threaded run with the algorithm listing line by line.
 */
template <class Heap>
class RecordingMemory {
 public:
  explicit RecordingMemory(Heap& heap) : heap_{heap} {}

  const HeapLayout& layout() const { return heap_.layout(); }
  BackoffPolicy backoff_policy() const { return heap_.backoff_policy(); }

  TaggedWord Load(WordAddress a) {
    const TaggedWord w = heap_.Load(a);
    log_.push_back({EventKind::kLoad, a.index, 0, 0, w.raw()});
    return w;
  }
  void Store(WordAddress a, TaggedWord w) {
    heap_.Store(a, w);
    log_.push_back({EventKind::kStore, a.index, w.raw(), 0, 0});
  }
  TaggedWord Cas(WordAddress a, TaggedWord expected, TaggedWord desired) {
    const TaggedWord seen = heap_.Cas(a, expected, desired);
    log_.push_back({EventKind::kCas, a.index, expected.raw(), desired.raw(), seen.raw()});
    return seen;
  }
  void Persist(WordAddress a) {
    heap_.Persist(a);
    log_.push_back({EventKind::kPersist, a.index, 0, 0, 0});
  }
  void InitDescriptor(DescriptorSlot s, std::span<const TargetEntry> t) {
    heap_.InitDescriptor(s, t);
    log_.push_back({EventKind::kInitDescriptor, s, t.size(), 0, 0});
  }
  void StoreState(DescriptorSlot s, DescriptorState st) {
    heap_.StoreState(s, st);
    log_.push_back({EventKind::kStoreState, s, static_cast<std::uint64_t>(st), 0, 0});
  }
  void PersistDescriptor(DescriptorSlot s) {
    heap_.PersistDescriptor(s);
    log_.push_back({EventKind::kPersistDescriptor, s, 0, 0, 0});
  }
  DescriptorImage ReadDescriptor(DescriptorSlot s) { return heap_.ReadDescriptor(s); }
  bool TryAcquireSlot(DescriptorSlot s) { return heap_.TryAcquireSlot(s); }
  void ReleaseSlot(DescriptorSlot s) { heap_.ReleaseSlot(s); }

  const std::vector<MemoryEvent>& log() const { return log_; }
  void ClearLog() { log_.clear(); }

 private:
  Heap& heap_;
  std::vector<MemoryEvent> log_;
};

}  // namespace pmwcas::harness
