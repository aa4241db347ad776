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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmwcas/errors.hpp"
#include "pmwcas/layout.hpp"
#include "pmwcas/tagged_word.hpp"

namespace pmwcas {

/// Persistent encoding of an operation's state. Zero-filled slots read as Completed.
enum class DescriptorState : std::uint64_t {
  kCompleted = 0,
  kFailed = 1,
  kSucceeded = 2,
};

constexpr std::optional<DescriptorState> DecodeState(std::uint64_t raw) {
  switch (raw) {
    case 0:
      return DescriptorState::kCompleted;
    case 1:
      return DescriptorState::kFailed;
    case 2:
      return DescriptorState::kSucceeded;
    default:
      return std::nullopt;
  }
}

constexpr char StateInitial(DescriptorState s) {
  switch (s) {
    case DescriptorState::kCompleted:
      return 'C';
    case DescriptorState::kFailed:
      return 'F';
    case DescriptorState::kSucceeded:
      return 'S';
  }
  return '?';
}

/// Whether `to` may follow `from` within one operation.
constexpr bool IsLegalTransition(DescriptorState from, DescriptorState to) {
  using enum DescriptorState;
  return (from == kFailed && (to == kSucceeded || to == kCompleted)) ||
         (from == kSucceeded && to == kCompleted);
}

struct TargetEntry {
  WordAddress address{};
  TaggedWord expected{};
  TaggedWord desired{};

  constexpr bool operator==(const TargetEntry&) const = default;
};

/// Checks the per-target invariants: plain payloads and pairwise distinct addresses.
inline void ValidateTargets(std::span<const TargetEntry> targets, std::uint32_t max_targets) {
  if (targets.empty()) throw ContractViolation("a descriptor needs at least one target");
  if (targets.size() > max_targets) {
    throw ContractViolation("descriptor has " + std::to_string(targets.size()) + " targets, heap allows " +
                            std::to_string(max_targets));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!targets[i].expected.IsPayload() || !targets[i].desired.IsPayload()) {
      throw ContractViolation("target values must be plain payloads (tag 00)");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (targets[i].address == targets[j].address) {
        throw ContractViolation("duplicate target address " + std::to_string(targets[i].address.index));
      }
    }
  }
}

/**
 * The volatile side of a PMwCAS: the owner's slot and the ordered target
 * list. Its persistent image is written into the heap when the operation
 * starts. Targets are embedded in insertion order, so every operation over
 * shared words must list them in one global order (e.g. ascending address).
 */
class Descriptor {
 public:
  explicit Descriptor(DescriptorSlot slot) : slot_{slot} {}

  void AddTarget(WordAddress address, TaggedWord expected, TaggedWord desired) {
    if (count_ == targets_.size()) throw ContractViolation("descriptor is full");
    if (!expected.IsPayload() || !desired.IsPayload()) {
      throw ContractViolation("target values must be plain payloads (tag 00)");
    }
    for (const auto& t : targets()) {
      if (t.address == address) {
        throw ContractViolation("duplicate target address " + std::to_string(address.index));
      }
    }
    targets_[count_++] = TargetEntry{address, expected, desired};
  }

  void Clear() { count_ = 0; }

  DescriptorSlot slot() const { return slot_; }
  std::size_t size() const { return count_; }
  std::span<const TargetEntry> targets() const { return {targets_.data(), count_}; }

 private:
  DescriptorSlot slot_;
  std::array<TargetEntry, kMaxTargetsLimit> targets_{};
  std::size_t count_{0};
};

/// A descriptor slot as read back from a heap, unvalidated.
struct DescriptorImage {
  std::uint64_t raw_state{0};
  std::uint64_t count{0};
  std::vector<TargetEntry> targets;

  std::optional<DescriptorState> state() const { return DecodeState(raw_state); }
};

}  // namespace pmwcas
