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

#include <compare>
#include <cstdint>
#include <functional>

#include "pmwcas/errors.hpp"

namespace pmwcas {

/// Logical word slot in a heap's data area.
struct WordAddress {
  std::uint64_t index{0};

  constexpr auto operator<=>(const WordAddress&) const = default;
};

/// Low two bits of every managed word.
enum class WordTag : std::uint64_t {
  kPayload = 0b00,
  kDirty = 0b01,
  kDescriptor = 0b10,
};

/**
 * A 64-bit word whose low two bits discriminate a plain payload (00), a
 * payload carrying a dirty flag (01), and an embedded descriptor (10).
 * Application values live in the upper 62 bits; tag 11 is never produced.
 */
class TaggedWord {
 public:
  static constexpr std::uint64_t kTagMask = 0b11;
  static constexpr std::uint64_t kMaxPayload = ~std::uint64_t{0} >> 2;

  constexpr TaggedWord() = default;

  static constexpr TaggedWord FromRaw(std::uint64_t raw) { return TaggedWord{raw}; }

  /// Encodes an application value; throws if it does not fit in 62 bits.
  static constexpr TaggedWord FromPayload(std::uint64_t value) {
    if (value > kMaxPayload) {
      throw ContractViolation("payload does not fit in 62 bits");
    }
    return TaggedWord{value << 2};
  }

  constexpr std::uint64_t raw() const { return raw_; }
  constexpr std::uint64_t payload() const { return raw_ >> 2; }
  constexpr WordTag tag() const { return static_cast<WordTag>(raw_ & kTagMask); }

  constexpr bool IsPayload() const { return tag() == WordTag::kPayload; }
  constexpr bool IsDirty() const { return tag() == WordTag::kDirty; }
  constexpr bool IsDescriptor() const { return tag() == WordTag::kDescriptor; }

  /// Same payload with the dirty flag set. Only valid on plain payloads.
  constexpr TaggedWord WithDirtyFlag() const {
    if (!IsPayload()) {
      throw ContractViolation("dirty flag can only be set on a plain payload");
    }
    return TaggedWord{raw_ | static_cast<std::uint64_t>(WordTag::kDirty)};
  }

  constexpr TaggedWord WithoutFlags() const { return TaggedWord{raw_ & ~kTagMask}; }

  constexpr auto operator<=>(const TaggedWord&) const = default;

 private:
  constexpr explicit TaggedWord(std::uint64_t raw) : raw_{raw} {}

  std::uint64_t raw_{0};
};

enum class WordClass { kPayload, kDescriptor, kDirty };

/// Total over the three legal tags; tag 11 is reported as a contract violation.
constexpr WordClass Classify(TaggedWord word) {
  switch (word.tag()) {
    case WordTag::kPayload:
      return WordClass::kPayload;
    case WordTag::kDirty:
      return WordClass::kDirty;
    case WordTag::kDescriptor:
      return WordClass::kDescriptor;
  }
  throw ContractViolation("word carries the reserved tag 11");
}

}  // namespace pmwcas

template <>
struct std::hash<pmwcas::TaggedWord> {
  std::size_t operator()(pmwcas::TaggedWord w) const noexcept {
    return std::hash<std::uint64_t>{}(w.raw());
  }
};
