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
#include <functional>
#include <span>

namespace pmwcas::harness {

/// 128-bit state fingerprint; two independently mixed 64-bit lanes.
struct Hash128 {
  std::uint64_t lo{0};
  std::uint64_t hi{0};

  bool operator==(const Hash128&) const = default;
};

struct Hash128Hasher {
  std::size_t operator()(const Hash128& h) const { return static_cast<std::size_t>(h.lo ^ (h.hi * 31)); }
};

constexpr std::uint64_t Mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

class StateHasher {
 public:
  StateHasher& Add(std::uint64_t v) {
    a_ = Mix64(a_ ^ v) + 0x9e3779b97f4a7c15ull;
    b_ = Mix64(b_ + v * 0xc2b2ae3d27d4eb4full) ^ (b_ >> 29);
    ++n_;
    return *this;
  }
  StateHasher& Add(std::span<const std::uint64_t> values) {
    for (std::uint64_t v : values) Add(v);
    return *this;
  }
  StateHasher& Add(std::span<const std::uint8_t> values) {
    std::uint64_t word = 0;
    std::size_t i = 0;
    for (std::uint8_t v : values) {
      word = (word << 8) | v;
      if (++i % 8 == 0) {
        Add(word);
        word = 0;
      }
    }
    return Add(word).Add(values.size());
  }
  Hash128 Finish() const { return {Mix64(a_ ^ n_), Mix64(b_ + n_)}; }

 private:
  std::uint64_t a_{0x243f6a8885a308d3ull};
  std::uint64_t b_{0x13198a2e03707344ull};
  std::uint64_t n_{0};
};

}  // namespace pmwcas::harness
