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

#include <array>
#include <cstddef>

#include "pmwcas/errors.hpp"
#include "pmwcas/layout.hpp"

namespace pmwcas {
namespace {

HeapLayout Small() {
  HeapLayout l;
  l.word_capacity = 100;
  l.block_size = 256;
  l.worker_slots = 4;
  l.max_targets = 8;
  return l;
}

TEST(Layout, Regions) {
  const HeapLayout l = Small();
  // 16-byte slot header + 8 targets * 24 bytes, rounded to whole lines.
  EXPECT_EQ(l.DescriptorSlotBytes(), 256u);
  EXPECT_EQ(l.DescriptorAreaOffset(), 4096u);
  EXPECT_EQ(l.DataOffset(), 8192u);
  EXPECT_EQ(l.TotalBytes(), 8192u + 100 * 256);
  EXPECT_EQ(l.WordOffset(WordAddress{3}), 8192u + 3 * 256);
  EXPECT_EQ(l.SlotOffset(2), 4096u + 2 * 256);
  EXPECT_THROW(l.WordOffset(WordAddress{100}), AddressError);
  EXPECT_THROW(l.SlotOffset(4), AddressError);
}

TEST(Layout, SmallBlocksShareLines) {
  HeapLayout l = Small();
  l.block_size = 8;
  EXPECT_EQ(HeapLayout::LineOf(l.WordOffset(WordAddress{0})), HeapLayout::LineOf(l.WordOffset(WordAddress{7})));
  EXPECT_NE(HeapLayout::LineOf(l.WordOffset(WordAddress{7})), HeapLayout::LineOf(l.WordOffset(WordAddress{8})));
}

TEST(Layout, DescriptorWordRoundTrip) {
  const HeapLayout l = Small();
  for (DescriptorSlot s = 0; s < l.worker_slots; ++s) {
    const TaggedWord w = l.DescriptorWord(s);
    EXPECT_TRUE(w.IsDescriptor());
    EXPECT_EQ(w.raw() & ~TaggedWord::kTagMask, l.SlotOffset(s));
    EXPECT_EQ(l.SlotOf(w), s);
  }
  EXPECT_FALSE(l.SlotOf(TaggedWord::FromRaw((4096 + 8) | 0b10)));
  EXPECT_FALSE(l.SlotOf(TaggedWord::FromRaw((4096 + 4 * 256) | 0b10)));
  EXPECT_FALSE(l.SlotOf(TaggedWord::FromPayload(5)));
}

TEST(Layout, Validation) {
  HeapLayout l = Small();
  l.block_size = 24;
  EXPECT_THROW(l.Validate(), ContractViolation);
  l.block_size = 4;
  EXPECT_THROW(l.Validate(), ContractViolation);
  l = Small();
  l.max_targets = kMaxTargetsLimit + 1;
  EXPECT_THROW(l.Validate(), ContractViolation);
  l = Small();
  l.word_capacity = 0;
  EXPECT_THROW(l.Validate(), ContractViolation);
}

TEST(Layout, AlgorithmNames) {
  for (Algorithm a : {Algorithm::kNoDirtyFlags, Algorithm::kDirtyFlags, Algorithm::kPcas}) {
    EXPECT_EQ(ParseAlgorithm(ToString(a)), a);
  }
  EXPECT_THROW(ParseAlgorithm("mwcas"), ContractViolation);
}

TEST(HeapHeader, EncodeDecode) {
  HeapHeader h;
  h.layout = Small();
  h.algorithm = Algorithm::kDirtyFlags;
  h.clean_shutdown = false;
  std::array<std::byte, HeapHeader::kEncodedBytes> raw{};
  h.Encode(raw);
  EXPECT_EQ(static_cast<char>(raw[0]), 'P');
  EXPECT_EQ(static_cast<char>(raw[3]), 'C');
  EXPECT_EQ(std::to_integer<int>(raw[4]), 1);  // version, little-endian
  EXPECT_EQ(std::to_integer<int>(raw[8]), 100);
  const HeapHeader back = HeapHeader::Decode(raw);
  EXPECT_EQ(back.layout, h.layout);
  EXPECT_EQ(back.algorithm, h.algorithm);
  EXPECT_FALSE(back.clean_shutdown);
}

TEST(HeapHeader, RejectsCorruption) {
  HeapHeader h;
  h.layout = Small();
  std::array<std::byte, HeapHeader::kEncodedBytes> raw{};
  h.Encode(raw);
  auto bad_magic = raw;
  bad_magic[0] = std::byte{'X'};
  EXPECT_THROW(HeapHeader::Decode(bad_magic), IoError);
  auto bad_version = raw;
  bad_version[4] = std::byte{9};
  EXPECT_THROW(HeapHeader::Decode(bad_version), IoError);
  auto bad_block = raw;
  bad_block[16] = std::byte{3};
  bad_block[17] = std::byte{0};
  EXPECT_THROW(HeapHeader::Decode(bad_block), IoError);
}

}  // namespace
}  // namespace pmwcas
