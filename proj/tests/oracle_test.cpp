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

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "pmwcas/errors.hpp"
#include "pmwcas/harness/oracle.hpp"

namespace pmwcas::harness {
namespace {

std::uint64_t P(std::uint64_t v) { return TaggedWord::FromPayload(v).raw(); }

OracleOp Op(std::vector<std::pair<std::uint64_t, std::pair<std::uint64_t, std::uint64_t>>> t, Constraint c) {
  OracleOp op;
  op.constraint = c;
  for (const auto& [w, v] : t) {
    op.targets.push_back({WordAddress{w}, TaggedWord::FromPayload(v.first), TaggedWord::FromPayload(v.second)});
  }
  return op;
}

TEST(Oracle, SingleSucceededOp) {
  OracleProblem p;
  p.initial = {P(0), P(0), P(0)};
  p.final = {P(1), P(0), P(1)};
  p.ops.push_back(Op({{0, {0, 1}}, {2, {0, 1}}}, Constraint::kMustApply));
  const auto w = FindWitness(p);
  ASSERT_TRUE(w);
  EXPECT_EQ(*w, std::vector<std::size_t>{0});
  p.final = p.initial;
  EXPECT_FALSE(FindWitness(p));
}

TEST(Oracle, OverlappingOpsChain) {
  OracleProblem p;
  p.initial = {P(0), P(0), P(0)};
  // Second op expects what the first one wrote on word 1.
  p.ops.push_back(Op({{1, {1, 2}}, {2, {0, 1}}}, Constraint::kMustApply));
  p.ops.push_back(Op({{0, {0, 1}}, {1, {0, 1}}}, Constraint::kMustApply));
  p.final = {P(1), P(2), P(1)};
  const auto w = FindWitness(p);
  ASSERT_TRUE(w);
  EXPECT_EQ(*w, (std::vector<std::size_t>{1, 0}));
  // Real-time order that contradicts the only feasible order.
  p.precedes = {{0, 1}};
  EXPECT_FALSE(FindWitness(p));
}

TEST(Oracle, TornOpRejected) {
  OracleProblem p;
  p.initial = {P(0), P(0)};
  p.final = {P(1), P(0)};
  p.ops.push_back(Op({{0, {0, 1}}, {1, {0, 1}}}, Constraint::kMayApply));
  EXPECT_FALSE(FindWitness(p));
}

TEST(Oracle, ConstraintsRespected) {
  OracleProblem p;
  p.initial = {P(0)};
  p.final = {P(1)};
  p.ops.push_back(Op({{0, {0, 1}}}, Constraint::kMustNotApply));
  EXPECT_FALSE(FindWitness(p));
  p.ops[0].constraint = Constraint::kMayApply;
  EXPECT_TRUE(FindWitness(p));
  p.final = {P(0)};
  EXPECT_TRUE(FindWitness(p));
  p.ops[0].constraint = Constraint::kMustApply;
  EXPECT_FALSE(FindWitness(p));
}

TEST(Oracle, TooLarge) {
  OracleProblem p;
  p.initial = {P(0)};
  p.final = {P(0)};
  for (int i = 0; i <= static_cast<int>(kMaxOracleOps); ++i) p.ops.push_back(Op({{0, {0, 1}}}, Constraint::kMayApply));
  EXPECT_THROW(FindWitness(p), HarnessError);
  // Ops that cannot apply do not count against the cap.
  for (auto& op : p.ops) op.constraint = Constraint::kMustNotApply;
  EXPECT_TRUE(FindWitness(p));
}

// Independent oracle: try every subset in every order with next_permutation.
bool BruteForce(const OracleProblem& p) {
  const std::size_t n = p.ops.size();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<std::size_t> chosen;
    bool allowed = true;
    for (std::size_t i = 0; i < n; ++i) {
      const bool in = mask >> i & 1;
      if (in) chosen.push_back(i);
      if (in && p.ops[i].constraint == Constraint::kMustNotApply) allowed = false;
      if (!in && p.ops[i].constraint == Constraint::kMustApply) allowed = false;
    }
    if (!allowed) continue;
    do {
      std::vector<std::size_t> pos(n, n);
      for (std::size_t i = 0; i < chosen.size(); ++i) pos[chosen[i]] = i;
      bool order_ok = true;
      for (const auto& [a, b] : p.precedes) {
        if (pos[b] != n && (pos[a] == n || pos[a] > pos[b])) order_ok = false;
      }
      if (!order_ok) continue;
      std::vector<std::uint64_t> words = p.initial;
      bool applies = true;
      for (std::size_t i : chosen) {
        for (const auto& t : p.ops[i].targets) applies = applies && words[t.address.index] == t.expected.raw();
        if (!applies) break;
        for (const auto& t : p.ops[i].targets) words[t.address.index] = t.desired.raw();
      }
      if (applies && words == p.final) return true;
    } while (std::next_permutation(chosen.begin(), chosen.end()));
  }
  return false;
}

TEST(Oracle, AgreesWithBruteForce) {
  std::mt19937_64 rng{11};
  int found = 0;
  for (int trial = 0; trial < 400; ++trial) {
    OracleProblem p;
    const std::size_t words = 3;
    const std::size_t n = 1 + rng() % 4;
    p.initial.assign(words, P(0));
    for (std::size_t i = 0; i < n; ++i) {
      OracleOp op;
      op.constraint = static_cast<Constraint>(rng() % 3);
      for (std::uint64_t w = 0; w < words; ++w) {
        if (rng() % 2 == 0 && !(w + 1 == words && op.targets.empty())) continue;
        const std::uint64_t e = rng() % 2;
        op.targets.push_back({WordAddress{w}, TaggedWord::FromPayload(e), TaggedWord::FromPayload(e + 1)});
      }
      p.ops.push_back(std::move(op));
    }
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        // Precedence only ever names returned (must-apply) ops as predecessors.
        if (a != b && p.ops[a].constraint == Constraint::kMustApply && rng() % 4 == 0) p.precedes.emplace_back(a, b);
      }
    }
    // Half the finals come from applying a random sequence of ops, the rest are arbitrary.
    p.final = p.initial;
    if (rng() % 2 == 0) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& op = p.ops[rng() % n];
        bool applies = true;
        for (const auto& t : op.targets) applies = applies && p.final[t.address.index] == t.expected.raw();
        if (!applies) continue;
        for (const auto& t : op.targets) p.final[t.address.index] = t.desired.raw();
      }
    } else {
      for (std::size_t w = 0; w < words; ++w) p.final[w] = P(rng() % 3);
    }
    const bool brute = BruteForce(p);
    const auto witness = FindWitness(p);
    ASSERT_EQ(brute, witness.has_value()) << "trial " << trial;
    found += brute;
  }
  EXPECT_GT(found, 40);
  EXPECT_LT(found, 360);
}

}  // namespace
}  // namespace pmwcas::harness
