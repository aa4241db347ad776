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
#include <set>
#include <vector>

#include "pmwcas/harness/model_checker.hpp"
#include "pmwcas/harness/state_machine.hpp"

namespace pmwcas::harness {
namespace {

using S = Symbol;
constexpr auto C = DescriptorState::kCompleted;
constexpr auto F = DescriptorState::kFailed;
constexpr auto Su = DescriptorState::kSucceeded;

std::set<int> RowsOf(const Verdict& v, Algorithm variant) {
  const auto triples = v.Triples();
  const auto report = CheckStateMachine(triples, variant);
  EXPECT_TRUE(report.ok) << report.detail;
  return {report.rows_visited.begin(), report.rows_visited.end()};
}

// Runs worker 0 to completion, with no crash.
Verdict Solo(const Scenario& s) {
  CrashSchedule cs;
  auto sched = StartScheduler(s.InitialHeap(), s);
  while (!sched->Finished()) {
    cs.steps.push_back(Choice::Step(0));
    sched->Apply(Choice::Step(0));
  }
  return RunSchedule(s, cs);
}

TEST(StateMachine, ClassifiesTableRows) {
  EXPECT_EQ(ClassifyRow(Algorithm::kDirtyFlags, {S::kOld, S::kOld, std::nullopt}), 0);
  EXPECT_EQ(ClassifyRow(Algorithm::kDirtyFlags, {S::kNew, S::kNew, C}), 0);
  EXPECT_EQ(ClassifyRow(Algorithm::kDirtyFlags, {S::kDesc, S::kOld, F}), 1);
  EXPECT_EQ(ClassifyRow(Algorithm::kDirtyFlags, {S::kDesc, S::kDesc, Su}), 7);
  EXPECT_EQ(ClassifyRow(Algorithm::kDirtyFlags, {S::kNewDirty, S::kDesc, Su}), 8);
  EXPECT_EQ(ClassifyRow(Algorithm::kDirtyFlags, {S::kNew, S::kNewDirty, Su}), 10);
  EXPECT_EQ(ClassifyRow(Algorithm::kDirtyFlags, {S::kDesc, S::kOldDirty, Su}), 11);
  EXPECT_EQ(ClassifyRow(Algorithm::kNoDirtyFlags, {S::kNew, S::kDesc, Su}), 5);
  EXPECT_EQ(ClassifyRow(Algorithm::kNoDirtyFlags, {S::kOld, S::kDesc, F}), 3);
  EXPECT_EQ(ClassifyRow(Algorithm::kNoDirtyFlags, {S::kDesc, S::kOtherDesc, Su}), 6);
  EXPECT_EQ(ClassifyRow(Algorithm::kPcas, {S::kNewDirty, S::kOld, Su}), 8);
}

TEST(StateMachine, RejectsIllegalTriples) {
  // Word already new in cache while durable memory is old under Succeeded: a lost persist.
  EXPECT_FALSE(ClassifyRow(Algorithm::kNoDirtyFlags, {S::kNew, S::kOld, Su}));
  EXPECT_FALSE(ClassifyRow(Algorithm::kDirtyFlags, {S::kNew, S::kOld, Su}));
  EXPECT_FALSE(ClassifyRow(Algorithm::kDirtyFlags, {S::kDesc, S::kOld, Su}));
  EXPECT_FALSE(ClassifyRow(Algorithm::kNoDirtyFlags, {S::kOldDirty, S::kOld, F}));
  EXPECT_FALSE(ClassifyRow(Algorithm::kPcas, {S::kDesc, S::kOld, F}));
}

TEST(StateMachine, EdgesAndSelfLoops) {
  EXPECT_TRUE(IsAllowedEdge(Algorithm::kDirtyFlags, 0, 1));
  EXPECT_TRUE(IsAllowedEdge(Algorithm::kDirtyFlags, 4, 4));
  EXPECT_FALSE(IsAllowedEdge(Algorithm::kDirtyFlags, 1, 0));
  EXPECT_TRUE(IsAllowedEdge(Algorithm::kNoDirtyFlags, 1, 0));
  EXPECT_FALSE(IsAllowedEdge(Algorithm::kNoDirtyFlags, 0, 5));
  const std::vector<std::vector<Triple>> bad{{{S::kOld, S::kOld, F}, {S::kDesc, S::kDesc, Su}}};
  EXPECT_FALSE(CheckStateMachine(bad, Algorithm::kDirtyFlags).ok);
  EXPECT_EQ(TableRows(Algorithm::kDirtyFlags).size(), 12u);
  EXPECT_EQ(TableRows(Algorithm::kNoDirtyFlags).size(), 7u);
  EXPECT_EQ(TableRows(Algorithm::kPcas), (std::vector<int>{0, 8, 9, 10}));
}

TEST(StateMachine, UncontendedDirtyFlagSuccess) {
  const Scenario s = MakeIncrementScenario(Algorithm::kDirtyFlags, 1, 2, 4);
  const Verdict v = Solo(s);
  ASSERT_TRUE(v.ok) << v.failure;
  const std::set<int> rows = RowsOf(v, Algorithm::kDirtyFlags);
  const std::set<int> allowed{0, 1, 2, 7, 8, 9, 10};
  EXPECT_TRUE(std::includes(allowed.begin(), allowed.end(), rows.begin(), rows.end()));
  EXPECT_TRUE(rows.contains(7));
}

TEST(StateMachine, UncontendedNoDirtyFlagFailure) {
  Scenario s;
  s.algorithm = Algorithm::kNoDirtyFlags;
  s.layout = MakeIncrementScenario(Algorithm::kNoDirtyFlags, 1, 2, 4).layout;
  s.initial = {0, 5};
  s.workers = {{OpSpec{{0, 1}, {0, 0}, {1, 1}}}};
  const Verdict v = Solo(s);
  ASSERT_TRUE(v.ok) << v.failure;
  ASSERT_EQ(v.attempts.size(), 1u);
  EXPECT_EQ(v.attempts[0].record.result, false);
  const std::set<int> rows = RowsOf(v, Algorithm::kNoDirtyFlags);
  const std::set<int> allowed{0, 1, 2, 3};
  EXPECT_TRUE(std::includes(allowed.begin(), allowed.end(), rows.begin(), rows.end()));
  EXPECT_TRUE(rows.contains(1));
}

TEST(StateMachine, PcasStaysInItsRows) {
  const Scenario s = MakeIncrementScenario(Algorithm::kPcas, 1, 1, 2);
  const Verdict v = Solo(s);
  ASSERT_TRUE(v.ok) << v.failure;
  const std::set<int> rows = RowsOf(v, Algorithm::kPcas);
  EXPECT_EQ(rows, (std::set<int>{0, 8, 9, 10}));
}

}  // namespace
}  // namespace pmwcas::harness
