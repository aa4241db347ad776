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
#include <filesystem>
#include <string>
#include <vector>

#include "pmwcas/atomic_heap.hpp"
#include "pmwcas/bench/report.hpp"
#include "pmwcas/bench/runner.hpp"
#include "pmwcas/errors.hpp"

namespace pmwcas::bench {
namespace {

BenchConfig Small() {
  BenchConfig c;
  c.words = 64;
  c.k = 3;
  c.alpha = 1.0;
  c.block_size = 64;
  c.max_ops = 2000;
  c.timeout_s = 30;
  return c;
}

TEST(Bench, SumInvariantSingleThread) {
  for (Algorithm alg : {Algorithm::kNoDirtyFlags, Algorithm::kDirtyFlags, Algorithm::kPcas}) {
    BenchConfig c = Small();
    c.algorithm = alg;
    if (alg == Algorithm::kPcas) c.k = 1;
    const BenchReport r = RunBench(c);
    EXPECT_EQ(r.succeeded, c.max_ops);
    EXPECT_EQ(r.failed, 0u);
    EXPECT_TRUE(r.SumInvariantHolds()) << ToString(alg);
    EXPECT_LE(r.p1_ns, r.p50_ns);
    EXPECT_LE(r.p50_ns, r.p99_ns);
    EXPECT_GT(r.throughput, 0);
  }
}

TEST(Bench, SumInvariantContended) {
  for (Algorithm alg : {Algorithm::kNoDirtyFlags, Algorithm::kDirtyFlags}) {
    for (TargetOrder order : {TargetOrder::kIndex, TargetOrder::kContendedFirst}) {
      BenchConfig c = Small();
      c.algorithm = alg;
      c.order = order;
      c.threads = 4;
      c.words = 8;
      c.max_ops = 1000;
      const BenchReport r = RunBench(c);
      EXPECT_EQ(r.succeeded, 4 * c.max_ops);
      EXPECT_TRUE(r.SumInvariantHolds()) << ToString(alg) << " " << ToString(order);
    }
  }
}

TEST(Bench, SingleThreadRunsAreDeterministic) {
  BenchConfig c = Small();
  c.algorithm = Algorithm::kDirtyFlags;
  AtomicHeap a = AtomicHeap::CreateVolatile(c.Layout(), c.algorithm);
  AtomicHeap b = AtomicHeap::CreateVolatile(c.Layout(), c.algorithm);
  const BenchReport ra = RunBench(c, a);
  const BenchReport rb = RunBench(c, b);
  EXPECT_EQ(ra.stats, rb.stats);
  EXPECT_EQ(a.Snapshot(), b.Snapshot());
  c.seed = 2;
  AtomicHeap d = AtomicHeap::CreateVolatile(c.Layout(), c.algorithm);
  RunBench(c, d);
  EXPECT_NE(a.Snapshot(), d.Snapshot());
}

TEST(Bench, ConflictFreeStatsPerOperation) {
  BenchConfig c = Small();
  c.max_ops = 100;
  c.algorithm = Algorithm::kNoDirtyFlags;
  const BenchReport r = RunBench(c);
  EXPECT_EQ(r.stats.cas_count, 2 * c.k * r.succeeded);
  EXPECT_EQ(r.stats.flush_count, 2 * c.k * r.succeeded);
  EXPECT_EQ(r.stats.descriptor_persist_count, 2 * r.succeeded);
}

TEST(Bench, RealBackendUsesAFile) {
  BenchConfig c = Small();
  c.backend = Backend::kReal;
  c.max_ops = 200;
  c.heap_path = (std::filesystem::temp_directory_path() / ("pmwcas_bench_" + std::to_string(::getpid()))).string();
  const BenchReport r = RunBench(c);
  EXPECT_TRUE(r.SumInvariantHolds());
  bool clean = false;
  AtomicHeap heap = AtomicHeap::OpenFile(c.heap_path, &clean);
  EXPECT_TRUE(clean);
  heap.Close();
  std::filesystem::remove(c.heap_path);
}

TEST(Bench, ConfigValidation) {
  BenchConfig c = Small();
  c.algorithm = Algorithm::kPcas;
  EXPECT_THROW(c.Validate(), ContractViolation);
  c = Small();
  c.threads = 0;
  EXPECT_THROW(c.Validate(), ContractViolation);
  c = Small();
  c.k = 65;
  EXPECT_THROW(c.Validate(), ContractViolation);
  c = Small();
  c.block_size = 100;
  EXPECT_THROW(c.Validate(), ContractViolation);
  AtomicHeap tiny = AtomicHeap::CreateVolatile(Small().Layout(), Algorithm::kNoDirtyFlags);
  c = Small();
  c.threads = 2;
  EXPECT_THROW(RunBench(c, tiny), ContractViolation);
}

TEST(Reservoir, KeepsUniformSample) {
  Reservoir r{100, 1};
  for (std::uint64_t i = 0; i < 50; ++i) r.Add(i);
  EXPECT_EQ(r.samples().size(), 50u);
  for (std::uint64_t i = 50; i < 100000; ++i) r.Add(i);
  EXPECT_EQ(r.samples().size(), 100u);
  EXPECT_EQ(r.seen(), 100000u);
  double mean = 0;
  for (auto v : r.samples()) mean += static_cast<double>(v) / 100;
  EXPECT_NEAR(mean, 50000, 10000);
}

TEST(Reservoir, WeightedPercentiles) {
  std::vector<Reservoir> rs;
  rs.emplace_back(1000, 1);
  for (std::uint64_t v = 1; v <= 100; ++v) rs.back().Add(v);
  EXPECT_EQ(WeightedPercentile(rs, 0.01), 1u);
  EXPECT_EQ(WeightedPercentile(rs, 0.50), 50u);
  EXPECT_EQ(WeightedPercentile(rs, 0.99), 99u);
  // A second stream ten times larger, sampled down to 10 values of 1000.
  rs.emplace_back(10, 2);
  for (int i = 0; i < 1000; ++i) rs.back().Add(1000);
  EXPECT_EQ(WeightedPercentile(rs, 0.50), 1000u);
  EXPECT_EQ(WeightedPercentile({}, 0.5), 0u);
}

TEST(Report, CsvHeaderAndRows) {
  BenchReport r;
  r.config = Small();
  r.succeeded = 10;
  r.elapsed_s = 0.5;
  r.throughput = 20;
  const std::string csv = ToCsv({r, r});
  EXPECT_EQ(csv.substr(0, kCsvHeader.size()), kCsvHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  const std::string row = ToCsvRow(r);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(kCsvHeader.begin(), kCsvHeader.end(), ','));
  EXPECT_EQ(row.rfind("nodf,1,3,64,", 0), 0u);
}

TEST(Report, JsonRoundTrip) {
  BenchConfig c = Small();
  c.max_ops = 50;
  c.order = TargetOrder::kContendedFirst;
  const BenchReport r = RunBench(c);
  const auto text = ToJson(r).dump();
  EXPECT_EQ(ReportFromJson(nlohmann::json::parse(text)), r);
  EXPECT_EQ(ConfigFromJson(ToJson(c)), c);
}

TEST(Report, SweepExpandsCrossProduct) {
  const auto configs = ExpandSweep(Small(), {"threads=1,2;k=1,3"});
  ASSERT_EQ(configs.size(), 4u);
  EXPECT_EQ(configs[0].threads, 1u);
  EXPECT_EQ(configs[0].k, 1u);
  EXPECT_EQ(configs[1].k, 3u);
  EXPECT_EQ(configs[3].threads, 2u);
  EXPECT_EQ(configs[3].words, Small().words);
  EXPECT_EQ(ExpandSweep(Small(), {"algorithm=df,nodf", "alpha=0,0.5,1"}).size(), 6u);
  EXPECT_EQ(ExpandSweep(Small(), {}).size(), 1u);
  EXPECT_THROW(ExpandSweep(Small(), {"threads"}), ContractViolation);
  EXPECT_THROW(ExpandSweep(Small(), {"colour=red"}), ContractViolation);
  EXPECT_THROW(ExpandSweep(Small(), {"threads=x"}), ContractViolation);
}

}  // namespace
}  // namespace pmwcas::bench
