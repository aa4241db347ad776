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
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "pmwcas/atomic_heap.hpp"
#include "pmwcas/bench/workload.hpp"
#include "pmwcas/bench/zipf.hpp"
#include "pmwcas/descriptor.hpp"
#include "pmwcas/errors.hpp"
#include "pmwcas/layout.hpp"
#include "pmwcas/pmwcas.hpp"
#include "pmwcas/stats.hpp"

namespace pmwcas::bench {

enum class Backend : std::uint8_t {
  kDram,  ///< Anonymous memory; persist is a fence.
  kReal,  ///< Memory-mapped heap file; persist flushes cache lines.
};

constexpr std::string_view ToString(Backend b) { return b == Backend::kDram ? "dram" : "real"; }

inline Backend ParseBackend(std::string_view s) {
  if (s == "dram") return Backend::kDram;
  if (s == "real") return Backend::kReal;
  throw ContractViolation("unknown backend '" + std::string(s) + "' (dram, real)");
}

struct BenchConfig {
  Algorithm algorithm{Algorithm::kNoDirtyFlags};
  std::uint32_t threads{1};
  std::uint32_t k{1};
  std::uint64_t words{1'000'000};
  double alpha{0.0};
  std::uint32_t block_size{256};
  double timeout_s{10.0};
  /// Per-thread cap on succeeded operations.
  std::uint64_t max_ops{1'000'000};
  std::uint64_t seed{1};
  Backend backend{Backend::kDram};
  TargetOrder order{TargetOrder::kIndex};
  /// Heap file for the real backend; empty means a temporary file.
  std::string heap_path;

  bool operator==(const BenchConfig&) const = default;

  HeapLayout Layout() const {
    HeapLayout l;
    l.word_capacity = words;
    l.block_size = block_size;
    l.worker_slots = threads;
    l.max_targets = std::max(k, kDefaultMaxTargets);
    return l;
  }

  void Validate() const {
    if (threads == 0) throw ContractViolation("threads must be >= 1");
    if (k == 0 || k > kMaxTargetsLimit) {
      throw ContractViolation("targets must be in [1, " + std::to_string(kMaxTargetsLimit) + "]");
    }
    if (algorithm == Algorithm::kPcas && k != 1) throw ContractViolation("pcas requires targets = 1");
    if (k > words) throw ContractViolation("targets exceed the number of words");
    if (!(alpha >= 0)) throw ContractViolation("alpha must be >= 0");
    if (!(timeout_s > 0)) throw ContractViolation("timeout must be positive");
    Layout().Validate();
  }
};

struct BenchReport {
  BenchConfig config;
  std::uint64_t succeeded{0};
  /// Attempts that returned false and were retried.
  std::uint64_t failed{0};
  double elapsed_s{0};
  double throughput{0};
  std::uint64_t p1_ns{0};
  std::uint64_t p50_ns{0};
  std::uint64_t p99_ns{0};
  OpStats stats;
  /// Post-run heap checks.
  std::uint64_t payload_sum{0};
  std::uint64_t tagged_words{0};

  bool SumInvariantHolds() const { return payload_sum == std::uint64_t{config.k} * succeeded && tagged_words == 0; }

  bool operator==(const BenchReport&) const = default;
};

/// Fixed-size uniform sample of a stream (Algorithm R).
class Reservoir {
 public:
  Reservoir(std::size_t capacity, std::uint64_t seed) : capacity_{capacity}, rng_{seed} {
    samples_.reserve(capacity);
  }

  void Add(std::uint64_t v) {
    ++seen_;
    if (samples_.size() < capacity_) {
      samples_.push_back(v);
      return;
    }
    const std::uint64_t j = std::uniform_int_distribution<std::uint64_t>{0, seen_ - 1}(rng_);
    if (j < capacity_) samples_[j] = v;
  }

  std::uint64_t seen() const { return seen_; }
  const std::vector<std::uint64_t>& samples() const { return samples_; }

 private:
  std::size_t capacity_;
  std::mt19937_64 rng_;
  std::vector<std::uint64_t> samples_;
  std::uint64_t seen_{0};
};

/**
 * Nearest-rank percentile over several reservoirs, each sample weighted
 * by how many stream elements it stands for.
 */
inline std::uint64_t WeightedPercentile(const std::vector<Reservoir>& reservoirs, double p) {
  std::vector<std::pair<std::uint64_t, double>> points;
  double total = 0;
  for (const auto& r : reservoirs) {
    if (r.samples().empty()) continue;
    const double w = static_cast<double>(r.seen()) / static_cast<double>(r.samples().size());
    for (std::uint64_t v : r.samples()) points.emplace_back(v, w);
    total += static_cast<double>(r.seen());
  }
  if (points.empty()) return 0;
  std::sort(points.begin(), points.end());
  const double target = p * total;
  double cumulative = 0;
  for (const auto& [v, w] : points) {
    cumulative += w;
    if (cumulative >= target) return v;
  }
  return points.back().first;
}

namespace detail {

struct WorkerResult {
  std::uint64_t succeeded{0};
  std::uint64_t failed{0};
  OpStats stats;
};

inline std::uint64_t WorkerSeed(std::uint64_t seed, std::uint64_t worker, std::uint64_t stream) {
  std::seed_seq seq{seed, worker, stream};
  std::uint64_t out = 0;
  seq.generate(reinterpret_cast<std::uint32_t*>(&out), reinterpret_cast<std::uint32_t*>(&out) + 2);
  return out;
}

}  // namespace detail

inline constexpr std::size_t kReservoirCapacity = 16384;

/**
 * Runs the increment workload on an existing heap whose words hold
 * payloads: every thread repeatedly draws k targets, reads them, and
 * retries the PMwCAS (or PCAS) with fresh reads until it commits, until
 * it has `max_ops` successes or the timeout fires. Latency spans the
 * whole operation including retries. Afterwards the heap is scanned for
 * the sum invariant and leftover tags.
 */
inline BenchReport RunBench(const BenchConfig& config, AtomicHeap& heap) {
  config.Validate();
  if (heap.layout().word_capacity < config.words || heap.layout().worker_slots < config.threads ||
      heap.layout().max_targets < config.k) {
    throw ContractViolation("heap is too small for this configuration");
  }
  std::uint64_t sum_before = 0;
  for (std::uint64_t i = 0; i < config.words; ++i) sum_before += heap.Load(WordAddress{i}).payload();

  const ZipfSampler sampler{config.words, config.alpha};
  const RankPermutation permutation{config.words, config.seed};
  const OpBuilder builder{sampler, permutation, config.k, config.order};

  std::vector<detail::WorkerResult> results(config.threads);
  std::vector<Reservoir> reservoirs;
  for (std::uint32_t t = 0; t < config.threads; ++t) {
    reservoirs.emplace_back(kReservoirCapacity, detail::WorkerSeed(config.seed, t, 2));
  }
  std::atomic<bool> stop{false};
  std::atomic<std::uint32_t> running{config.threads};

  const auto worker = [&](std::uint32_t t) {
    std::mt19937_64 rng{detail::WorkerSeed(config.seed, t, 1)};
    detail::WorkerResult& r = results[t];
    Descriptor desc{static_cast<DescriptorSlot>(t)};
    std::vector<DraftTarget> draft;
    while (r.succeeded < config.max_ops && !stop.load(std::memory_order_relaxed)) {
      builder.Build(rng, draft);
      const auto start = std::chrono::steady_clock::now();
      bool done = false;
      while (!done) {
        desc.Clear();
        for (const auto& d : draft) {
          const TaggedWord current = ReadWord(heap, d.address, {}, r.stats);
          desc.AddTarget(d.address, current, TaggedWord::FromPayload(current.payload() + 1));
        }
        if (config.algorithm == Algorithm::kPcas) {
          const auto& t0 = desc.targets()[0];
          done = Pcas(heap, t0.address, t0.expected, t0.desired, r.stats);
        } else {
          done = ExecutePmwcas(heap, desc, config.algorithm, r.stats);
        }
        if (!done) {
          ++r.failed;
          if (stop.load(std::memory_order_relaxed)) break;
        }
      }
      if (!done) break;
      const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start);
      reservoirs[t].Add(static_cast<std::uint64_t>(ns.count()));
      ++r.succeeded;
    }
    running.fetch_sub(1, std::memory_order_release);
  };

  const auto start = std::chrono::steady_clock::now();
  std::vector<std::thread> pool;
  for (std::uint32_t t = 0; t < config.threads; ++t) pool.emplace_back(worker, t);
  const auto deadline = start + std::chrono::duration<double>(config.timeout_s);
  while (running.load(std::memory_order_acquire) != 0 && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::microseconds(200));
  }
  stop.store(true, std::memory_order_relaxed);
  for (auto& th : pool) th.join();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  BenchReport report;
  report.config = config;
  for (const auto& r : results) {
    report.succeeded += r.succeeded;
    report.failed += r.failed;
    report.stats += r.stats;
  }
  report.elapsed_s = elapsed;
  report.throughput = elapsed > 0 ? static_cast<double>(report.succeeded) / elapsed : 0;
  report.p1_ns = WeightedPercentile(reservoirs, 0.01);
  report.p50_ns = WeightedPercentile(reservoirs, 0.50);
  report.p99_ns = WeightedPercentile(reservoirs, 0.99);

  std::uint64_t sum_after = 0;
  for (std::uint64_t i = 0; i < config.words; ++i) {
    const TaggedWord w = heap.Load(WordAddress{i});
    if (w.IsPayload()) {
      sum_after += w.payload();
    } else {
      ++report.tagged_words;
    }
  }
  report.payload_sum = sum_after - sum_before;
  return report;
}

/// Creates a heap for the configured backend, runs the workload, and shuts the heap down cleanly.
inline BenchReport RunBench(const BenchConfig& config) {
  config.Validate();
  if (config.backend == Backend::kDram) {
    AtomicHeap heap = AtomicHeap::CreateVolatile(config.Layout(), config.algorithm);
    return RunBench(config, heap);
  }
  const bool temporary = config.heap_path.empty();
  const std::filesystem::path path =
      temporary ? std::filesystem::temp_directory_path() / ("pmwcas-bench-" + std::to_string(::getpid()) + ".heap")
                : std::filesystem::path{config.heap_path};
  BenchReport report;
  {
    AtomicHeap heap = AtomicHeap::CreateFile(path, config.Layout(), config.algorithm);
    report = RunBench(config, heap);
  }
  if (temporary) std::filesystem::remove(path);
  return report;
}

}  // namespace pmwcas::bench
