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
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pmwcas/descriptor.hpp"
#include "pmwcas/errors.hpp"
#include "pmwcas/harness/scheduler.hpp"
#include "pmwcas/layout.hpp"
#include "pmwcas/pmwcas.hpp"
#include "pmwcas/simulated_heap.hpp"

namespace pmwcas::harness {

/**
 * One operation of a worker script. With `expected`/`desired` empty the
 * operation is an increment: read every target, try +1 on all of them,
 * and retry until it commits. Otherwise it is attempted exactly once with
 * the given payloads.
 */
struct OpSpec {
  std::vector<std::uint64_t> words;
  std::vector<std::uint64_t> expected;
  std::vector<std::uint64_t> desired;

  bool increment() const { return expected.empty(); }
};

/// A closed, deterministic workload for the model checker.
struct Scenario {
  Algorithm algorithm{Algorithm::kNoDirtyFlags};
  HeapLayout layout{};
  std::vector<std::uint64_t> initial;  ///< Payload per data word; missing entries are 0.
  std::vector<std::vector<OpSpec>> workers;
  /// Replaces the scripted workers when set (used to drive arbitrary programs).
  std::function<std::vector<WorkerProgram>()> custom_programs;

  void Validate() const {
    layout.Validate();
    if (initial.size() > layout.word_capacity) throw ContractViolation("more initial values than words");
    if (custom_programs) return;
    if (workers.size() > layout.worker_slots) throw ContractViolation("more workers than descriptor slots");
    for (const auto& ops : workers) {
      for (const auto& op : ops) {
        if (op.words.empty()) throw ContractViolation("operation without targets");
        if (op.words.size() > layout.max_targets) throw ContractViolation("operation exceeds max_targets");
        if (algorithm == Algorithm::kPcas && op.words.size() != 1) {
          throw ContractViolation("PCAS operations target exactly one word");
        }
        if (!op.increment() && (op.expected.size() != op.words.size() || op.desired.size() != op.words.size())) {
          throw ContractViolation("expected/desired must match the target list");
        }
        for (std::uint64_t w : op.words) {
          if (w >= layout.word_capacity) throw AddressError("target word " + std::to_string(w) + " out of range");
        }
      }
    }
  }

  std::uint64_t InitialPayload(std::uint64_t word) const { return word < initial.size() ? initial[word] : 0; }

  /// Raw initial contents of the data words.
  std::vector<std::uint64_t> InitialWords() const {
    std::vector<std::uint64_t> out;
    for (std::uint64_t i = 0; i < layout.word_capacity; ++i) {
      out.push_back(TaggedWord::FromPayload(InitialPayload(i)).raw());
    }
    return out;
  }

  /// Clean heap (cache == durable) holding the initial payloads.
  SimulatedHeap InitialHeap() const {
    Validate();
    SimulatedHeap heap{layout, algorithm};
    for (std::uint64_t i = 0; i < layout.word_capacity; ++i) {
      heap.Store(WordAddress{i}, TaggedWord::FromPayload(InitialPayload(i)));
      heap.Persist(WordAddress{i});
    }
    return heap;
  }

  std::vector<WorkerProgram> Programs() const {
    if (custom_programs) return custom_programs();
    std::vector<WorkerProgram> programs;
    for (const auto& ops : workers) {
      programs.push_back([ops, algorithm = algorithm](WorkerContext& ctx) { RunScript(ctx, ops, algorithm); });
    }
    return programs;
  }

  static bool Attempt(WorkerContext& ctx, std::span<const TargetEntry> targets, Algorithm algorithm) {
    ctx.BeginAttempt(algorithm == Algorithm::kPcas, targets);
    bool ok = false;
    if (algorithm == Algorithm::kPcas) {
      ok = Pcas(ctx.memory(), targets[0].address, targets[0].expected, targets[0].desired);
    } else {
      Descriptor desc{static_cast<DescriptorSlot>(ctx.worker())};
      for (const auto& t : targets) desc.AddTarget(t.address, t.expected, t.desired);
      ok = ExecutePmwcas(ctx.memory(), desc, algorithm);
    }
    ctx.EndAttempt(ok);
    return ok;
  }

  static void RunScript(WorkerContext& ctx, const std::vector<OpSpec>& ops, Algorithm algorithm) {
    std::vector<TargetEntry> targets;
    for (std::size_t pos = 0; pos < ops.size(); ++pos) {
      const OpSpec& op = ops[pos];
      ctx.MarkQuiescent(pos);
      if (!op.increment()) {
        targets.clear();
        for (std::size_t i = 0; i < op.words.size(); ++i) {
          targets.push_back({WordAddress{op.words[i]}, TaggedWord::FromPayload(op.expected[i]),
                             TaggedWord::FromPayload(op.desired[i])});
        }
        Attempt(ctx, targets, algorithm);
        continue;
      }
      while (true) {
        ctx.MarkQuiescent(pos);
        targets.clear();
        for (std::uint64_t w : op.words) {
          const TaggedWord current = ReadWord(ctx.memory(), WordAddress{w});
          targets.push_back({WordAddress{w}, current, TaggedWord::FromPayload(current.payload() + 1)});
        }
        if (Attempt(ctx, targets, algorithm)) break;
      }
    }
  }
};

enum class Overlap : std::uint8_t {
  kShifted,    ///< Worker w targets words w*(k-1) .. w*(k-1)+k-1 (mod words): neighbours share one word.
  kIdentical,  ///< Every worker targets words 0 .. k-1.
};

/**
 * `workers` workers, each incrementing `k` words once (retrying until it
 * commits). Targets are kept in ascending order, the global embedding
 * order. One word per cache line unless `block_size` says otherwise.
 */
inline Scenario MakeIncrementScenario(Algorithm algorithm, std::uint32_t workers, std::uint32_t k,
                                      std::uint64_t words, Overlap overlap = Overlap::kShifted,
                                      std::uint32_t ops_per_worker = 1, std::uint32_t block_size = 64) {
  if (k == 0 || k > words) throw ContractViolation("need 1 <= targets <= words");
  if (algorithm == Algorithm::kPcas && k != 1) throw ContractViolation("PCAS operations target exactly one word");
  Scenario s;
  s.algorithm = algorithm;
  s.layout.word_capacity = words;
  s.layout.block_size = block_size;
  s.layout.worker_slots = workers;
  s.layout.max_targets = k;
  for (std::uint32_t w = 0; w < workers; ++w) {
    OpSpec op;
    for (std::uint32_t j = 0; j < k; ++j) {
      const std::uint64_t base = overlap == Overlap::kShifted ? std::uint64_t{w} * (k - 1) : 0;
      op.words.push_back((base + j) % words);
    }
    std::sort(op.words.begin(), op.words.end());
    op.words.erase(std::unique(op.words.begin(), op.words.end()), op.words.end());
    s.workers.push_back(std::vector<OpSpec>(ops_per_worker, op));
  }
  return s;
}

}  // namespace pmwcas::harness
