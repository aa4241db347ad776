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

#include <boost/context/fiber.hpp>
#include <boost/context/fixedsize_stack.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmwcas/descriptor.hpp"
#include "pmwcas/errors.hpp"
#include "pmwcas/harness/events.hpp"
#include "pmwcas/harness/hashing.hpp"
#include "pmwcas/memory.hpp"
#include "pmwcas/simulated_heap.hpp"

namespace pmwcas::harness {

/// One scheduling decision: let a worker execute its pending event, or evict a cache line.
struct Choice {
  enum class Kind : std::uint8_t { kStep, kEvict };
  Kind kind{Kind::kStep};
  std::uint64_t value{0};  ///< Worker index or line number.

  static Choice Step(std::uint64_t worker) { return {Kind::kStep, worker}; }
  static Choice Evict(std::uint64_t line) { return {Kind::kEvict, line}; }
  bool operator==(const Choice&) const = default;
};

struct AttemptId {
  std::uint32_t worker{0};
  std::uint32_t seq{0};

  auto operator<=>(const AttemptId&) const = default;
};

/// One PMwCAS or PCAS invocation as seen by the scheduler.
struct AttemptRecord {
  AttemptId id;
  bool pcas{false};
  std::vector<TargetEntry> targets;
  std::uint64_t invoke_step{0};
  std::optional<std::uint64_t> return_step;
  std::optional<bool> result;
  /// Cache-view state; PCAS attempts go Failed -> Succeeded (flagged CAS landed) -> Completed.
  std::optional<DescriptorState> state;
  /// Attempts that had returned when this one was invoked.
  std::vector<AttemptId> predecessors;
};

struct SchedulerOptions {
  /// Assert after every non-persist event that the durable view did not move.
  bool check_durable_unchanged{false};
};

class VirtualScheduler;
class WorkerContext;

using WorkerProgram = std::function<void(WorkerContext&)>;

/**
 * PersistentMemory handed to one worker. Every shared-memory access first
 * suspends the worker's fiber, publishing the access as its pending event;
 * the access runs against the heap only when the scheduler picks it.
 */
class HarnessMemory {
 public:
  HarnessMemory(VirtualScheduler& scheduler, std::uint32_t worker) : scheduler_{&scheduler}, worker_{worker} {}

  const HeapLayout& layout() const;
  BackoffPolicy backoff_policy() const { return BackoffPolicy::None(); }

  TaggedWord Load(WordAddress a);
  void Store(WordAddress a, TaggedWord w);
  TaggedWord Cas(WordAddress a, TaggedWord expected, TaggedWord desired);
  void Persist(WordAddress a);
  void InitDescriptor(DescriptorSlot s, std::span<const TargetEntry> targets);
  void StoreState(DescriptorSlot s, DescriptorState st);
  void PersistDescriptor(DescriptorSlot s);
  DescriptorImage ReadDescriptor(DescriptorSlot s);
  bool TryAcquireSlot(DescriptorSlot s);
  void ReleaseSlot(DescriptorSlot s);

 private:
  VirtualScheduler* scheduler_;
  std::uint32_t worker_;
};

/// What a worker program sees: its memory plus attempt bookkeeping for the oracles.
class WorkerContext {
 public:
  WorkerContext(VirtualScheduler& scheduler, std::uint32_t worker)
      : scheduler_{&scheduler}, worker_{worker}, memory_{scheduler, worker} {}

  std::uint32_t worker() const { return worker_; }
  HarnessMemory& memory() { return memory_; }

  void BeginAttempt(bool pcas, std::span<const TargetEntry> targets);
  void EndAttempt(bool result);

  /**
   * Declares that the worker's future behaviour depends only on
   * `position` (no other local state is live). Runs that reach the same
   * position with equal shared state are then treated as one state.
   */
  void MarkQuiescent(std::uint64_t position);

 private:
  VirtualScheduler* scheduler_;
  std::uint32_t worker_;
  HarnessMemory memory_;
};

/**
 * Deterministic interleaving of worker programs over a SimulatedHeap.
 * Each worker runs on its own fiber and stops before every memory event;
 * Apply() advances exactly one worker by one event (or evicts one line).
 * Everything runs on the caller's thread.
 *
 * A worker that last loaded (or failed to CAS) a busy word and is about to
 * load the same unchanged word again is blocked: the reload would return
 * the same value and lead back to the same state.
 *
 * Monitors record the first violation of: TTAS (a CAS must follow the
 * worker's own load of the word that saw a payload), isolation (only the
 * worker that installed a descriptor or flagged value may store to that
 * word), legal descriptor state transitions, worker exceptions and,
 * optionally, durable-view stability between flushes.
 *
 * Not copyable or movable: fibers refer back to the scheduler.
 */
class VirtualScheduler {
 public:
  VirtualScheduler(const SimulatedHeap& initial, std::vector<WorkerProgram> programs, SchedulerOptions options = {})
      : heap_{initial},
        options_{options},
        frames_(initial.layout().word_capacity),
        owners_(initial.layout().word_capacity) {
    workers_.reserve(programs.size());
    for (std::uint32_t i = 0; i < programs.size(); ++i) {
      workers_.push_back(std::make_unique<Worker>(*this, i, std::move(programs[i])));
    }
    for (auto& w : workers_) Start(*w);
    if (!options_.check_durable_unchanged) return;
    durable_checksum_ = heap_.DurableChecksum();
  }

  ~VirtualScheduler() {
    // Unwind suspended fibers while the heap they reference is alive.
    for (auto& w : workers_) w->fiber = {};
  }

  VirtualScheduler(const VirtualScheduler&) = delete;
  VirtualScheduler& operator=(const VirtualScheduler&) = delete;

  std::size_t worker_count() const { return workers_.size(); }
  const SimulatedHeap& heap() const { return heap_; }
  SimulatedHeap& heap() { return heap_; }
  std::uint64_t steps() const { return steps_; }

  bool Done(std::size_t w) const { return workers_.at(w)->done; }
  bool Finished() const {
    for (const auto& w : workers_) {
      if (!w->done) return false;
    }
    return true;
  }

  const std::optional<MemoryEvent>& Pending(std::size_t w) const { return workers_.at(w)->pending; }

  bool Enabled(std::size_t w) const {
    const Worker& wk = *workers_.at(w);
    if (wk.done || !wk.pending) return false;
    const MemoryEvent& next = *wk.pending;
    if (next.kind != EventKind::kLoad || !wk.last) return true;
    const MemoryEvent& last = *wk.last;
    const bool spun = (last.kind == EventKind::kLoad || last.kind == EventKind::kCas) && last.target == next.target &&
                      !TaggedWord::FromRaw(last.result).IsPayload();
    return !(spun && heap_.CacheWord(WordAddress{next.target}).raw() == last.result);
  }

  /// Not finished, yet no worker can move.
  bool Deadlocked() const {
    if (Finished()) return false;
    for (std::size_t w = 0; w < workers_.size(); ++w) {
      if (Enabled(w)) return false;
    }
    return true;
  }

  /// Enabled worker steps, then (optionally) evictions of data-word lines that differ from durable memory.
  std::vector<Choice> Choices(bool with_evictions) const {
    std::vector<Choice> out;
    for (std::size_t w = 0; w < workers_.size(); ++w) {
      if (Enabled(w)) out.push_back(Choice::Step(w));
    }
    if (with_evictions) {
      const std::uint64_t first = HeapLayout::LineOf(heap_.layout().DataOffset());
      for (std::uint64_t line : heap_.DivergentLines()) {
        if (line >= first) out.push_back(Choice::Evict(line));
      }
    }
    return out;
  }

  void Apply(Choice c) {
    ++steps_;
    if (c.kind == Choice::Kind::kEvict) {
      if (c.value >= heap_.line_count() || !heap_.IsLineDirty(c.value)) {
        throw HarnessError("cannot evict clean line " + std::to_string(c.value));
      }
      heap_.EvictLine(c.value);
      if (options_.check_durable_unchanged) durable_checksum_ = heap_.DurableChecksum();
      return;
    }
    if (c.value >= workers_.size() || !Enabled(c.value)) {
      throw HarnessError("worker " + std::to_string(c.value) + " is not enabled at step " + std::to_string(steps_));
    }
    Worker& wk = *workers_[c.value];
    wk.fiber = std::move(wk.fiber).resume();
  }

  /// First monitor violation, if any.
  const std::optional<std::string>& violation() const { return violation_; }

  /// Attempts in invocation order (stable for a given choice sequence).
  const std::vector<AttemptRecord>& attempts() const { return attempts_; }

  const AttemptRecord* CurrentAttempt(std::size_t w) const {
    const Worker& wk = *workers_.at(w);
    return wk.current < 0 ? nullptr : &attempts_[static_cast<std::size_t>(wk.current)];
  }

  /// Last attempt that installed a descriptor or flagged value into the word.
  const AttemptRecord* LastEmbedder(WordAddress addr) const {
    const auto& f = frames_.at(addr.index);
    return f ? &attempts_[*f] : nullptr;
  }

  /**
   * Identity of the global state: heap views, worker histories since their
   * last quiescent point, and the attempts that can still matter (returned
   * true or still open). Attempts that returned false took no effect and
   * are left out, as are attempt sequence numbers.
   */
  Hash128 StateKey() const {
    StateHasher h;
    AddHeap(h);
    for (const auto& w : workers_) h.Add(w->history).Add(w->done ? 1 : 0);
    const auto canonical = CanonicalIds();
    for (std::size_t i = 0; i < attempts_.size(); ++i) {
      if (canonical[i] == kIrrelevant) continue;
      const AttemptRecord& a = attempts_[i];
      h.Add(canonical[i]).Add(a.result ? (*a.result ? 2 : 1) : 0);
      h.Add(a.state ? static_cast<std::uint64_t>(*a.state) : 9);
      AddTargets(h, a);
      for (const AttemptId& p : a.predecessors) {
        const std::size_t j = IndexOf(p);
        if (canonical[j] != kIrrelevant) h.Add(canonical[j]);
      }
      h.Add(~0ull);
    }
    for (const auto& f : frames_) {
      if (!f) {
        h.Add(~0ull);
        continue;
      }
      const AttemptRecord& a = attempts_[*f];
      h.Add(a.id.worker).Add(a.state ? static_cast<std::uint64_t>(*a.state) : 9).Add(a.pcas ? 1 : 0);
      AddTargets(h, a);
    }
    return h.Finish();
  }

  /**
   * Cell ranges [first, last) that can ever differ from zero: the live
   * descriptor slots and the data area. The header page is never written
   * by workers.
   */
  std::array<std::pair<std::size_t, std::size_t>, 2> LiveCells() const {
    const HeapLayout& l = heap_.layout();
    const std::size_t slots_begin = l.DescriptorAreaOffset() / 8;
    const std::size_t slots_end = slots_begin + l.DescriptorSlotBytes() * l.worker_slots / 8;
    return {{{slots_begin, slots_end}, {l.DataOffset() / 8, l.TotalBytes() / 8}}};
  }

  /// Same idea for crash outcomes: the oracle sees only attempts that returned true or are open.
  Hash128 OracleKey() const {
    StateHasher h;
    const auto canonical = CanonicalIds();
    for (std::size_t i = 0; i < attempts_.size(); ++i) {
      if (canonical[i] == kIrrelevant) continue;
      const AttemptRecord& a = attempts_[i];
      h.Add(canonical[i]).Add(a.result ? 2 : 0);
      AddTargets(h, a);
      for (const AttemptId& p : a.predecessors) {
        const std::size_t j = IndexOf(p);
        if (canonical[j] != kIrrelevant) h.Add(canonical[j]);
      }
      h.Add(~0ull);
    }
    return h.Finish();
  }

 private:
  friend class HarnessMemory;
  friend class WorkerContext;

  struct Worker {
    Worker(VirtualScheduler& s, std::uint32_t i, WorkerProgram p) : context{s, i}, program{std::move(p)} {}

    WorkerContext context;
    WorkerProgram program;
    boost::context::fiber fiber;
    boost::context::fiber sink;
    std::optional<MemoryEvent> pending;
    std::optional<MemoryEvent> last;
    std::span<const TargetEntry> pending_targets;
    std::uint64_t history{0x6a09e667f3bcc908ull};
    bool done{false};
    std::int64_t current{-1};
    std::vector<std::size_t> attempt_indices;
  };

  static constexpr std::size_t kStackBytes = 64 * 1024;
  static constexpr std::uint64_t kIrrelevant = ~0ull;

  void AddHeap(StateHasher& h) const {
    const auto cache = heap_.cache_cells();
    const auto durable = heap_.durable_cells();
    for (const auto& [first, last] : LiveCells()) {
      h.Add(cache.subspan(first, last - first)).Add(durable.subspan(first, last - first));
      for (std::size_t line = first * 8 / kCacheLineSize; line < last * 8 / kCacheLineSize; ++line) {
        h.Add(heap_.dirty_bits()[line]);
      }
    }
  }

  static void AddTargets(StateHasher& h, const AttemptRecord& a) {
    for (const auto& t : a.targets) h.Add(t.address.index).Add(t.expected.raw()).Add(t.desired.raw());
  }

  std::size_t IndexOf(AttemptId id) const { return workers_[id.worker]->attempt_indices[id.seq]; }

  /// (worker, n-th relevant attempt of that worker) packed; kIrrelevant for attempts that returned false.
  std::vector<std::uint64_t> CanonicalIds() const {
    std::vector<std::uint64_t> ids(attempts_.size(), kIrrelevant);
    for (const auto& w : workers_) {
      std::uint64_t n = 0;
      for (std::size_t idx : w->attempt_indices) {
        const AttemptRecord& a = attempts_[idx];
        if (a.result && !*a.result) continue;
        ids[idx] = (std::uint64_t{a.id.worker} << 32) | n++;
      }
    }
    return ids;
  }

  void MarkQuiescent(std::uint32_t w, std::uint64_t position) {
    Worker& wk = *workers_[w];
    wk.history = Mix64(0x6a09e667f3bcc908ull ^ position);
    wk.last.reset();
  }

  void Start(Worker& wk) {
    wk.fiber = boost::context::fiber{
        std::allocator_arg, boost::context::fixedsize_stack{kStackBytes}, [this, &wk](boost::context::fiber&& sink) {
          wk.sink = std::move(sink);
          try {
            wk.program(wk.context);
          } catch (const std::exception& e) {
            Flag("worker " + std::to_string(wk.context.worker()) + " failed: " + e.what());
          }
          wk.done = true;
          wk.pending.reset();
          return std::move(wk.sink);
        }};
    wk.fiber = std::move(wk.fiber).resume();
  }

  void Flag(std::string what) {
    if (!violation_) violation_ = "step " + std::to_string(steps_) + ": " + std::move(what);
  }

  /// Called on the worker's fiber: publish the event, wait to be scheduled, then perform it.
  std::uint64_t Execute(std::uint32_t w, MemoryEvent ev, std::span<const TargetEntry> targets = {}) {
    Worker& wk = *workers_[w];
    wk.pending = ev;
    wk.pending_targets = targets;
    wk.sink = std::move(wk.sink).resume();
    ev.result = Perform(w, wk, ev);
    wk.last = ev;
    wk.pending.reset();
    for (std::uint64_t v : {static_cast<std::uint64_t>(ev.kind), ev.target, ev.arg0, ev.arg1, ev.result}) {
      wk.history = Mix64(wk.history ^ v) + 0x9e3779b97f4a7c15ull;
    }
    if (options_.check_durable_unchanged) {
      const std::uint64_t now = heap_.DurableChecksum();
      const bool flushes = ev.kind == EventKind::kPersist || ev.kind == EventKind::kPersistDescriptor;
      if (now != durable_checksum_ && !flushes) Flag("durable view changed by " + Describe(ev));
      durable_checksum_ = now;
    }
    return ev.result;
  }

  AttemptRecord* Current(Worker& wk) {
    return wk.current < 0 ? nullptr : &attempts_[static_cast<std::size_t>(wk.current)];
  }

  std::uint64_t Perform(std::uint32_t w, Worker& wk, const MemoryEvent& ev) {
    const WordAddress addr{ev.target};
    switch (ev.kind) {
      case EventKind::kLoad:
        return heap_.Load(addr).raw();
      case EventKind::kStore: {
        if (owners_.at(addr.index) != w) {
          Flag("worker " + std::to_string(w) + " stored to word " + std::to_string(addr.index) + " it does not own");
        }
        const TaggedWord value = TaggedWord::FromRaw(ev.arg0);
        heap_.Store(addr, value);
        if (value.IsPayload()) owners_[addr.index].reset();
        return 0;
      }
      case EventKind::kCas: {
        const bool ttas = wk.last && wk.last->kind == EventKind::kLoad && wk.last->target == ev.target &&
                          TaggedWord::FromRaw(wk.last->result).IsPayload();
        if (!ttas) {
          Flag("worker " + std::to_string(w) + " issued a CAS on word " + std::to_string(addr.index) +
               " without first reading a payload there");
        }
        const TaggedWord expected = TaggedWord::FromRaw(ev.arg0);
        const TaggedWord desired = TaggedWord::FromRaw(ev.arg1);
        const TaggedWord seen = heap_.Cas(addr, expected, desired);
        if (seen == expected) {
          if (owners_.at(addr.index)) {
            Flag("worker " + std::to_string(w) + " CAS succeeded on word " + std::to_string(addr.index) +
                 " owned by worker " + std::to_string(*owners_[addr.index]));
          }
          if (!desired.IsPayload()) {
            owners_[addr.index] = w;
            if (wk.current >= 0) frames_[addr.index] = static_cast<std::size_t>(wk.current);
            AttemptRecord* a = Current(wk);
            if (a && a->pcas) a->state = DescriptorState::kSucceeded;
          }
        }
        return seen.raw();
      }
      case EventKind::kPersist:
        heap_.Persist(addr);
        return 0;
      case EventKind::kInitDescriptor: {
        AttemptRecord* a = Current(wk);
        if (a && a->state) Flag("descriptor of worker " + std::to_string(w) + " initialized twice in one attempt");
        heap_.InitDescriptor(static_cast<DescriptorSlot>(ev.target), wk.pending_targets);
        if (a) a->state = DescriptorState::kFailed;
        return 0;
      }
      case EventKind::kStoreState: {
        const auto to = DecodeState(ev.arg0);
        AttemptRecord* a = Current(wk);
        if (!to || (a && (!a->state || !IsLegalTransition(*a->state, *to)))) {
          Flag("illegal descriptor state transition by worker " + std::to_string(w) + " to " +
               std::to_string(ev.arg0));
        }
        heap_.StoreState(static_cast<DescriptorSlot>(ev.target), to.value_or(DescriptorState::kCompleted));
        if (a && to) a->state = *to;
        return 0;
      }
      case EventKind::kPersistDescriptor:
        heap_.PersistDescriptor(static_cast<DescriptorSlot>(ev.target));
        return 0;
    }
    return 0;
  }

  void BeginAttempt(std::uint32_t w, bool pcas, std::span<const TargetEntry> targets) {
    Worker& wk = *workers_[w];
    if (wk.current >= 0 && !attempts_[static_cast<std::size_t>(wk.current)].result) {
      throw HarnessError("worker " + std::to_string(w) + " began an attempt while one is open");
    }
    AttemptRecord a;
    a.id = AttemptId{w, static_cast<std::uint32_t>(wk.attempt_indices.size())};
    a.pcas = pcas;
    a.targets.assign(targets.begin(), targets.end());
    a.invoke_step = steps_;
    if (pcas) a.state = DescriptorState::kFailed;
    for (const auto& other : attempts_) {
      if (other.result) a.predecessors.push_back(other.id);
    }
    std::sort(a.predecessors.begin(), a.predecessors.end());
    wk.current = static_cast<std::int64_t>(attempts_.size());
    wk.attempt_indices.push_back(attempts_.size());
    attempts_.push_back(std::move(a));
  }

  void EndAttempt(std::uint32_t w, bool result) {
    Worker& wk = *workers_[w];
    AttemptRecord* a = Current(wk);
    if (!a || a->result) throw HarnessError("worker " + std::to_string(w) + " ended an attempt it never began");
    a->result = result;
    a->return_step = steps_;
    if (a->pcas) a->state = DescriptorState::kCompleted;
  }

  SimulatedHeap heap_;
  SchedulerOptions options_;
  std::vector<std::optional<std::size_t>> frames_;
  std::vector<std::optional<std::uint32_t>> owners_;
  std::vector<AttemptRecord> attempts_;
  std::optional<std::string> violation_;
  std::uint64_t steps_{0};
  std::uint64_t durable_checksum_{0};
  // Last member: fibers are unwound before anything they may touch.
  std::vector<std::unique_ptr<Worker>> workers_;
};

inline const HeapLayout& HarnessMemory::layout() const { return scheduler_->heap_.layout(); }

inline TaggedWord HarnessMemory::Load(WordAddress a) {
  return TaggedWord::FromRaw(scheduler_->Execute(worker_, {EventKind::kLoad, a.index}));
}
inline void HarnessMemory::Store(WordAddress a, TaggedWord w) {
  scheduler_->Execute(worker_, {EventKind::kStore, a.index, w.raw()});
}
inline TaggedWord HarnessMemory::Cas(WordAddress a, TaggedWord expected, TaggedWord desired) {
  return TaggedWord::FromRaw(scheduler_->Execute(worker_, {EventKind::kCas, a.index, expected.raw(), desired.raw()}));
}
inline void HarnessMemory::Persist(WordAddress a) { scheduler_->Execute(worker_, {EventKind::kPersist, a.index}); }
inline void HarnessMemory::InitDescriptor(DescriptorSlot s, std::span<const TargetEntry> targets) {
  ValidateTargets(targets, layout().max_targets);
  StateHasher h;
  for (const auto& t : targets) h.Add(t.address.index).Add(t.expected.raw()).Add(t.desired.raw());
  scheduler_->Execute(worker_, {EventKind::kInitDescriptor, s, targets.size(), h.Finish().lo}, targets);
}
inline void HarnessMemory::StoreState(DescriptorSlot s, DescriptorState st) {
  scheduler_->Execute(worker_, {EventKind::kStoreState, s, static_cast<std::uint64_t>(st)});
}
inline void HarnessMemory::PersistDescriptor(DescriptorSlot s) {
  scheduler_->Execute(worker_, {EventKind::kPersistDescriptor, s});
}
inline DescriptorImage HarnessMemory::ReadDescriptor(DescriptorSlot s) { return scheduler_->heap_.ReadDescriptor(s); }
inline bool HarnessMemory::TryAcquireSlot(DescriptorSlot s) { return scheduler_->heap_.TryAcquireSlot(s); }
inline void HarnessMemory::ReleaseSlot(DescriptorSlot s) { scheduler_->heap_.ReleaseSlot(s); }

inline void WorkerContext::BeginAttempt(bool pcas, std::span<const TargetEntry> targets) {
  scheduler_->BeginAttempt(worker_, pcas, targets);
}
inline void WorkerContext::EndAttempt(bool result) { scheduler_->EndAttempt(worker_, result); }
inline void WorkerContext::MarkQuiescent(std::uint64_t position) { scheduler_->MarkQuiescent(worker_, position); }

static_assert(PersistentMemory<HarnessMemory>);

}  // namespace pmwcas::harness
