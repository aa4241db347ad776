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
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pmwcas/errors.hpp"
#include "pmwcas/harness/hashing.hpp"
#include "pmwcas/harness/oracle.hpp"
#include "pmwcas/harness/scenario.hpp"
#include "pmwcas/harness/scheduler.hpp"
#include "pmwcas/harness/state_machine.hpp"
#include "pmwcas/recovery.hpp"

namespace pmwcas::harness {

/**
 * A replayable run: the choices to apply, optionally a crash after the
 * first `crash_step` of them, and the dirty lines written back at that
 * crash. Without a crash every choice is applied and all workers must
 * have finished.
 */
struct CrashSchedule {
  std::vector<Choice> steps;
  std::optional<std::uint64_t> crash_step;
  std::vector<std::uint64_t> eviction_subset;

  bool operator==(const CrashSchedule&) const = default;
};

enum class Outcome : std::uint8_t { kAllOld, kAllNew, kViolation };

constexpr std::string_view ToString(Outcome o) {
  switch (o) {
    case Outcome::kAllOld:
      return "all-old";
    case Outcome::kAllNew:
      return "all-new";
    case Outcome::kViolation:
      return "violation";
  }
  return "?";
}

struct AttemptVerdict {
  AttemptRecord record;
  Outcome outcome{Outcome::kAllOld};
};

struct TraceEntry {
  std::uint64_t step{0};
  std::uint64_t cache{0};
  std::uint64_t durable{0};
  Triple triple;
};

struct Verdict {
  CrashSchedule schedule;
  bool ok{true};
  std::string failure;
  std::vector<AttemptVerdict> attempts;
  /// Data words after recovery (crash) or in the cache view (no crash).
  std::vector<std::uint64_t> final_words;
  /// Per data word: the symbolic triple each time it changed.
  std::vector<std::vector<TraceEntry>> traces;

  std::vector<std::vector<Triple>> Triples() const {
    std::vector<std::vector<Triple>> out;
    for (const auto& trace : traces) {
      out.emplace_back();
      for (const auto& e : trace) out.back().push_back(e.triple);
    }
    return out;
  }
};

/// Result of checking one end state (crash + recovery, or completion).
struct EndCheck {
  bool ok{true};
  std::string failure;
  std::vector<Outcome> outcomes;
  std::vector<std::uint64_t> words;
};

namespace detail {

inline OracleProblem BuildProblem(const std::vector<AttemptRecord>& attempts, std::vector<std::uint64_t> initial,
                                  std::vector<std::uint64_t> final) {
  OracleProblem p;
  p.initial = std::move(initial);
  p.final = std::move(final);
  for (const auto& a : attempts) {
    const Constraint c =
        !a.result ? Constraint::kMayApply : (*a.result ? Constraint::kMustApply : Constraint::kMustNotApply);
    p.ops.push_back({a.targets, c});
  }
  for (std::size_t b = 0; b < attempts.size(); ++b) {
    for (const AttemptId& pred : attempts[b].predecessors) {
      for (std::size_t a = 0; a < attempts.size(); ++a) {
        if (attempts[a].id == pred) p.precedes.emplace_back(a, b);
      }
    }
  }
  return p;
}

inline EndCheck Judge(const std::vector<AttemptRecord>& attempts, const Scenario& scenario,
                      std::vector<std::uint64_t> words, const char* when) {
  EndCheck check;
  check.words = words;
  check.outcomes.assign(attempts.size(), Outcome::kViolation);
  const auto witness = FindWitness(BuildProblem(attempts, scenario.InitialWords(), std::move(words)));
  if (!witness) {
    check.ok = false;
    check.failure = std::string("no sequential order of the operations explains the ") + when + " data words";
    return check;
  }
  check.outcomes.assign(attempts.size(), Outcome::kAllOld);
  for (std::size_t i : *witness) check.outcomes[i] = Outcome::kAllNew;
  return check;
}

}  // namespace detail

/**
 * Recovers an already crashed copy of the heap and checks it: recovery
 * succeeds, no data word keeps a tag, a second recovery is a no-op, and
 * the recovered words are explained by a sequential order of the
 * operations consistent with their live return values.
 */
inline EndCheck CheckRecovered(SimulatedHeap& crashed, const std::vector<AttemptRecord>& attempts,
                               const Scenario& scenario) {
  EndCheck check;
  try {
    Recover(crashed, scenario.algorithm);
  } catch (const Error& e) {
    check.ok = false;
    check.failure = std::string("recovery failed: ") + e.what();
    return check;
  }
  std::vector<std::uint64_t> words;
  for (std::uint64_t i = 0; i < crashed.layout().word_capacity; ++i) {
    const TaggedWord c = crashed.CacheWord(WordAddress{i});
    const TaggedWord d = crashed.DurableWord(WordAddress{i});
    if (!d.IsPayload() || c != d) {
      check.ok = false;
      check.failure = "word " + std::to_string(i) + " is not a clean durable payload after recovery";
      return check;
    }
    words.push_back(d.raw());
  }
  if (!CheckRecoveryIdempotent(crashed)) {
    check.ok = false;
    check.failure = "recovering a recovered heap changed it";
    return check;
  }
  return detail::Judge(attempts, scenario, std::move(words), "recovered");
}

/// Crashes a copy of the scheduler's heap with the given write-backs and checks the result.
inline EndCheck CheckCrash(const VirtualScheduler& sched, const Scenario& scenario,
                           std::span<const std::uint64_t> eviction_subset) {
  SimulatedHeap copy = sched.heap();
  copy.Crash(eviction_subset);
  return CheckRecovered(copy, sched.attempts(), scenario);
}

/// Checks a finished run: every word clean and the cache view explained by the return values.
inline EndCheck CheckCompletion(const VirtualScheduler& sched, const Scenario& scenario) {
  std::vector<std::uint64_t> words;
  for (std::uint64_t i = 0; i < sched.heap().layout().word_capacity; ++i) {
    const TaggedWord c = sched.heap().CacheWord(WordAddress{i});
    if (!c.IsPayload()) {
      EndCheck bad;
      bad.ok = false;
      bad.failure = "word " + std::to_string(i) + " still tagged after all workers finished";
      return bad;
    }
    words.push_back(c.raw());
  }
  return detail::Judge(sched.attempts(), scenario, std::move(words), "final");
}

inline std::unique_ptr<VirtualScheduler> StartScheduler(const SimulatedHeap& initial, const Scenario& scenario,
                                                        SchedulerOptions options = {}) {
  return std::make_unique<VirtualScheduler>(initial, scenario.Programs(), options);
}

/// Replays a schedule and reports what happened.
inline Verdict RunSchedule(const Scenario& scenario, const CrashSchedule& schedule, SchedulerOptions options = {}) {
  Verdict v;
  v.schedule = schedule;
  const SimulatedHeap initial = scenario.InitialHeap();
  auto sched = StartScheduler(initial, scenario, options);
  const std::uint64_t words = initial.layout().word_capacity;
  v.traces.resize(words);

  const auto record = [&] {
    for (std::uint64_t i = 0; i < words; ++i) {
      const WordAddress a{i};
      TraceEntry e{sched->steps(), sched->heap().CacheWord(a).raw(), sched->heap().DurableWord(a).raw(),
                   Observe(*sched, a)};
      auto& trace = v.traces[i];
      if (trace.empty() || trace.back().triple != e.triple || trace.back().cache != e.cache ||
          trace.back().durable != e.durable) {
        trace.push_back(e);
      }
    }
  };
  const auto fail = [&](std::string why) {
    if (v.ok) {
      v.ok = false;
      v.failure = std::move(why);
    }
  };

  if (schedule.crash_step && *schedule.crash_step > schedule.steps.size()) {
    throw HarnessError("crash step " + std::to_string(*schedule.crash_step) + " is past the end of the schedule");
  }
  const std::size_t run = schedule.crash_step ? *schedule.crash_step : schedule.steps.size();
  record();
  for (std::size_t i = 0; i < run; ++i) {
    sched->Apply(schedule.steps[i]);
    record();
  }
  if (sched->violation()) fail(*sched->violation());

  EndCheck end;
  if (schedule.crash_step) {
    end = CheckCrash(*sched, scenario, schedule.eviction_subset);
  } else if (!sched->Finished()) {
    end.ok = false;
    end.failure = sched->Deadlocked() ? "deadlock: no worker can make progress"
                                      : "schedule ends before every worker finished";
  } else {
    end = CheckCompletion(*sched, scenario);
  }
  if (!end.ok) fail(end.failure);
  v.final_words = end.words;
  const auto& attempts = sched->attempts();
  for (std::size_t i = 0; i < attempts.size(); ++i) {
    v.attempts.push_back({attempts[i], i < end.outcomes.size() ? end.outcomes[i] : Outcome::kViolation});
  }
  return v;
}

struct ExploreOptions {
  /// Crash every reachable state under every subset of its divergent dirty lines.
  bool check_crashes{true};
  /// Check per-word state-table rows and diagram edges on every transition.
  bool check_state_machine{false};
  /// Let the scheduler also evict data-word lines between events.
  bool evictions{false};
  std::uint64_t max_states{2'000'000};
  std::size_t max_crash_lines{16};
  SchedulerOptions scheduler{};
};

struct ExploreResult {
  bool complete{true};
  std::uint64_t states{0};
  std::uint64_t transitions{0};
  std::uint64_t terminal_states{0};
  std::uint64_t crash_points{0};
  /// Crash images checked: one per (state, eviction subset) after deduplication.
  std::uint64_t crash_images{0};
  std::set<int> rows_visited;
  std::set<std::pair<int, int>> edges_taken;
  std::optional<CrashSchedule> counterexample;
  std::string failure;

  bool ok() const { return complete && !counterexample; }
};

/**
 * Exhaustive exploration of every interleaving of the scenario's workers,
 * merging runs that reach the same global state (heap views plus each
 * worker's event history). Each distinct state is crashed with every
 * subset of the lines whose write-back would change durable memory; each
 * finished state is checked against the return values. Deadlocks and
 * monitor violations are failures. Stops at the first failure, which is
 * returned as a replayable schedule.
 */
inline ExploreResult Explore(const Scenario& scenario, const ExploreOptions& options = {}) {
  scenario.Validate();
  const SimulatedHeap initial = scenario.InitialHeap();
  const std::uint64_t words = initial.layout().word_capacity;
  ExploreResult result;
  std::unordered_set<Hash128, Hash128Hasher> visited;
  std::unordered_set<Hash128, Hash128Hasher> crash_seen;
  std::vector<Choice> path;
  bool stop = false;

  const auto fail = [&](std::string why, std::optional<std::vector<std::uint64_t>> subset) {
    CrashSchedule cs{path, std::nullopt, {}};
    if (subset) {
      cs.crash_step = path.size();
      cs.eviction_subset = std::move(*subset);
    }
    result.counterexample = std::move(cs);
    result.failure = std::move(why);
    stop = true;
  };

  const auto replay = [&](std::span<const Choice> choices) {
    auto s = StartScheduler(initial, scenario, options.scheduler);
    for (const Choice& c : choices) s->Apply(c);
    return s;
  };

  using Rows = std::vector<int>;
  const auto rows_of = [&](const VirtualScheduler& s, Rows& rows) -> bool {
    rows.assign(words, -1);
    for (std::uint64_t i = 0; i < words; ++i) {
      const Triple t = Observe(s, WordAddress{i});
      const auto row = ClassifyRow(scenario.algorithm, t);
      if (!row) {
        fail("word " + std::to_string(i) + " reached " + Describe(t) + ", not a row of the " +
                 std::string(ToString(scenario.algorithm)) + " table",
             std::nullopt);
        return false;
      }
      rows[i] = *row;
      result.rows_visited.insert(*row);
    }
    return true;
  };

  const auto crash_checks = [&](const VirtualScheduler& s) {
    const std::vector<std::uint64_t> lines = s.heap().DivergentLines();
    if (lines.size() > options.max_crash_lines) {
      throw HarnessError(std::to_string(lines.size()) + " divergent lines exceed the crash subset limit");
    }
    ++result.crash_points;
    const Hash128 signature = s.OracleKey();
    std::vector<std::uint64_t> subset;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << lines.size()); ++mask) {
      subset.clear();
      for (std::size_t b = 0; b < lines.size(); ++b) {
        if (mask >> b & 1) subset.push_back(lines[b]);
      }
      // Key: durable live cells as they would be after writing back `subset`.
      const auto cache = s.heap().cache_cells();
      const auto durable = s.heap().durable_cells();
      StateHasher h;
      for (const auto& [first, last] : s.LiveCells()) {
        for (std::size_t cell = first; cell < last; ++cell) {
          const std::uint64_t line = cell * 8 / kCacheLineSize;
          const bool back = std::find(subset.begin(), subset.end(), line) != subset.end();
          h.Add(back ? cache[cell] : durable[cell]);
        }
      }
      h.Add(signature.lo).Add(signature.hi);
      if (!crash_seen.insert(h.Finish()).second) continue;
      SimulatedHeap copy = s.heap();
      copy.Crash(subset);
      ++result.crash_images;
      const EndCheck check = CheckRecovered(copy, s.attempts(), scenario);
      if (!check.ok) {
        fail(check.failure, subset);
        return;
      }
    }
  };

  // `s` is positioned at `path`, a state seen for the first time.
  const auto visit = [&](auto& self, std::unique_ptr<VirtualScheduler> s, const Rows& rows) -> void {
    if (++result.states > options.max_states) {
      result.complete = false;
      stop = true;
      return;
    }
    if (options.check_crashes) {
      crash_checks(*s);
      if (stop) return;
    }
    if (s->Finished()) {
      ++result.terminal_states;
      const EndCheck check = CheckCompletion(*s, scenario);
      if (!check.ok) fail(check.failure, std::nullopt);
      return;
    }
    const std::vector<Choice> choices = s->Choices(options.evictions);
    if (choices.empty()) {
      fail("deadlock: no worker can make progress", std::nullopt);
      return;
    }
    for (std::size_t i = 0; i < choices.size() && !stop; ++i) {
      const bool last = i + 1 == choices.size();
      std::unique_ptr<VirtualScheduler> child = last ? std::move(s) : replay(path);
      path.push_back(choices[i]);
      child->Apply(choices[i]);
      ++result.transitions;
      if (child->violation()) {
        fail(*child->violation(), std::nullopt);
      } else {
        Rows child_rows;
        bool fresh = true;
        if (options.check_state_machine) {
          if (!rows_of(*child, child_rows)) fresh = false;
          for (std::uint64_t w = 0; fresh && w < words; ++w) {
            if (rows[w] == child_rows[w]) continue;
            if (!IsAllowedEdge(scenario.algorithm, rows[w], child_rows[w])) {
              fail("word " + std::to_string(w) + " moved from row " + std::to_string(rows[w]) + " to row " +
                       std::to_string(child_rows[w]) + ", which the diagram does not allow",
                   std::nullopt);
              fresh = false;
            } else {
              result.edges_taken.emplace(rows[w], child_rows[w]);
            }
          }
        }
        if (fresh && visited.insert(child->StateKey()).second) self(self, std::move(child), child_rows);
      }
      path.pop_back();
    }
  };

  auto root = StartScheduler(initial, scenario, options.scheduler);
  if (root->violation()) {
    fail(*root->violation(), std::nullopt);
    return result;
  }
  Rows root_rows;
  if (options.check_state_machine && !rows_of(*root, root_rows)) return result;
  visited.insert(root->StateKey());
  visit(visit, std::move(root), root_rows);
  return result;
}

struct EnumerateOptions {
  /// Enumerate explicitly while the schedule count stays within this bound.
  std::uint64_t bound{1'000'000};
  /// Schedules drawn when the bound is exceeded.
  std::uint64_t samples{1000};
  std::uint64_t seed{1};
};

struct EnumerateResult {
  std::uint64_t interleavings{0};
  std::uint64_t schedules{0};
  bool exhaustive{true};
};

/**
 * Calls `visit` for every complete interleaving (a maximal sequence of
 * enabled worker steps, no evictions) together with the dirty lines after
 * each prefix: entry i lists the lines dirty after the first i steps.
 * Stops early when `visit` returns false. Returns the number visited.
 */
inline std::uint64_t ForEachInterleaving(
    const Scenario& scenario,
    const std::function<bool(std::span<const Choice>, const std::vector<std::vector<std::uint64_t>>&)>& visit) {
  scenario.Validate();
  const SimulatedHeap initial = scenario.InitialHeap();
  std::vector<Choice> path;
  std::vector<std::vector<std::uint64_t>> dirty;
  std::uint64_t count = 0;
  bool stop = false;

  const auto walk = [&](auto& self, std::unique_ptr<VirtualScheduler> s) -> void {
    dirty.push_back(s->heap().DirtyLines());
    const std::vector<Choice> choices = s->Choices(false);
    if (choices.empty()) {
      ++count;
      if (!visit(path, dirty)) stop = true;
    }
    for (std::size_t i = 0; i < choices.size() && !stop; ++i) {
      std::unique_ptr<VirtualScheduler> child;
      if (i + 1 == choices.size()) {
        child = std::move(s);
      } else {
        child = StartScheduler(initial, scenario);
        for (const Choice& c : path) child->Apply(c);
      }
      path.push_back(choices[i]);
      child->Apply(choices[i]);
      self(self, std::move(child));
      path.pop_back();
    }
    dirty.pop_back();
  };
  walk(walk, StartScheduler(initial, scenario));
  return count;
}

/**
 * Enumerates crash schedules: for each interleaving of n steps, a crash
 * before each step i in [0, n) under every subset of the lines dirty at
 * that point, plus the crash-free run, i.e. sum_{i<n} 2^dirty_i + 1
 * schedules per interleaving. If that total exceeds `bound`, `samples` schedules are
 * drawn instead from a generator seeded with `seed`: a uniformly random
 * enabled worker at every step, a uniform crash point in [0, n] (n meaning no crash) and an
 * independent fair coin per dirty line.
 */
inline EnumerateResult EnumerateSchedules(const Scenario& scenario, const EnumerateOptions& options,
                                          const std::function<void(const CrashSchedule&)>& visit) {
  EnumerateResult result;
  std::vector<std::pair<std::vector<Choice>, std::vector<std::vector<std::uint64_t>>>> runs;
  std::uint64_t total = 0;
  ForEachInterleaving(scenario, [&](std::span<const Choice> path, const auto& dirty) {
    std::uint64_t n = 1;
    for (std::size_t i = 0; i + 1 < dirty.size(); ++i) {
      const auto& lines = dirty[i];
      if (lines.size() >= 40) {
        total = options.bound + 1;
        return false;
      }
      n += std::uint64_t{1} << lines.size();
    }
    total += n;
    if (total > options.bound) return false;
    runs.emplace_back(std::vector<Choice>(path.begin(), path.end()), dirty);
    return true;
  });

  if (total <= options.bound) {
    result.interleavings = runs.size();
    for (const auto& [path, dirty] : runs) {
      for (std::size_t i = 0; i + 1 < dirty.size(); ++i) {
        const auto& lines = dirty[i];
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << lines.size()); ++mask) {
          CrashSchedule cs{path, i, {}};
          for (std::size_t b = 0; b < lines.size(); ++b) {
            if (mask >> b & 1) cs.eviction_subset.push_back(lines[b]);
          }
          visit(cs);
          ++result.schedules;
        }
      }
      visit(CrashSchedule{path, std::nullopt, {}});
      ++result.schedules;
    }
    return result;
  }

  result.exhaustive = false;
  runs.clear();
  const SimulatedHeap initial = scenario.InitialHeap();
  std::mt19937_64 rng{options.seed};
  for (std::uint64_t k = 0; k < options.samples; ++k) {
    auto s = StartScheduler(initial, scenario);
    CrashSchedule cs;
    std::vector<std::vector<std::uint64_t>> dirty{s->heap().DirtyLines()};
    for (auto choices = s->Choices(false); !choices.empty(); choices = s->Choices(false)) {
      const Choice c = choices[std::uniform_int_distribution<std::size_t>{0, choices.size() - 1}(rng)];
      s->Apply(c);
      cs.steps.push_back(c);
      dirty.push_back(s->heap().DirtyLines());
    }
    const std::uint64_t point = std::uniform_int_distribution<std::uint64_t>{0, cs.steps.size()}(rng);
    if (point < cs.steps.size()) {
      cs.crash_step = point;
      for (std::uint64_t line : dirty[point]) {
        if (rng() & 1) cs.eviction_subset.push_back(line);
      }
    }
    visit(cs);
    ++result.schedules;
    ++result.interleavings;
  }
  return result;
}

}  // namespace pmwcas::harness
