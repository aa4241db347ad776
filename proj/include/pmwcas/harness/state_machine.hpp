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
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pmwcas/descriptor.hpp"
#include "pmwcas/harness/scheduler.hpp"
#include "pmwcas/layout.hpp"

namespace pmwcas::harness {

/**
 * A word value relative to the operation currently framing that word:
 * its expected (old) or desired (new) payload, either with the dirty flag,
 * the framing operation's descriptor word, another operation's descriptor
 * word, or anything else (never legal).
 */
enum class Symbol : std::uint8_t { kOld, kNew, kOldDirty, kNewDirty, kDesc, kOtherDesc, kForeign };

constexpr std::string_view ToString(Symbol s) {
  switch (s) {
    case Symbol::kOld:
      return "v_old";
    case Symbol::kNew:
      return "v_new";
    case Symbol::kOldDirty:
      return "v'_old";
    case Symbol::kNewDirty:
      return "v'_new";
    case Symbol::kDesc:
      return "desc";
    case Symbol::kOtherDesc:
      return "desc*";
    case Symbol::kForeign:
      return "?";
  }
  return "?";
}

/// (cache value, durable value, framing operation's state) for one word at one instant.
struct Triple {
  Symbol cache{Symbol::kOld};
  Symbol durable{Symbol::kOld};
  std::optional<DescriptorState> state;  ///< nullopt: no operation has touched the word yet.

  bool operator==(const Triple&) const = default;
};

inline std::string Describe(const Triple& t) {
  std::string s = "(";
  s += ToString(t.cache);
  s += ", ";
  s += ToString(t.durable);
  s += ", ";
  s += t.state ? std::string(1, StateInitial(*t.state)) : std::string("-");
  return s + ")";
}

namespace detail {

inline constexpr std::uint8_t kStC = 1, kStF = 2, kStS = 4, kStNone = 8;

struct RowDef {
  int row;
  Symbol cache;
  Symbol durable;
  std::uint8_t states;
};

// Row 0 folds the quiescent states: no pending effect, cache == durable.
inline constexpr std::array kDirtyFlagRows{
    RowDef{0, Symbol::kOld, Symbol::kOld, kStC | kStF | kStNone},
    RowDef{0, Symbol::kNew, Symbol::kNew, kStC | kStS},
    RowDef{1, Symbol::kDesc, Symbol::kOld, kStF},
    RowDef{2, Symbol::kDesc, Symbol::kDesc, kStF},
    RowDef{3, Symbol::kOldDirty, Symbol::kOld, kStF},
    RowDef{4, Symbol::kOldDirty, Symbol::kDesc, kStF},
    RowDef{5, Symbol::kOldDirty, Symbol::kOldDirty, kStF},
    RowDef{6, Symbol::kOld, Symbol::kOldDirty, kStF},
    RowDef{7, Symbol::kDesc, Symbol::kDesc, kStS},
    RowDef{8, Symbol::kNewDirty, Symbol::kDesc, kStS},
    RowDef{9, Symbol::kNewDirty, Symbol::kNewDirty, kStS},
    RowDef{10, Symbol::kNew, Symbol::kNewDirty, kStS},
    RowDef{11, Symbol::kDesc, Symbol::kOldDirty, kStF | kStS},
};

inline constexpr std::array kNoDirtyFlagRows{
    RowDef{0, Symbol::kOld, Symbol::kOld, kStC | kStF | kStNone},
    RowDef{0, Symbol::kNew, Symbol::kNew, kStC | kStS},
    RowDef{1, Symbol::kDesc, Symbol::kOld, kStF},
    RowDef{2, Symbol::kDesc, Symbol::kDesc, kStF},
    RowDef{3, Symbol::kOld, Symbol::kDesc, kStF},
    RowDef{4, Symbol::kDesc, Symbol::kDesc, kStS},
    RowDef{5, Symbol::kNew, Symbol::kDesc, kStS},
    RowDef{6, Symbol::kDesc, Symbol::kOtherDesc, kStF | kStS},
};

// PCAS words are numbered with the dirty-flag rows they coincide with.
inline constexpr std::array kPcasRows{
    RowDef{0, Symbol::kOld, Symbol::kOld, kStNone},
    RowDef{0, Symbol::kNew, Symbol::kNew, kStC | kStS},
    RowDef{8, Symbol::kNewDirty, Symbol::kOld, kStS},
    RowDef{8, Symbol::kNewDirty, Symbol::kOldDirty, kStS},
    RowDef{9, Symbol::kNewDirty, Symbol::kNewDirty, kStS},
    RowDef{10, Symbol::kNew, Symbol::kNewDirty, kStC | kStS},
};

inline constexpr std::array<std::pair<int, int>, 17> kDirtyFlagEdges{{
    {0, 1}, {1, 2}, {1, 3}, {2, 4}, {2, 7}, {3, 5}, {4, 5}, {5, 6}, {6, 0},
    {6, 11}, {7, 8}, {8, 9}, {9, 10}, {10, 0}, {10, 11}, {11, 2}, {11, 5},
}};

inline constexpr std::array<std::pair<int, int>, 13> kNoDirtyFlagEdges{{
    {0, 1}, {1, 0}, {1, 2}, {2, 3}, {2, 4}, {3, 0}, {3, 6}, {4, 5}, {5, 0}, {5, 6}, {6, 2}, {6, 3}, {6, 5},
}};

inline constexpr std::array<std::pair<int, int>, 5> kPcasEdges{{{0, 8}, {8, 9}, {9, 10}, {10, 0}, {10, 8}}};

constexpr std::uint8_t StateBit(const std::optional<DescriptorState>& s) {
  if (!s) return kStNone;
  switch (*s) {
    case DescriptorState::kCompleted:
      return kStC;
    case DescriptorState::kFailed:
      return kStF;
    case DescriptorState::kSucceeded:
      return kStS;
  }
  return 0;
}

inline std::span<const RowDef> RowsFor(Algorithm a) {
  switch (a) {
    case Algorithm::kDirtyFlags:
      return kDirtyFlagRows;
    case Algorithm::kNoDirtyFlags:
      return kNoDirtyFlagRows;
    case Algorithm::kPcas:
      return kPcasRows;
  }
  return {};
}

inline std::span<const std::pair<int, int>> EdgesFor(Algorithm a) {
  switch (a) {
    case Algorithm::kDirtyFlags:
      return kDirtyFlagEdges;
    case Algorithm::kNoDirtyFlags:
      return kNoDirtyFlagEdges;
    case Algorithm::kPcas:
      return kPcasEdges;
  }
  return {};
}

}  // namespace detail

/// Row of the variant's state table matching `t`, or nullopt if the triple is not allowed.
inline std::optional<int> ClassifyRow(Algorithm variant, const Triple& t) {
  for (const auto& r : detail::RowsFor(variant)) {
    if (r.cache == t.cache && r.durable == t.durable && (r.states & detail::StateBit(t.state))) return r.row;
  }
  return std::nullopt;
}

/// Whether the state diagram permits moving from row `from` to row `to` (staying put is always allowed).
inline bool IsAllowedEdge(Algorithm variant, int from, int to) {
  if (from == to) return true;
  const auto edges = detail::EdgesFor(variant);
  return std::find(edges.begin(), edges.end(), std::pair{from, to}) != edges.end();
}

/// Every row the variant's table defines.
inline std::vector<int> TableRows(Algorithm variant) {
  std::vector<int> rows;
  for (const auto& r : detail::RowsFor(variant)) {
    if (std::find(rows.begin(), rows.end(), r.row) == rows.end()) rows.push_back(r.row);
  }
  return rows;
}

/**
 * Symbolic triple of word `addr` in a live scheduler. The framing
 * operation is the one whose descriptor the cache holds, else the one
 * whose descriptor the durable view holds, else the last operation that
 * installed a descriptor or flagged value into the word.
 */
inline Triple Observe(const VirtualScheduler& sched, WordAddress addr) {
  const SimulatedHeap& heap = sched.heap();
  const HeapLayout& layout = heap.layout();
  const TaggedWord c = heap.CacheWord(addr);
  const TaggedWord d = heap.DurableWord(addr);

  const AttemptRecord* frame = nullptr;
  if (const auto s = layout.SlotOf(c)) {
    frame = sched.CurrentAttempt(*s);
  } else if (const auto s = layout.SlotOf(d)) {
    frame = sched.CurrentAttempt(*s);
  } else {
    frame = sched.LastEmbedder(addr);
  }

  Triple t;
  if (!frame) {
    const Symbol sym = c.IsPayload() && c == d ? Symbol::kOld : Symbol::kForeign;
    t.cache = t.durable = sym;
    return t;
  }
  t.state = frame->state;
  const auto it = std::find_if(frame->targets.begin(), frame->targets.end(),
                               [&](const TargetEntry& e) { return e.address == addr; });
  if (it == frame->targets.end()) {
    t.cache = t.durable = Symbol::kForeign;
    return t;
  }
  const TaggedWord own_desc =
      frame->pcas ? TaggedWord{} : layout.DescriptorWord(static_cast<DescriptorSlot>(frame->id.worker));
  const auto symbol = [&](TaggedWord w) {
    if (w == it->expected) return Symbol::kOld;
    if (w == it->desired) return Symbol::kNew;
    if (w == it->expected.WithDirtyFlag()) return Symbol::kOldDirty;
    if (w == it->desired.WithDirtyFlag()) return Symbol::kNewDirty;
    if (!frame->pcas && w == own_desc) return Symbol::kDesc;
    if (w.IsDescriptor()) return Symbol::kOtherDesc;
    return Symbol::kForeign;
  };
  t.cache = symbol(c);
  t.durable = symbol(d);
  return t;
}

struct StateMachineReport {
  bool ok{true};
  std::string detail;
  std::vector<int> rows_visited;
  std::vector<std::pair<int, int>> edges_taken;
};

/**
 * Checks per-word traces against the variant's table and diagram: every
 * triple must be a table row and consecutive rows must be joined by an
 * edge.
 */
inline StateMachineReport CheckStateMachine(std::span<const std::vector<Triple>> traces, Algorithm variant) {
  StateMachineReport report;
  const auto note_row = [&](int r) {
    if (std::find(report.rows_visited.begin(), report.rows_visited.end(), r) == report.rows_visited.end()) {
      report.rows_visited.push_back(r);
    }
  };
  for (std::size_t w = 0; w < traces.size(); ++w) {
    std::optional<int> prev;
    for (std::size_t i = 0; i < traces[w].size(); ++i) {
      const Triple& t = traces[w][i];
      const auto row = ClassifyRow(variant, t);
      if (!row) {
        report.ok = false;
        report.detail = "word " + std::to_string(w) + " entry " + std::to_string(i) + ": " + Describe(t) +
                        " is not a row of the " + std::string(ToString(variant)) + " table";
        return report;
      }
      note_row(*row);
      if (prev && *prev != *row) {
        if (!IsAllowedEdge(variant, *prev, *row)) {
          report.ok = false;
          report.detail = "word " + std::to_string(w) + " entry " + std::to_string(i) + ": row " +
                          std::to_string(*prev) + " -> " + std::to_string(*row) + " is not an edge";
          return report;
        }
        const std::pair e{*prev, *row};
        if (std::find(report.edges_taken.begin(), report.edges_taken.end(), e) == report.edges_taken.end()) {
          report.edges_taken.push_back(e);
        }
      }
      prev = row;
    }
  }
  std::sort(report.rows_visited.begin(), report.rows_visited.end());
  std::sort(report.edges_taken.begin(), report.edges_taken.end());
  return report;
}

}  // namespace pmwcas::harness
