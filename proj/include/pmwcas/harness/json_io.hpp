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

#include <json.hpp>

#include <cstdint>
#include <string>

#include "pmwcas/errors.hpp"
#include "pmwcas/harness/model_checker.hpp"
#include "pmwcas/harness/state_machine.hpp"

namespace pmwcas::harness {

/**
 * JSON forms of schedules, verdicts and exploration results. A schedule
 * is {"steps": [{"w": 0}, {"evict": 130}, ...], "crash_step": n | null,
 * "eviction_subset": [lines]}.
 */
inline nlohmann::json ToJson(const CrashSchedule& s) {
  nlohmann::json steps = nlohmann::json::array();
  for (const Choice& c : s.steps) {
    steps.push_back(c.kind == Choice::Kind::kStep ? nlohmann::json{{"w", c.value}} : nlohmann::json{{"evict", c.value}});
  }
  return {{"steps", steps},
          {"crash_step", s.crash_step ? nlohmann::json(*s.crash_step) : nlohmann::json(nullptr)},
          {"eviction_subset", s.eviction_subset}};
}

inline CrashSchedule CrashScheduleFromJson(const nlohmann::json& j) {
  try {
    CrashSchedule s;
    for (const auto& step : j.at("steps")) {
      if (step.contains("w")) {
        s.steps.push_back(Choice::Step(step.at("w").get<std::uint64_t>()));
      } else {
        s.steps.push_back(Choice::Evict(step.at("evict").get<std::uint64_t>()));
      }
    }
    if (j.contains("crash_step") && !j.at("crash_step").is_null()) s.crash_step = j.at("crash_step").get<std::uint64_t>();
    if (j.contains("eviction_subset")) s.eviction_subset = j.at("eviction_subset").get<std::vector<std::uint64_t>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw HarnessError(std::string("malformed schedule: ") + e.what());
  }
}

inline nlohmann::json ToJson(const TargetEntry& t) {
  return {{"word", t.address.index}, {"expected", t.expected.raw()}, {"desired", t.desired.raw()}};
}

inline nlohmann::json ToJson(const Triple& t) {
  return {{"cache", ToString(t.cache)},
          {"durable", ToString(t.durable)},
          {"state", t.state ? std::string(1, StateInitial(*t.state)) : std::string("-")}};
}

inline nlohmann::json ToJson(const Verdict& v, Algorithm variant) {
  nlohmann::json attempts = nlohmann::json::array();
  for (const auto& a : v.attempts) {
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& t : a.record.targets) targets.push_back(ToJson(t));
    attempts.push_back({{"worker", a.record.id.worker},
                        {"seq", a.record.id.seq},
                        {"kind", a.record.pcas ? "pcas" : "pmwcas"},
                        {"targets", targets},
                        {"invoke_step", a.record.invoke_step},
                        {"return_step", a.record.return_step ? nlohmann::json(*a.record.return_step) : nullptr},
                        {"result", a.record.result ? nlohmann::json(*a.record.result) : nullptr},
                        {"outcome", ToString(a.outcome)}});
  }
  nlohmann::json traces = nlohmann::json::array();
  for (std::size_t w = 0; w < v.traces.size(); ++w) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : v.traces[w]) {
      nlohmann::json entry = ToJson(e.triple);
      entry["step"] = e.step;
      entry["cache_raw"] = e.cache;
      entry["durable_raw"] = e.durable;
      const auto row = ClassifyRow(variant, e.triple);
      entry["row"] = row ? nlohmann::json(*row) : nullptr;
      entries.push_back(entry);
    }
    traces.push_back({{"word", w}, {"entries", entries}});
  }
  return {{"schedule", ToJson(v.schedule)}, {"ok", v.ok},         {"failure", v.failure},
          {"attempts", attempts},           {"final_words", v.final_words}, {"traces", traces}};
}

inline nlohmann::json ToJson(const ExploreResult& r) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : r.edges_taken) edges.push_back({a, b});
  return {{"ok", r.ok()},
          {"complete", r.complete},
          {"states", r.states},
          {"transitions", r.transitions},
          {"terminal_states", r.terminal_states},
          {"crash_points", r.crash_points},
          {"crash_images", r.crash_images},
          {"rows_visited", r.rows_visited},
          {"edges_taken", edges},
          {"failure", r.failure},
          {"counterexample", r.counterexample ? ToJson(*r.counterexample) : nlohmann::json(nullptr)}};
}

}  // namespace pmwcas::harness
