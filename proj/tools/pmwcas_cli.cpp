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

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmwcas/atomic_heap.hpp"
#include "pmwcas/bench/report.hpp"
#include "pmwcas/bench/runner.hpp"
#include "pmwcas/errors.hpp"
#include "pmwcas/harness/json_io.hpp"
#include "pmwcas/harness/model_checker.hpp"
#include "pmwcas/harness/scenario.hpp"
#include "pmwcas/harness/state_machine.hpp"
#include "pmwcas/recovery.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitViolation = 2;
constexpr int kExitIo = 3;

using pmwcas::Algorithm;
namespace bench = pmwcas::bench;
namespace harness = pmwcas::harness;

void WriteOutput(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out{path, std::ios::binary | std::ios::trunc};
  if (!out) throw pmwcas::IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw pmwcas::IoError("cannot write " + path);
}

std::string ReadFile(const std::string& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) throw pmwcas::IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct BenchArgs {
  bench::BenchConfig config;
  std::string algorithm{"nodf"};
  std::string backend{"dram"};
  std::string order{"index"};
  std::string format{"csv"};
  std::vector<std::string> sweep;
  std::string out;
};

int RunBenchCommand(BenchArgs& a) {
  a.config.algorithm = pmwcas::ParseAlgorithm(a.algorithm);
  a.config.backend = bench::ParseBackend(a.backend);
  a.config.order = bench::ParseTargetOrder(a.order);
  const auto configs = bench::ExpandSweep(a.config, a.sweep);
  for (const auto& c : configs) c.Validate();

  std::vector<bench::BenchReport> reports;
  bool violated = false;
  for (const auto& c : configs) {
    reports.push_back(bench::RunBench(c));
    if (!reports.back().SumInvariantHolds()) {
      violated = true;
      std::cerr << "invariant violation: payload sum " << reports.back().payload_sum << ", expected "
                << std::uint64_t{c.k} * reports.back().succeeded << ", tagged words " << reports.back().tagged_words
                << "\n";
    }
  }
  std::string text;
  if (a.format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(bench::ToJson(r));
    text = (a.sweep.empty() ? j.at(0) : j).dump(2) + "\n";
  } else {
    text = bench::ToCsv(reports);
  }
  WriteOutput(a.out, text);
  return violated ? kExitViolation : kExitOk;
}

struct HeapArgs {
  std::string path;
  std::uint64_t words{1'000'000};
  std::uint32_t block_size{256};
  std::uint32_t slots{64};
  std::uint32_t max_targets{pmwcas::kDefaultMaxTargets};
  std::string algorithm{"nodf"};
  bool force{false};
};

int RunCreateHeap(const HeapArgs& a) {
  pmwcas::HeapLayout layout;
  layout.word_capacity = a.words;
  layout.block_size = a.block_size;
  layout.worker_slots = a.slots;
  layout.max_targets = a.max_targets;
  auto heap = pmwcas::AtomicHeap::CreateFile(a.path, layout, pmwcas::ParseAlgorithm(a.algorithm));
  heap.Close();
  std::cout << "created " << a.path << ": " << layout.word_capacity << " words, " << layout.TotalBytes()
            << " bytes\n";
  return kExitOk;
}

int RunRecover(const HeapArgs& a) {
  bool was_clean = false;
  auto heap = pmwcas::AtomicHeap::OpenFile(a.path, &was_clean);
  if (was_clean && !a.force) {
    std::cout << a.path << ": clean shutdown, nothing to recover\n";
    return kExitOk;
  }
  try {
    const auto report = pmwcas::Recover(heap);
    std::cout << a.path << ": rolled forward " << report.rolled_forward << ", rolled back " << report.rolled_back
              << ", dirty flags cleared " << report.dirty_flags_cleared << ", words touched "
              << report.words_touched.size() << "\n";
  } catch (const pmwcas::RecoveryError& e) {
    heap.Abandon();
    throw;
  }
  return kExitOk;
}

struct ModelArgs {
  std::string variant{"nodf"};
  std::uint32_t workers{2};
  std::uint32_t targets{1};
  std::uint64_t words{4};
  bool exhaustive{false};
  std::uint64_t samples{0};
  std::uint64_t seed{1};
  std::string report{"text"};
  std::string overlap{"shifted"};
  std::string counterexample{"counterexample.json"};
  std::string replay;
  std::uint64_t max_states{5'000'000};
};

harness::Scenario ScenarioFor(const ModelArgs& a) {
  const auto overlap = a.overlap == "identical" ? harness::Overlap::kIdentical : harness::Overlap::kShifted;
  if (a.overlap != "identical" && a.overlap != "shifted") {
    throw pmwcas::ContractViolation("overlap must be shifted or identical");
  }
  return harness::MakeIncrementScenario(pmwcas::ParseAlgorithm(a.variant), a.workers, a.targets, a.words, overlap);
}

int RunModelCheck(const ModelArgs& a) {
  const harness::Scenario scenario = ScenarioFor(a);
  const Algorithm variant = scenario.algorithm;
  nlohmann::json out{{"variant", a.variant}, {"workers", a.workers}, {"targets", a.targets}, {"words", a.words}};
  bool ok = true;
  std::optional<harness::CrashSchedule> counterexample;

  if (!a.replay.empty()) {
    const auto schedule = harness::CrashScheduleFromJson(nlohmann::json::parse(ReadFile(a.replay)));
    const harness::Verdict v = harness::RunSchedule(scenario, schedule);
    const auto sm = harness::CheckStateMachine(v.Triples(), variant);
    out["mode"] = "replay";
    out["verdict"] = harness::ToJson(v, variant);
    out["state_machine"] = {{"ok", sm.ok}, {"detail", sm.detail}};
    ok = v.ok && sm.ok;
  } else if (a.exhaustive) {
    harness::ExploreOptions crash;
    crash.max_states = a.max_states;
    const auto r1 = harness::Explore(scenario, crash);
    harness::ExploreOptions sm;
    sm.check_crashes = false;
    sm.check_state_machine = true;
    sm.evictions = true;
    sm.max_states = a.max_states;
    const auto r2 = r1.ok() ? harness::Explore(scenario, sm) : harness::ExploreResult{};
    out["mode"] = "exhaustive";
    out["crash_consistency"] = harness::ToJson(r1);
    out["state_machine"] = harness::ToJson(r2);
    ok = r1.ok() && r2.ok();
    counterexample = r1.counterexample ? r1.counterexample : r2.counterexample;
  } else {
    if (a.samples == 0) throw pmwcas::ContractViolation("choose --exhaustive, --samples N or --replay FILE");
    harness::EnumerateOptions eo;
    eo.bound = 0;
    eo.samples = a.samples;
    eo.seed = a.seed;
    std::uint64_t violations = 0;
    std::string first_failure;
    const auto r = harness::EnumerateSchedules(scenario, eo, [&](const harness::CrashSchedule& cs) {
      const auto v = harness::RunSchedule(scenario, cs);
      const auto sm = harness::CheckStateMachine(v.Triples(), variant);
      if (v.ok && sm.ok) return;
      if (violations++ == 0) {
        counterexample = cs;
        first_failure = v.ok ? sm.detail : v.failure;
      }
    });
    out["mode"] = "sampled";
    out["seed"] = a.seed;
    out["schedules"] = r.schedules;
    out["violations"] = violations;
    out["failure"] = first_failure;
    ok = violations == 0;
  }
  out["ok"] = ok;

  if (counterexample) {
    WriteOutput(a.counterexample, harness::ToJson(*counterexample).dump(2) + "\n");
    out["counterexample_file"] = a.counterexample;
  }
  if (a.report == "json") {
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << a.variant << " workers=" << a.workers << " targets=" << a.targets << " words=" << a.words << ": "
              << (ok ? "no violations" : "VIOLATION") << "\n";
    for (const char* key : {"crash_consistency", "state_machine"}) {
      if (!out.contains(key) || !out[key].contains("states")) continue;
      const auto& r = out[key];
      std::cout << "  " << key << ": states=" << r["states"] << " crash_images=" << r["crash_images"]
                << " complete=" << r["complete"] << " rows=" << r["rows_visited"].dump() << "\n";
      if (!r["failure"].get<std::string>().empty()) std::cout << "  failure: " << r["failure"] << "\n";
    }
    if (out.contains("schedules")) {
      std::cout << "  sampled schedules=" << out["schedules"] << " violations=" << out["violations"] << "\n";
    }
    if (out.contains("verdict")) {
      std::cout << "  replay: " << (out["verdict"]["ok"].get<bool>() ? "ok" : out["verdict"]["failure"]) << "\n";
    }
    if (counterexample) std::cout << "  counterexample written to " << a.counterexample << "\n";
  }
  return ok ? kExitOk : kExitViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persistent multi-word CAS: benchmark, heap tools and crash model checker"};
  app.require_subcommand(1);

  BenchArgs b;
  auto* bench_cmd = app.add_subcommand("bench", "Run the Zipf increment workload");
  bench_cmd->add_option("--algorithm", b.algorithm, "df, nodf or pcas")->check(CLI::IsMember({"df", "nodf", "pcas"}));
  bench_cmd->add_option("--threads", b.config.threads, "Worker threads");
  bench_cmd->add_option("--targets", b.config.k, "Words per operation (k)");
  bench_cmd->add_option("--words", b.config.words, "Number of words |W|");
  bench_cmd->add_option("--alpha", b.config.alpha, "Zipf skew");
  bench_cmd->add_option("--block-size", b.config.block_size, "Bytes between consecutive words");
  bench_cmd->add_option("--timeout-s", b.config.timeout_s, "Wall-clock limit in seconds");
  bench_cmd->add_option("--max-ops", b.config.max_ops, "Succeeded operations per thread");
  bench_cmd->add_option("--seed", b.config.seed, "Workload seed");
  bench_cmd->add_option("--backend", b.backend, "dram or real")->check(CLI::IsMember({"dram", "real"}));
  bench_cmd->add_option("--order", b.order, "index or contended-first")
      ->check(CLI::IsMember({"index", "contended-first"}));
  bench_cmd->add_option("--heap", b.config.heap_path, "Heap file for the real backend");
  bench_cmd->add_option("--format", b.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  bench_cmd->add_option("--sweep", b.sweep, "param=v1,v2[;param=...]; repeatable, cross product");
  bench_cmd->add_option("--out", b.out, "Output file (default stdout)");

  HeapArgs h;
  auto* create_cmd = app.add_subcommand("create-heap", "Create an empty heap file");
  create_cmd->add_option("--path", h.path, "Heap file")->required();
  create_cmd->add_option("--words", h.words, "Number of words");
  create_cmd->add_option("--block-size", h.block_size, "Bytes between consecutive words");
  create_cmd->add_option("--slots", h.slots, "Descriptor slots (maximum concurrent workers)");
  create_cmd->add_option("--max-targets", h.max_targets, "Maximum words per operation");
  create_cmd->add_option("--algorithm", h.algorithm, "df, nodf or pcas")->check(CLI::IsMember({"df", "nodf", "pcas"}));

  HeapArgs r;
  auto* recover_cmd = app.add_subcommand("recover", "Recover a heap file after a crash");
  recover_cmd->add_option("--path", r.path, "Heap file")->required();
  recover_cmd->add_flag("--force", r.force, "Recover even if the heap was shut down cleanly");

  ModelArgs m;
  auto* mc_cmd = app.add_subcommand("modelcheck", "Model-check crash consistency on the simulated heap");
  mc_cmd->add_option("--variant", m.variant, "df, nodf or pcas")->check(CLI::IsMember({"df", "nodf", "pcas"}));
  mc_cmd->add_option("--workers", m.workers, "Virtual workers");
  mc_cmd->add_option("--targets", m.targets, "Words per operation (k)");
  mc_cmd->add_option("--words", m.words, "Number of words |W|");
  auto* ex = mc_cmd->add_flag("--exhaustive", m.exhaustive, "Explore every interleaving, crash point and eviction");
  auto* sa = mc_cmd->add_option("--samples", m.samples, "Number of random schedules to check");
  ex->excludes(sa);
  mc_cmd->add_option("--seed", m.seed, "Sampling seed");
  mc_cmd->add_option("--report", m.report, "json or text")->check(CLI::IsMember({"json", "text"}));
  mc_cmd->add_option("--overlap", m.overlap, "shifted or identical target sets")
      ->check(CLI::IsMember({"shifted", "identical"}));
  mc_cmd->add_option("--counterexample", m.counterexample, "Where to write a failing schedule");
  mc_cmd->add_option("--replay", m.replay, "Replay a schedule file instead of searching");
  mc_cmd->add_option("--max-states", m.max_states, "Exploration state budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*bench_cmd) return RunBenchCommand(b);
    if (*create_cmd) return RunCreateHeap(h);
    if (*recover_cmd) return RunRecover(r);
    if (*mc_cmd) return RunModelCheck(m);
  } catch (const pmwcas::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const pmwcas::UnsupportedBackend& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const pmwcas::RecoveryError& e) {
    std::cerr << "recovery failed: " << e.what() << "\n";
    return kExitViolation;
  } catch (const pmwcas::HarnessError& e) {
    std::cerr << "harness error: " << e.what() << "\n";
    return kExitViolation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "bad input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pmwcas::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
